import json

import pytest

from rokhlindim.dynsys import make_cyclic
from rokhlindim.errors import ParameterError
from rokhlindim.markers import tiling_marker
from rokhlindim.rokhlin import RokhlinCover, cover_from_marker
from rokhlindim.scenario import (
    Scenario,
    ScenarioContext,
    ScenarioRunner,
    load_scenario,
)
from rokhlindim.scenario import commands

Z64 = {
    'schema': 'rokhlindim.scenario/1',
    'name': 'z64',
    'system': {'builder': 'cyclic', 'sizes': [64]},
    'n': 4,
    'd': 0,
    'towers': {'L_small': 1, 'n_param': 2},
    'crossed': {'n': 16, 'N': 2, 'family': 'tiling', 'delta_floor': 0.01},
}

Z6 = {
    'name': 'z6',
    'system': {'builder': 'cyclic', 'sizes': [6]},
    'n': 4,
    'stages': ['free-check', 'marker', 'cover'],
}

Z32SQ = {
    'name': 'z32sq',
    'system': {'builder': 'cyclic', 'sizes': [32, 32]},
    'n': 2,
    'stages': ['marker', 'cover'],
}


def write_scenario(tmp_path, obj, name='scenario.json'):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def run(obj, out, **kwargs):
    return ScenarioRunner(Scenario.from_json(obj), out, table=False, **kwargs).run()


# ----------------------------------------------------------------------
# scenario files
# ----------------------------------------------------------------------


def test_scenario_defaults():
    s = Scenario.from_json(Z64)
    assert s.stages == (
        'free-check', 'marker', 'cover', 'towers', 'verify', 'crossed'
    )
    assert s.tower_params.cover_side == 16
    assert s.crossed.test_ops == 'unit'
    assert Scenario.from_json(s.to_json()) == s


def test_scenario_stage_selection():
    s = Scenario.from_json(Z64).with_stages('cover,marker')
    assert s.stages == ('marker', 'cover')
    with pytest.raises(ParameterError):
        s.with_stages(['bake'])
    with pytest.raises(ParameterError):
        Scenario.from_json(Z6).with_stages(['crossed'])


@pytest.mark.parametrize('patch', [
    {'colour': 'blue'},
    {'schema': 'rokhlindim.scenario/0'},
    {'n': 0},
    {'n': 2.5},
    {'marker': 'greedy'},
    {'ifexists': 'sometimes'},
    {'towers': {'L_small': 1, 'taper': 3}},
    {'towers': {'delta_bump': 'a/b'}},
    {'crossed': {'n': 2, 'N': 4}},
    {'crossed': {'n': 4, 'N': 2, 'inner': 'kernel'}},
    {'crossed': {'n': 4, 'N': 2, 'test_ops': 'gaussian'}},
])
def test_scenario_rejects(patch):
    with pytest.raises(ParameterError):
        Scenario.from_json({**Z64, **patch})


def test_load_scenario(tmp_path):
    path = write_scenario(tmp_path, Z64)
    assert load_scenario(path).name == 'z64'
    bad = tmp_path / 'bad.json'
    bad.write_text('{"name": ')
    with pytest.raises(ParameterError):
        load_scenario(bad)


# ----------------------------------------------------------------------
# runs
# ----------------------------------------------------------------------


def test_full_run(tmp_path):
    report = run(Z64, tmp_path / 'out')
    assert report.passed, report.stages
    assert [s['status'] for s in report.stages] == ['done'] * 6
    assert report.stage('marker')['measured']['L'] == 2
    assert report.stage('crossed')['budget']['binding'] == 'floor'
    assert report.bounds['dim_rok_bound'] == 1
    for name in [
        'system.json', 'freeness.json', 'marker.json', 'cover.json',
        'towers.json', 'towers.csv', 'tolerances.json', 'crossed.json',
        'crossed.csv', 'report.json', 'timings.json',
    ]:
        assert (tmp_path / 'out' / name).exists(), name
    obj = json.loads((tmp_path / 'out' / 'report.json').read_text())
    assert obj['passed']
    assert 'timings' not in obj


def test_report_is_reproducible(tmp_path):
    run(Z64, tmp_path / 'a')
    run(Z64, tmp_path / 'b')
    a = (tmp_path / 'a' / 'report.json').read_bytes()
    b = (tmp_path / 'b' / 'report.json').read_bytes()
    assert a == b


def test_failed_freeness_skips_downstream(tmp_path):
    report = run(Z6, tmp_path)
    assert not report.passed
    free = report.stage('free-check')
    assert free['status'] == 'failed'
    assert free['measured']['radius'] == 7
    assert free['measured']['violations'] > 0
    assert report.stage('marker')['status'] == 'skipped'
    assert report.stage('cover')['status'] == 'skipped'


def test_stage_error_is_reported(tmp_path):
    report = run({**Z6, 'stages': ['marker']}, tmp_path)
    record = report.stage('marker')
    assert record['status'] == 'error'
    assert record['code'] == 'precondition'
    assert 'witness' in record


def test_crossed_family_side_mismatch(tmp_path):
    obj = {**Z64, 'crossed': {'n': 16, 'N': 2, 'family': 'towers'},
           'stages': ['crossed']}
    record = run(obj, tmp_path).stage('crossed')
    assert record['status'] == 'error'
    assert record['code'] == 'parameter'


def test_rank_two_marker_and_bounds(tmp_path):
    report = run(Z32SQ, tmp_path)
    assert report.passed
    assert report.stage('marker')['measured']['L'] == 4
    assert report.stage('cover')['measured']['towers'] == 4
    bounds = report.bounds
    assert (
        bounds['dim_rok_bound'],
        bounds['dim_rok_cyc_bound'],
        bounds['dim_nuc_bound'],
    ) == (3, 15, 63)
    assert bounds['crossed_product'] == 63


def _tripled_cover():
    sys = make_cyclic(64)
    w = tiling_marker(sys, 16)
    c = cover_from_marker(sys, w.Z, w.n, w.translates)
    return RokhlinCover(c.n, c.m, c.towers * 3)


@pytest.mark.parametrize('cover, verified, count', [
    (RokhlinCover(16, 1, []), False, 0),
    (_tripled_cover(), True, 3),
])
def test_towers_stage_rejects_unusable_cover(tmp_path, monkeypatch, cover, verified, count):
    monkeypatch.setattr(ScenarioContext, 'big_cover', property(lambda self: cover))
    report = run({**Z64, 'stages': ['towers', 'verify']}, tmp_path)
    record = report.stage('towers')
    assert record['status'] == 'failed'
    assert record['measured']['cover_verified'] is verified
    assert record['measured']['cover_towers'] == count
    assert record['budget']['cover_towers'] == 2
    assert report.stage('verify')['status'] == 'skipped'
    assert not (tmp_path / 'towers.json').exists()


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------


def test_run_command_exit_codes(tmp_path):
    good = write_scenario(tmp_path, Z64, 'z64.json')
    bad = write_scenario(tmp_path, Z6, 'z6.json')
    assert commands.run(scenario=str(good), out=str(tmp_path / 'good'),
                        stages=['marker', 'cover']) == 0
    assert commands.run(scenario=str(bad), out=str(tmp_path / 'bad')) == 1
    report = json.loads((tmp_path / 'bad' / 'report.json').read_text())
    assert [s['status'] for s in report['stages']] == [
        'failed', 'skipped', 'skipped',
    ]


def test_stage_commands(tmp_path):
    path = write_scenario(tmp_path, Z64)
    assert commands.free_check(scenario=str(path), out=str(tmp_path)) == 0
    report = json.loads((tmp_path / 'report.json').read_text())
    assert [s['stage'] for s in report['stages']] == ['free-check']


def test_unknown_key_command(tmp_path):
    path = write_scenario(tmp_path, {**Z64, 'colour': 'blue'})
    assert commands.run(scenario=str(path), out=str(tmp_path)) == 1
    assert not (tmp_path / 'report.json').exists()

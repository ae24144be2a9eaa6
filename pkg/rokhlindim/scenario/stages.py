"""
Pipeline stages
===============

Each stage is a function `stage(ctx) -> StageResult`. Intermediate
objects (system, markers, covers, tower families) live in a
`ScenarioContext` and are built on first use, so that any subset of
stages can run on its own.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from logging import getLogger
from pathlib import Path
from typing import Callable

from rokhlindim.cstar import (
    IdentityApproximation,
    InnerApproximation,
    PartitionApproximation,
    PipelineReport,
    make_test_ops,
    pipeline_defect,
)
from rokhlindim.dynsys import (
    SampledSystem,
    check_free,
    load_system,
    required_radius,
)
from rokhlindim.errors import ParameterError
from rokhlindim.lattice import enum_box, separation_vectors
from rokhlindim.markers import (
    ControlledMarkerWitness,
    build_controlled_marker,
    cover_window,
    tiling_marker,
    verify_controlled_marker,
)
from rokhlindim.rokhlin import (
    RokhlinCover,
    TowerFamily,
    cover_from_marker,
    indicator_towers,
    normalize_towers,
    towers_from_cover,
    verify_cover,
    verify_tower_relations,
)
from rokhlindim.scenario.scenario import Scenario
from rokhlindim.utils.io import read_json

lg = getLogger(__name__)

__all__ = ['StageResult', 'ScenarioContext', 'STAGE_FUNCTIONS']


@dataclass
class StageResult:
    """
    Outcome of a stage

    `measured` and `budget` end up in the run report; `artefacts` maps
    output file names to their content (a JSON object, or a list of rows
    for `.csv` files).
    """

    passed: bool
    measured: dict
    budget: dict = field(default_factory=dict)
    message: str = ''
    artefacts: dict = field(default_factory=dict)


class ScenarioContext:
    """Lazily built objects shared by the stages of a run"""

    def __init__(self, scenario: Scenario, *, seedless: bool = False):
        self.scenario = scenario
        self.seedless = seedless

    @cached_property
    def sys(self) -> SampledSystem:
        return load_system(self.scenario.system)

    @property
    def m(self) -> int:
        return self.sys.m

    @property
    def L_target(self) -> int:
        return 2 ** self.m * (self.scenario.d + 1)

    def window(self, n: int) -> list:
        """Cover window `M` of the controlled marker of side `n`"""
        F = enum_box('B', n, self.m)
        M, _ = cover_window(F, separation_vectors(n, self.scenario.d, self.m))
        return M

    def make_marker(self, n: int) -> ControlledMarkerWitness:
        if self.scenario.marker == 'tiling':
            return tiling_marker(self.sys, n)
        return build_controlled_marker(self.sys, n, self.scenario.d)

    @cached_property
    def marker(self) -> ControlledMarkerWitness:
        return self.make_marker(self.scenario.n)

    @cached_property
    def cover(self) -> RokhlinCover:
        w = self.marker
        return cover_from_marker(self.sys, w.Z, w.n, w.translates)

    @cached_property
    def big_cover(self) -> RokhlinCover:
        side = self.scenario.tower_params.cover_side
        lg.info(f'towers: building a cover of side {side}')
        w = self.make_marker(side)
        return cover_from_marker(self.sys, w.Z, w.n, w.translates)

    @cached_property
    def raw_towers(self) -> TowerFamily:
        params = self.scenario.tower_params
        return towers_from_cover(
            self.sys, self.big_cover,
            params.L_small, params.n_param, params.delta_bump,
        )

    @cached_property
    def towers(self) -> TowerFamily:
        return normalize_towers(self.raw_towers)

    def crossed_family(self) -> TowerFamily:
        crossed = self.scenario.crossed
        side = 2 * crossed.n
        if crossed.family == 'tiling':
            w = tiling_marker(self.sys, side)
            cover = cover_from_marker(self.sys, w.Z, w.n, w.translates)
            return normalize_towers(indicator_towers(self.sys, cover))
        if crossed.family == 'towers':
            family = self.towers
        else:
            family = TowerFamily.from_json(read_json(Path(crossed.family)))
        if family.n != side:
            raise ParameterError(
                f'Tower family of side {family.n} cannot feed crossed.n = '
                f'{crossed.n} (side {side} needed)'
            )
        return family

    def inner(self) -> InnerApproximation:
        crossed = self.scenario.crossed
        if crossed.inner == 'partition':
            return PartitionApproximation.blocks(self.sys.size, crossed.cell_width)
        return IdentityApproximation()


# ----------------------------------------------------------------------
# stages
# ----------------------------------------------------------------------


def free_check(ctx: ScenarioContext) -> StageResult:
    """Freeness at the radius required by the marker's cover window"""
    R = required_radius(ctx.window(ctx.scenario.n))
    cert = check_free(ctx.sys, R)
    elements = [list(g) for g in cert.elements()]
    message = f'free at radius {R}' if cert.free else (
        f'{len(elements)} element(s) of J_{R} with fixed points'
    )
    return StageResult(
        passed=cert.free,
        measured={
            'radius': R,
            'violations': len(cert.violations),
            'elements': elements[:8],
        },
        budget={'violations': 0},
        message=message,
        artefacts={'freeness.json': cert.to_json()},
    )


def marker(ctx: ScenarioContext) -> StageResult:
    """Controlled marker of side `n`"""
    w = ctx.marker
    report = verify_controlled_marker(ctx.sys, w)
    passed = report.ok and w.L <= ctx.L_target
    return StageResult(
        passed=passed,
        measured={
            'n': w.n,
            'L': w.L,
            'marker_size': len(w.Z),
            'verified': report.ok,
        },
        budget={'L': ctx.L_target},
        message=f'L = {w.L}, |Z| = {len(w.Z)}',
        artefacts={
            'marker.json': {**w.to_json(), 'verification': report.to_json()},
        },
    )


def cover(ctx: ScenarioContext) -> StageResult:
    """Rokhlin cover generated by the marker"""
    c = ctx.cover
    report = verify_cover(ctx.sys, c)
    return StageResult(
        passed=report.ok and c.L <= ctx.L_target,
        measured={'n': c.n, 'towers': c.L, 'verified': report.ok},
        budget={'towers': ctx.L_target},
        message=f'{c.L} towers of side {c.n}',
        artefacts={
            'cover.json': {**c.to_json(), 'verification': report.to_json()},
        },
    )


def _tower_rows(raw: TowerFamily, normalized: TowerFamily) -> list[dict]:
    window = list(raw.window)
    rows = []
    for l in range(raw.L):
        for k, v in enumerate(window):
            for x in range(raw.values.shape[-1]):
                rows.append({
                    'level': l,
                    'v': ' '.join(map(str, v)),
                    'point': x,
                    'raw': str(raw.values[l, k, x]),
                    'normalized': str(normalized.values[l, k, x]),
                })
    return rows


def towers(ctx: ScenarioContext) -> StageResult:
    """Tapered tower functions and their normalization"""
    params = ctx.scenario.tower_params
    big = ctx.big_cover
    report = verify_cover(ctx.sys, big)
    measured = {
        'cover_side': params.cover_side,
        'cover_towers': big.L,
        'cover_verified': report.ok,
    }
    budget = {'cover_towers': ctx.L_target}
    if not (report.ok and big.L <= ctx.L_target):
        lg.warning(f'towers: cover of side {big.n} is not usable: {measured}')
        return StageResult(
            passed=False,
            measured=measured,
            budget=budget,
            message=f'cover of side {big.n}: {big.L} towers, verified={report.ok}',
        )
    raw, normalized = ctx.raw_towers, ctx.towers
    return StageResult(
        passed=True,
        measured={**measured, 'levels': raw.L, 'side': raw.n},
        budget=budget,
        message=f'{raw.L} levels of side {raw.n}',
        artefacts={
            'towers.json': normalized.to_json(),
            'towers.csv': _tower_rows(raw, normalized),
        },
    )


def verify(ctx: ScenarioContext) -> StageResult:
    """Relation defects of the raw and normalized tower families"""
    params = ctx.scenario.tower_params
    raw = verify_tower_relations(ctx.sys, ctx.raw_towers)
    normalized = verify_tower_relations(ctx.sys, ctx.towers)
    measured = {
        'raw_eps1prime': raw.eps1prime,
        'raw_eps2': raw.eps2,
        'raw_eps3': raw.eps3,
        'normalized_eps1': normalized.eps1,
        'normalized_eps2': normalized.eps2,
        'normalized_eps3': normalized.eps3,
    }
    budget = {
        'raw_eps1prime': '>= 0',
        'raw_eps2': Fraction(0),
        'raw_eps3': Fraction(2, params.n_param),
        'normalized_eps1': Fraction(0),
    }
    passed = (
        raw.eps1prime >= 0
        and raw.eps2 == 0
        and raw.eps3 <= budget['raw_eps3']
        and normalized.eps1 == 0
    )
    if not passed:
        lg.warning(f'verify: tower defects outside budget: {measured}')
    return StageResult(
        passed=passed,
        measured=measured,
        budget=budget,
        message=f'eps3 = {raw.eps3} (raw), eps1 = {normalized.eps1} (normalized)',
        artefacts={
            'tolerances.json': {
                'raw': raw.to_json(),
                'normalized': normalized.to_json(),
            },
        },
    )


def crossed(ctx: ScenarioContext) -> StageResult:
    """Approximation defect in the crossed product"""
    params = ctx.scenario.crossed
    test_ops = make_test_ops(
        ctx.sys, params.N, params.test_ops, params.seed, ctx.seedless
    )
    report: PipelineReport = pipeline_defect(
        ctx.sys,
        ctx.crossed_family(),
        params.n,
        params.N,
        test_ops,
        inner=ctx.inner(),
        delta_floor=params.delta_floor,
        jobs=params.jobs,
        seedless=ctx.seedless,
    )
    obj = report.to_json()
    worst = max((op['measured']['defect'] for op in report.ops), default=0.0)
    return StageResult(
        passed=report.passed,
        measured={
            **obj['measured'],
            'defect': worst,
            'violations': len(report.violations),
        },
        budget=obj['budget'],
        message=f'defect {worst:.3g}, delta {report.delta:.3g} ({report.binding})',
        artefacts={
            'crossed.json': obj,
            'crossed.csv': report.rows(),
        },
    )


STAGE_FUNCTIONS: dict[str, Callable[[ScenarioContext], StageResult]] = {
    'free-check': free_check,
    'marker': marker,
    'cover': cover,
    'towers': towers,
    'verify': verify,
    'crossed': crossed,
}

import json
from fractions import Fraction

import numpy as np
import pytest

from rokhlindim.actions import File, IfExists, WriteCSV, WriteJSON, WriteText


def statuses(action):
    return [s['status'] for s in action]


def test_write_json(tmp_path):
    dst = tmp_path / 'sub' / 'a.json'
    obj = {'x': Fraction(1, 2), 'v': np.arange(2), 'ok': np.bool_(True)}
    assert statuses(WriteJSON(obj, dst)) == ['done']
    assert json.loads(dst.read_text()) == {'x': '1/2', 'v': [0, 1], 'ok': True}
    assert not (tmp_path / 'sub' / 'a.json.tmp').exists()


def test_identical_file_is_skipped(tmp_path):
    dst = tmp_path / 'a.json'
    WriteJSON({'a': 1}, dst).run()
    mtime = dst.stat().st_mtime_ns
    (status,) = list(WriteJSON({'a': 1}, dst))
    assert status == {'status': 'skipped', 'message': 'identical'}
    assert dst.stat().st_mtime_ns == mtime


def test_different_file_is_rewritten(tmp_path):
    dst = tmp_path / 'a.json'
    WriteJSON({'a': 1}, dst).run()
    assert statuses(WriteJSON({'a': 2}, dst)) == ['done']
    assert json.loads(dst.read_text()) == {'a': 2}


@pytest.mark.parametrize('mode,expected,content', [
    ('skip', 'skipped', 'old'),
    ('overwrite', 'done', 'new'),
    ('error', 'error', 'old'),
])
def test_ifexists_modes(tmp_path, mode, expected, content):
    dst = tmp_path / 'a.txt'
    dst.write_text('old')
    assert statuses(WriteText('new', dst, ifexists=mode)) == [expected]
    assert dst.read_text() == content


def test_ifexists_context(tmp_path):
    dst = tmp_path / 'a.txt'
    dst.write_text('old')
    with IfExists('skip'):
        WriteText('new', dst, ifexists='overwrite').run()
    assert dst.read_text() == 'old'
    assert IfExists.current is None
    with pytest.raises(ValueError):
        IfExists.from_any('sometimes')


def test_write_csv(tmp_path):
    dst = tmp_path / 'a.csv'
    rows = [{'level': 0, 'value': Fraction(1, 3)}, {'level': 1, 'value': None}]
    WriteCSV(rows, dst).run()
    assert dst.read_text() == 'level,value\n0,1/3\n1,\n'


def test_file_is_replaced_only_on_success(tmp_path):
    dst = tmp_path / 'a.txt'
    with pytest.raises(RuntimeError):
        with File(dst, 'wt') as ref:
            with ref.open() as f:
                f.write('partial')
            raise RuntimeError('interrupted')
    assert not dst.exists()
    assert not (tmp_path / 'a.txt.tmp').exists()

    with File(dst, 'wt') as ref:
        with ref.open() as f:
            f.write('complete')
    assert dst.read_text() == 'complete'


def test_file_open_outside_context(tmp_path):
    with pytest.raises(ValueError):
        File(tmp_path / 'a.txt', 'wt').open()


def test_content_digest_matches_file(tmp_path):
    from rokhlindim.utils.digests import get_content_digest, get_digest
    dst = tmp_path / 'a.txt'
    WriteText('héllo\n', dst).run()
    assert get_digest(dst) == get_content_digest('héllo\n')

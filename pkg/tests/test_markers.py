from fractions import Fraction

import pytest

from rokhlindim.dynsys import make_cyclic, make_odometer
from rokhlindim import markers
from rokhlindim.errors import ParameterError, PreconditionError, VerificationError
from rokhlindim.lattice import (
    CoveringTranslates,
    difference_box,
    enum_box,
    separation_vectors,
)
from rokhlindim.markers import (
    ControlledMarkerWitness,
    build_controlled_marker,
    build_marker,
    cover_window,
    difference_corners,
    extend_marker_step,
    star_condition,
    tiling_marker,
    verify_controlled_marker,
    verify_marker,
)
from rokhlindim.topo import PointSet


def pts(sys, *indices):
    return PointSet.from_indices(indices, sys.size)


# ----------------------------------------------------------------------
# verifiers
# ----------------------------------------------------------------------


def test_verify_marker_examples(z12):
    report = verify_marker(z12, pts(z12, 0, 3, 6, 9), enum_box('B', 3, 1), enum_box('J', 2, 1))
    assert report.ok

    report = verify_marker(z12, PointSet.empty(12), enum_box('B', 3, 1), enum_box('J', 2, 1))
    assert report.disjoint and not report.covers
    assert report.uncovered == list(range(12))

    report = verify_marker(z12, pts(z12, 0, 1), enum_box('B', 2, 1), enum_box('J', 2, 1))
    assert not report.disjoint
    assert report.collision['point'] == 1


def test_verify_controlled_marker_examples(z12):
    Z = pts(z12, 0, 3, 6, 9)
    assert verify_controlled_marker(z12, ControlledMarkerWitness(Z, 3, [(0,)])).ok
    assert verify_controlled_marker(z12, ControlledMarkerWitness(Z, 3, [(1,)])).ok
    report = verify_controlled_marker(z12, ControlledMarkerWitness(pts(z12, 0, 6), 3, [(0,)]))
    assert not report.ok
    assert report.uncovered == [3, 4, 5, 9, 10, 11]


def test_cover_window():
    M, blocks = cover_window(enum_box('B', 2, 1), [])
    assert sorted(M) == [(-1,), (0,), (1,)]
    assert len(blocks) == 1
    M, blocks = cover_window(enum_box('B', 2, 1), separation_vectors(2, 1, 1))
    assert sorted(M) == [(-1,), (0,), (1,), (3,), (4,), (5,)]
    assert len(blocks) == 2


def test_difference_corners():
    assert difference_corners(3, 1) == [(-2,), (1,)]
    assert difference_corners(2, 2) == [(-1, -1), (-1, 1), (1, -1), (1, 1)]


def test_difference_corners_missing(monkeypatch):
    monkeypatch.setattr(
        markers, 'cover_translates',
        lambda n, m: CoveringTranslates(((0,),), n),
    )
    with pytest.raises(VerificationError) as e:
        difference_corners(3, 1)
    assert e.value.witness == {'missing': [[1], [2]]}


# ----------------------------------------------------------------------
# extension step
# ----------------------------------------------------------------------


def test_extend_marker_step(z24):
    F = enum_box('B', 2, 1)
    U, V = pts(z24, 0), pts(z24, 10)
    W = extend_marker_step(z24, U, V, F, [], 0)
    assert U <= W
    assert verify_marker(z24, W, F, [(-1,), (0,), (1,)]).disjoint
    covered = {z24.act(g, x) for g in (-1, 0, 1) for x in W}
    assert 10 in covered


def test_extend_marker_step_nothing_to_add(z24):
    F = enum_box('B', 2, 1)
    U = pts(z24, 0)
    assert extend_marker_step(z24, U, pts(z24, 1), F, [], 0) == U


def test_extend_marker_step_from_empty(z24):
    F = enum_box('B', 3, 1)
    W = extend_marker_step(z24, PointSet.empty(24), pts(z24, 7), F, [], 0)
    assert W.to_json() == [7]


def test_extend_marker_step_preconditions(z24):
    F = enum_box('B', 2, 1)
    with pytest.raises(PreconditionError):
        extend_marker_step(z24, pts(z24, 0, 1), pts(z24, 10), F, [], 0)
    with pytest.raises(PreconditionError):
        extend_marker_step(z24, pts(z24, 0), pts(z24, 10, 11), F, [], 0)
    with pytest.raises(ParameterError):
        extend_marker_step(z24, pts(z24, 0), pts(z24, 10), F, [], 1)


def test_star_condition(z24):
    U, R = pts(z24, 0), pts(z24, 10)
    M = [-1, 0, 1]
    assert star_condition(z24, U, R, M, 0, 0).ok
    audit = star_condition(z24, U, R, M, 0, Fraction(9, 24))
    assert audit.max_count == 1 and not audit.ok
    assert audit.worst_point == 10
    # shrinking the radius never increases the count
    counts = [
        star_condition(z24, U, R, M, 0, Fraction(k, 24)).max_count
        for k in range(12)
    ]
    assert counts == sorted(counts)


# ----------------------------------------------------------------------
# constructions
# ----------------------------------------------------------------------


def test_build_marker_singletons(z24):
    F = enum_box('B', 2, 1)
    witness = build_marker(z24, F, [], 0)
    assert sorted(witness.cover_window) == [(-1,), (0,), (1,)]
    assert verify_marker(z24, witness.Z, F, witness.cover_window).ok


def test_build_marker_rank_two():
    sys = make_cyclic(16, 16)
    F = enum_box('B', 2, 2)
    witness = build_marker(sys, F, [], 0)
    assert sorted(witness.cover_window) == difference_box(2, 2)
    assert verify_marker(sys, witness.Z, F, witness.cover_window).ok


@pytest.mark.parametrize('N', [24, 64, 128])
@pytest.mark.parametrize('n', [2, 3, 4])
def test_build_controlled_marker_cyclic(N, n):
    sys = make_cyclic(N)
    witness = build_controlled_marker(sys, n, 0)
    assert witness.L == 2
    assert verify_controlled_marker(sys, witness).ok


def test_build_controlled_marker_examples(z64, z32sq):
    assert build_controlled_marker(z64, 4, 0).L == 2
    witness = build_controlled_marker(z64, 4, 1)
    assert witness.L == 4
    assert verify_controlled_marker(z64, witness).ok
    witness = build_controlled_marker(z32sq, 2, 0)
    assert witness.L == 4
    assert verify_controlled_marker(z32sq, witness).ok


def test_build_controlled_marker_not_free():
    with pytest.raises(PreconditionError) as e:
        build_controlled_marker(make_cyclic(6), 4, 0)
    assert e.value.witness['radius'] == 7


def test_controlled_marker_json_round_trip(z64):
    witness = build_controlled_marker(z64, 3, 0)
    again = ControlledMarkerWitness.from_json(witness.to_json(), z64)
    assert again.Z == witness.Z
    assert again.translates == witness.translates
    assert again.n == witness.n


def test_tiling_marker(z12):
    witness = tiling_marker(z12, 3)
    assert witness.Z.to_json() == [0, 3, 6, 9]
    assert witness.L == 1
    assert verify_controlled_marker(z12, witness).ok
    with pytest.raises(ParameterError):
        tiling_marker(z12, 5)
    with pytest.raises(ParameterError):
        tiling_marker(make_odometer(3), 2)

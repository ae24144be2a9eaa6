from fractions import Fraction

import numpy as np
import pytest

from rokhlindim.errors import ParameterError, PreconditionError, VerificationError
from rokhlindim.markers import build_controlled_marker
from rokhlindim.rokhlin import (
    RokhlinCover,
    TowerFamily,
    cover_from_marker,
    cover_from_marker_m1,
    crossed_product_bound,
    indicator_towers,
    normalize_towers,
    report_bounds,
    sqrt_family,
    taper_weight,
    towers_from_cover,
    verify_cover,
    verify_tower_relations,
)
from rokhlindim.topo import PointSet


def pts(sys, *indices):
    return PointSet.from_indices(indices, sys.size)


@pytest.fixture
def z12_cover(z12):
    return cover_from_marker(z12, pts(z12, 0, 3, 6, 9), 3, [(0,)])


def big_cover(sys, side, d=0):
    w = build_controlled_marker(sys, side, d)
    return cover_from_marker(sys, w.Z, w.n, w.translates)


# ----------------------------------------------------------------------
# covers
# ----------------------------------------------------------------------


def test_cover_from_marker_tiling(z12, z12_cover):
    assert z12_cover.L == 1
    assert [U.to_json() for U in z12_cover.towers[0]] == [
        [0, 3, 6, 9], [1, 4, 7, 10], [2, 5, 8, 11],
    ]
    assert verify_cover(z12, z12_cover).ok


@pytest.mark.parametrize('d,L', [(0, 2), (1, 4)])
def test_cover_from_controlled_marker(z64, d, L):
    cover = big_cover(z64, 4, d)
    assert cover.L == L == 2 ** 1 * (d + 1)
    assert verify_cover(z64, cover).ok


def test_cover_from_marker_rank_one(z64):
    w = build_controlled_marker(z64, 4, 0)
    cover = cover_from_marker_m1(z64, w.Z, 4, 1)
    assert cover.L == 4
    assert verify_cover(z64, cover).ok


def test_cover_from_marker_rejects_bad_marker(z12):
    with pytest.raises(VerificationError):
        cover_from_marker(z12, pts(z12, 0, 6), 3, [(0,)])


def test_verify_cover_failures(z12, z12_cover):
    towers = [list(z12_cover.towers[0])]
    towers[0][2] = PointSet.empty(12)
    report = verify_cover(z12, RokhlinCover(3, 1, towers))
    assert not report.covers
    assert report.uncovered == [2, 5, 8, 11]

    towers = [list(z12_cover.towers[0])]
    towers[0][1] = towers[0][0]
    report = verify_cover(z12, RokhlinCover(3, 1, towers))
    assert not report.equivariant
    assert report.equivariance_witness['v'] == [1]
    assert not report.disjoint


def test_cover_json_round_trip(z12, z12_cover):
    again = RokhlinCover.from_json(z12_cover.to_json(), z12)
    assert again.towers == z12_cover.towers


# ----------------------------------------------------------------------
# tower functions
# ----------------------------------------------------------------------


def test_taper_weight():
    assert taper_weight((5,), 1, 2) == Fraction(1, 2)
    assert taper_weight((4,), 1, 2) == 1
    assert taper_weight((-3,), 1, 2) == 1
    assert taper_weight((6,), 1, 2) == 0
    assert taper_weight((8,), 1, 2) == 0


def test_towers_from_cover_values(z64):
    cover = big_cover(z64, 16)
    family = towers_from_cover(z64, cover, 1, 2)
    assert family.values.shape == (2 * cover.L, 1, 64)
    assert family.provenance == 'raw'
    values = family.values
    assert all(0 <= x <= 1 for x in values.reshape(-1))
    halves = {x for x in values.reshape(-1) if 0 < x < 1}
    assert halves == {Fraction(1, 2)}
    assert min(family.total()) >= 1


def test_towers_from_cover_budgets(z64):
    cover = big_cover(z64, 32)
    raw = towers_from_cover(z64, cover, 2, 2)
    assert raw.values.shape == (2 * cover.L, 2, 64)
    report = verify_tower_relations(z64, raw)
    assert report.eps2 == 0
    assert report.eps3 <= Fraction(2, 2)
    assert report.eps1prime >= 0

    normalized = normalize_towers(raw)
    after = verify_tower_relations(z64, normalized)
    assert after.eps1 == 0
    assert after.eps2 == 0
    assert all(x == 1 for x in normalized.total())


def test_towers_from_cover_side_mismatch(z64):
    cover = big_cover(z64, 8)
    with pytest.raises(ParameterError):
        towers_from_cover(z64, cover, 1, 2)
    with pytest.raises(ParameterError):
        towers_from_cover(z64, cover, 0, 1)


def test_towers_from_cover_bump_too_large(z64):
    cover = big_cover(z64, 8)
    with pytest.raises(PreconditionError):
        towers_from_cover(z64, cover, 1, 1, delta_bump=Fraction(4, 64))


def test_towers_from_cover_with_bump(z64):
    cover = big_cover(z64, 8)
    family = towers_from_cover(z64, cover, 1, 1, delta_bump=Fraction(1, 128))
    assert verify_tower_relations(z64, family).eps1prime >= 0


def test_normalize_towers():
    values = np.empty((2, 1, 1), dtype=object)
    values[0, 0, 0] = Fraction(1)
    values[1, 0, 0] = Fraction(1, 2)
    family = normalize_towers(TowerFamily(1, 1, values))
    assert family.values[0, 0, 0] == Fraction(2, 3)
    assert family.values[1, 0, 0] == Fraction(1, 3)
    assert family.provenance == 'normalized'

    values[1, 0, 0] = Fraction(0)
    values[0, 0, 0] = Fraction(1, 2)
    with pytest.raises(PreconditionError) as e:
        normalize_towers(TowerFamily(1, 1, values))
    assert e.value.witness['point'] == 0


def test_normalize_exact_partition(z12, z12_cover):
    family = indicator_towers(z12, z12_cover)
    normalized = normalize_towers(family)
    assert np.array_equal(normalized.values, family.values)


def test_verify_tower_relations_tiling(z12, z12_cover):
    report = verify_tower_relations(z12, indicator_towers(z12, z12_cover))
    assert report.eps1 == report.eps2 == report.eps3 == 0
    assert report.eps4 == report.eps5 == 0


def test_verify_tower_relations_brute_force(z12, z12_cover):
    family = indicator_towers(z12, z12_cover)
    family.values[0, 1, 4] = Fraction(1, 2)
    report = verify_tower_relations(z12, family, [np.arange(12)])
    eps3 = 0
    for v in range(3):
        for w in range(3):
            f = family.function(0, (w,))
            g = family.function(0, (v + w,))
            for x in range(12):
                eps3 = max(eps3, abs(f[(x - v) % 12] - g[x]))
    assert report.eps3 == eps3 == Fraction(1, 2)
    assert report.eps1 == Fraction(1, 2)
    assert report.eps1prime == Fraction(-1, 2)
    assert report.eps2 == 0
    assert report.eps4 == 0


def test_sqrt_family(z12, z12_cover):
    family = indicator_towers(z12, z12_cover)
    family.values[0, 0, 0] = Fraction(1, 4)
    root = sqrt_family(family)
    assert root.provenance == 'sqrt'
    assert root.values[0, 0, 0] == pytest.approx(0.5)


def test_tower_family_json_round_trip(z12, z12_cover):
    family = normalize_towers(indicator_towers(z12, z12_cover))
    again = TowerFamily.from_json(family.to_json())
    assert again.provenance == 'normalized'
    assert np.array_equal(again.values, family.values)
    root = TowerFamily.from_json(sqrt_family(family).to_json())
    assert root.values.dtype == np.float64


# ----------------------------------------------------------------------
# bounds
# ----------------------------------------------------------------------


@pytest.mark.parametrize('d,m,expected', [
    (0, 1, (1, 3, 7)),
    (1, 1, (3, 7, 31)),
    (0, 2, (3, 15, 63)),
])
def test_report_bounds(d, m, expected):
    table = report_bounds(d, m)
    assert (table.dim_rok_bound, table.dim_rok_cyc_bound, table.dim_nuc_bound) == expected


def test_crossed_product_bound():
    assert crossed_product_bound(0, 3, 1) == 7
    assert crossed_product_bound(1, 3, 2) == 31
    with pytest.raises(ParameterError):
        crossed_product_bound(-1, 0, 1)
    with pytest.raises(ParameterError):
        report_bounds(0, 0)

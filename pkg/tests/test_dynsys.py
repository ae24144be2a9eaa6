from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from rokhlindim.dynsys import (
    act,
    check_free,
    fixed_point_set,
    is_isometric,
    load_system,
    make_cyclic,
    make_odometer,
    make_product,
    required_radius,
    system_to_json,
)
from rokhlindim.errors import ParameterError
from rokhlindim.lattice import enum_box


def test_act_cyclic():
    sys = make_cyclic(5)
    assert act(sys, 3, 4) == 2
    assert all(act(sys, 0, p) == p for p in range(5))


def test_act_product():
    sys = make_product(make_cyclic(4), make_cyclic(6))
    p = sys.index((3, 5))
    assert sys.labels[act(sys, (1, 1), p)] == (0, 0)


def test_act_composes():
    sys = make_cyclic(6, 4)
    for v, w in product(enum_box('J', 2, 2), repeat=2):
        vw = tuple(a + b for a, b in zip(v, w))
        for p in range(sys.size):
            assert act(sys, vw, p) == act(sys, v, act(sys, w, p))


def test_act_rank_mismatch():
    with pytest.raises(ParameterError):
        act(make_cyclic(6, 4), (1,), 0)


def test_cyclic_builder():
    sys = make_cyclic(6)
    assert act(sys, 1, 5) == 0
    assert sys.distance(0, 3) == Fraction(3, 6)


def test_odometer_builder():
    sys = make_odometer(3)
    assert sys.labels[act(sys, 1, sys.index((1, 1, 1)))] == (0, 0, 0)
    # lowest differing bit is bit 1
    assert sys.distance(sys.index((0, 0, 0)), sys.index((0, 1, 0))) == Fraction(1, 2)


def test_product_matches_cyclic():
    prod = make_product(make_cyclic(4), make_cyclic(4))
    cyc = make_cyclic(4, 4)
    assert prod.labels == cyc.labels
    assert np.array_equal(
        prod.dist_num * cyc.dist_den, cyc.dist_num * prod.dist_den
    )
    for g1, g2 in zip(prod.generators, cyc.generators):
        assert np.array_equal(g1, g2)


def test_generators_commute():
    sys = make_cyclic(4, 6)
    g0, g1 = sys.generators
    assert np.array_equal(g0[g1], g1[g0])
    sys.validate()


def test_fixed_point_set():
    sys = make_cyclic(8)
    assert len(fixed_point_set(sys, 3)) == 0
    assert len(fixed_point_set(sys, 8)) == 8
    assert len(fixed_point_set(make_odometer(4), 5)) == 0
    with pytest.raises(ParameterError):
        fixed_point_set(sys, 0)


def test_check_free():
    assert check_free(make_cyclic(64), 8).free
    cert = check_free(make_cyclic(4), 5)
    assert not cert.free
    assert (4,) in cert.elements()
    assert check_free(make_odometer(10), 16).free
    with pytest.raises(ParameterError):
        check_free(make_cyclic(4), 0)


@pytest.mark.parametrize('sizes', [(5,), (7,), (3, 4), (4, 4)])
@pytest.mark.parametrize('R', [1, 2, 3, 4, 6])
def test_check_free_matches_brute_force(sizes, R):
    sys = make_cyclic(*sizes)
    expected = any(
        any(g) and all(x % N == 0 for x, N in zip(g, sizes))
        for g in enum_box('J', R, len(sizes))
    )
    assert check_free(sys, R).free is not expected


def test_required_radius():
    assert required_radius([(0,), (1,), (2,)]) == 3
    assert required_radius([(-3,), (3,)]) == 7
    with pytest.raises(ParameterError):
        required_radius([])


def test_isometry():
    assert is_isometric(make_cyclic(6, 5)).isometric
    assert is_isometric(make_odometer(4)).isometric
    obj = {
        'points': [0, 1, 2],
        'metric': [[0, 1, 2], [1, 0, 1], [2, 1, 0]],
        'generators': [[1, 2, 0]],
    }
    audit = is_isometric(load_system(obj))
    assert not audit.isometric
    assert audit.witness is not None


@pytest.mark.parametrize('desc', [
    {'builder': 'cyclic', 'sizes': [6, 4]},
    {'builder': 'odometer', 'bits': 3},
    {'builder': 'product', 'factors': [
        {'builder': 'cyclic', 'sizes': [4]},
        {'builder': 'odometer', 'bits': 2},
    ]},
    {'builder': 'cyclic', 'sizes': [8], 'closure_eps': '1/8'},
])
def test_description_round_trip(desc):
    sys = load_system(desc)
    assert system_to_json(sys) == desc
    again = load_system(system_to_json(sys))
    assert np.array_equal(again.dist_num, sys.dist_num)
    assert again.closure_eps == sys.closure_eps


def test_explicit_round_trip():
    obj = {
        'points': ['a', 'b', 'c', 'd'],
        'metric': [
            [0, '1/2', 1, '1/2'],
            ['1/2', 0, '1/2', 1],
            [1, '1/2', 0, '1/2'],
            ['1/2', 1, '1/2', 0],
        ],
        'generators': [[1, 2, 3, 0]],
    }
    sys = load_system(obj)
    assert sys.distance(0, 1) == Fraction(1, 2)
    assert act(sys, 1, 3) == 0
    again = load_system(system_to_json(sys))
    assert again.labels == sys.labels
    assert np.array_equal(again.dist_num * sys.dist_den, sys.dist_num * again.dist_den)


@pytest.mark.parametrize('obj', [
    {'builder': 'cyclic', 'sizes': [1]},
    {'builder': 'odometer', 'bits': 0},
    {'builder': 'torus'},
    {'builder': 'cyclic'},
    {'points': [0, 1], 'metric': [[0, 1], [2, 0]], 'generators': [[1, 0]]},
    {'points': [0, 1], 'metric': [[0, 1], [1, 0]], 'generators': [[0, 0]]},
])
def test_invalid_descriptions(obj):
    with pytest.raises(ParameterError):
        load_system(obj)

import math
from fractions import Fraction

import numpy as np
import pytest

from rokhlindim.cstar.band import BandOperator
from rokhlindim.cstar.maps import PartitionApproximation
from rokhlindim.cstar.pipeline import (
    CpPipeline,
    make_test_ops,
    pipeline_defect,
    tower_identity,
)
from rokhlindim.dynsys import make_cyclic
from rokhlindim.errors import BudgetExceededError, ParameterError
from rokhlindim.rokhlin import TowerFamily, verify_tower_relations


@pytest.fixture
def z128():
    return make_cyclic(128)


def test_make_test_ops(z12):
    units = make_test_ops(z12, 2, 'unit')
    assert [label for label, _ in units] == ['u[-1]', 'u[0]', 'u[1]', 'u[2]']
    assert len(make_test_ops(z12, 1, 'ramp')) == 2
    (label, x), = make_test_ops(z12, 2, 'sum')
    assert label == 'sum'
    assert x.norm_upper() == pytest.approx(1.0)
    a = make_test_ops(z12, 1, 'random', seed=3)
    b = make_test_ops(z12, 1, 'random', seed=3)
    assert np.array_equal(a[0][1].terms[(0,)], b[0][1].terms[(0,)])
    with pytest.raises(ParameterError):
        make_test_ops(z12, 1, 'random', seedless=True)
    with pytest.raises(ParameterError):
        make_test_ops(z12, 1, 'gaussian')


def test_pipeline_parameters(z12, tiling_family):
    family = tiling_family(z12, 6)
    with pytest.raises(ParameterError):
        CpPipeline(z12, family, 3, 4)
    with pytest.raises(ParameterError):
        CpPipeline(z12, family, 2, 1)
    pipe = CpPipeline(z12, family, 3, 1)
    assert pipe.levels == 1
    assert pipe.selectors == [(0,), (1,)]


def test_tower_identity_is_exact(z12, tiling_family):
    pipe = CpPipeline(z12, tiling_family(z12, 6), 3, 1)
    assert tower_identity(pipe) == {'exact': True, 'holds': True, 'gap': 0.0}


def test_pipeline_maps_identity_close(z12, tiling_family):
    pipe = CpPipeline(z12, tiling_family(z12, 6), 3, 1)
    one = BandOperator.identity(z12)
    # sum_w d(w) sum_p f_{s_p(w)} = 1 on a tiling
    assert (one - pipe(one)).norm() <= 1e-12


def test_pipeline_defect_within_budget(z128, tiling_family):
    family = tiling_family(z128, 32)
    report = pipeline_defect(z128, family, 16, 2, delta_floor=0.005)
    assert report.passed, report.violations
    assert report.eps == 0.0
    assert report.delta_terms == {'epsilon': 0.0, 'floor': 0.005}
    assert report.binding == 'floor'
    assert report.delta == 0.005
    assert report.tower_identity['holds']
    assert not report.order_zero['skipped']
    assert report.order_zero['measured'] <= 1e-9
    assert len(report.ops) == 4
    for op in report.ops:
        assert op['budget']['defect'] == pytest.approx(32 * 0.005)
        assert op['budget']['term_defect'] == pytest.approx(16 * 0.005)
        # 2 * (delta / |J_N| + N / n)
        assert op['budget']['tail'] == pytest.approx(2 * (0.005 / 4 + 2 / 16))
        assert op['measured']['tail'] <= 2 / 16 + 1e-12
        assert op['measured']['defect'] <= op['measured']['defect_upper'] + 1e-12
    # n = 16 is too small for this delta: recorded, not failed
    assert not report.conditions['tail']['met']
    assert report.conditions['tail']['measured'] == pytest.approx(2 / 16)
    assert not report.conditions['commutator']['met']
    assert report.conditions['commutator']['measured'] == pytest.approx(math.sqrt(2 / 16))
    assert 'commutator' in report.ops[-1]['unmet']
    obj = report.to_json()
    assert obj['passed']
    assert obj['budget']['binding'] == 'floor'
    assert obj['conditions']['commutator']['required'] == pytest.approx(0.005 / 32)
    rows = report.rows()
    assert [row['op'] for row in rows] == ['u[-1]', 'u[0]', 'u[1]', 'u[2]']
    assert all(row['oracle_gap'] <= 1e-8 for row in rows)


def test_pipeline_defect_over_budget(z128, tiling_family):
    family = tiling_family(z128, 32)
    report = pipeline_defect(z128, family, 16, 2, delta_floor=0.001)
    assert not report.passed
    edge = report.ops[-1]
    assert edge['label'] == 'u[2]'
    assert not edge['passed']
    assert {'defect', 'term_defect'} <= {v['quantity'] for v in edge['violations']}
    with pytest.raises(BudgetExceededError):
        pipeline_defect(
            z128, family, 16, 2, delta_floor=0.001, raise_on_failure=True
        )


def test_pipeline_exact_model_has_zero_delta(z12, tiling_family):
    report = pipeline_defect(z12, tiling_family(z12, 6), 3, 1)
    assert report.eps == 0.0
    assert report.delta == 0.0
    assert report.tower_identity['holds']
    assert report.order_zero['measured'] <= 1e-9


def test_order_zero_on_perturbed_family(z12, tiling_family):
    family = tiling_family(z12, 6)
    values = family.values.copy()
    values[0, 0] = values[0, 0] * Fraction(999, 1000)
    perturbed = TowerFamily(family.n, family.m, values, 'normalized')
    tol = verify_tower_relations(z12, perturbed)
    assert tol.eps1 == Fraction(1, 1000)
    report = pipeline_defect(z12, perturbed, 3, 1)
    assert report.eps >= 1e-3
    J_n = 6
    oz = report.order_zero
    assert not oz['skipped']
    assert oz['budget'] == pytest.approx((J_n + 2) * J_n ** 3 * report.eps)
    assert oz['measured'] <= oz['budget']
    assert not [v for v in report.violations if v['quantity'] == 'order_zero']
    assert report.delta == pytest.approx(3 * J_n * 2 * report.eps)
    assert report.binding == 'epsilon'


def test_pipeline_defect_jobs(z12, tiling_family):
    family = tiling_family(z12, 6)
    ops = make_test_ops(z12, 1, 'ramp')
    serial = pipeline_defect(z12, family, 3, 1, ops)
    threaded = pipeline_defect(z12, family, 3, 1, ops, jobs=2)
    assert [op['label'] for op in threaded.ops] == [op['label'] for op in serial.ops]
    assert threaded.passed == serial.passed


def test_pipeline_with_partition(z12, tiling_family):
    family = tiling_family(z12, 6)
    inner = PartitionApproximation.blocks(12, 1)
    report = pipeline_defect(z12, family, 3, 1, inner=inner)
    assert report.inner == {'kind': 'PartitionApproximation', 's': 0, 'cells': 12}
    assert all(op['measured']['inner_tolerance'] == 0.0 for op in report.ops)


def test_pipeline_delta_floor(z12, tiling_family):
    family = tiling_family(z12, 6)
    report = pipeline_defect(z12, family, 3, 1, delta_floor=100.0)
    assert report.binding == 'floor'
    assert report.delta == 100.0
    assert report.passed
    assert all(c['met'] for c in report.conditions.values())

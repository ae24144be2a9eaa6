from fractions import Fraction

import numpy as np
import pytest

from rokhlindim.cstar.band import (
    BandOperator,
    CompressedOperator,
    DiagonalWeight,
    band_apply,
    commutator_sqrtD,
    compress_dense,
    compress_psi,
    dense_matrix,
    mu,
    sqrt_tent_gap,
)
from rokhlindim.dynsys import make_cyclic
from rokhlindim.errors import ParameterError


def ramp(sys, phase=0.0):
    x = np.arange(sys.size)
    return np.cos(2 * np.pi * x / sys.size + phase) + 1j * np.sin(x)


# ----------------------------------------------------------------------
# band operators
# ----------------------------------------------------------------------


@pytest.mark.parametrize('P', [8, 64])
@pytest.mark.parametrize('n', [1, 2, 4])
@pytest.mark.parametrize('v', [-1, 0, 2])
def test_compress_psi_matches_dense(P, n, v):
    sys = make_cyclic(P)
    op = BandOperator.single(sys, ramp(sys), (v,))
    oracle = compress_dense(sys, op, n)
    assert np.abs(compress_psi(sys, op, n).to_dense() - oracle).max() < 1e-12


def test_compress_psi_rank_two():
    sys = make_cyclic(4, 4)
    op = BandOperator(sys, {
        (1, 0): ramp(sys),
        (0, -1): ramp(sys, 1.0),
    })
    oracle = compress_dense(sys, op, 2)
    assert np.abs(compress_psi(sys, op, 2).to_dense() - oracle).max() < 1e-12


def test_product_is_composition(z12):
    A = BandOperator.single(z12, ramp(z12), 1)
    B = BandOperator(z12, {(-1,): ramp(z12, 0.5), (0,): 2.0})
    xi = np.zeros((12, 12), dtype=complex)
    window_slots = [k for k in range(12) if -2 <= k - 5 <= 2]
    xi[window_slots] = np.random.default_rng(1).standard_normal((5, 12))
    lhs = band_apply(z12, A @ B, 6, xi)
    rhs = band_apply(z12, A, 6, band_apply(z12, B, 6, xi))
    assert np.allclose(lhs, rhs)


def test_adjoint_is_conjugate_transpose(z12):
    op = BandOperator(z12, {(2,): ramp(z12), (-1,): ramp(z12, 2.0)})
    M = dense_matrix(z12, op, 4)
    assert np.allclose(dense_matrix(z12, op.adjoint(), 4), M.conj().T)


def test_band_algebra(z12):
    a = ramp(z12)
    A = BandOperator.single(z12, a, 1)
    assert (A - A).pruned().terms == {}
    assert np.allclose((2 * A).terms[(1,)], 2 * a)
    assert A.band_width == 1
    assert BandOperator.identity(z12).norm() == 1.0
    assert A.norm() == pytest.approx(np.abs(a).max())
    other = BandOperator.identity(make_cyclic(12))
    with pytest.raises(ParameterError):
        A + other


def test_norm_lower_estimate(z12):
    # u_1 + u_-1 has norm 2
    op = BandOperator(z12, {(1,): 1.0, (-1,): 1.0})
    assert 1.9 < op.norm(window=32) <= 2.0 + 1e-9
    assert op.norm() <= op.norm_upper()


def test_band_apply_window_too_small(z12):
    xi = np.zeros((4, 12))
    xi[-1] = 1.0
    op = BandOperator.single(z12, 1.0, 1)
    with pytest.raises(ParameterError):
        band_apply(z12, op, 2, xi)
    assert not band_apply(z12, op, 2, xi, truncate=True).any()


def test_bad_coefficient_shape(z12):
    with pytest.raises(ParameterError):
        BandOperator.single(z12, np.ones(5), 0)


# ----------------------------------------------------------------------
# compressed operators
# ----------------------------------------------------------------------


def test_matrix_units():
    e01 = CompressedOperator.unit(2, 1, 3, 0, 1)
    e12 = CompressedOperator.unit(2, 1, 3, 1, 2)
    product = e01 @ e12
    assert list(product.blocks) == [((0,), (2,))]
    assert (e12 @ e01).blocks == {}
    assert list(e01.adjoint().blocks) == [((1,), (0,))]
    with pytest.raises(ParameterError):
        CompressedOperator.unit(2, 1, 3, 0, 3)


def test_compressed_norms_agree(z12):
    op = BandOperator(z12, {(1,): ramp(z12), (0,): 0.5, (-2,): 1.0})
    X = compress_psi(z12, op, 3)
    exact = X.norm('exact')
    assert exact == pytest.approx(np.linalg.norm(X.to_dense(), 2))
    assert X.norm('power', max_iter=2000) == pytest.approx(exact, rel=1e-3)
    with pytest.raises(ParameterError):
        X.norm('guess')


# ----------------------------------------------------------------------
# tent weights and mu
# ----------------------------------------------------------------------


def test_diagonal_weight():
    D = DiagonalWeight(2, 1)
    assert list(D.exact().values()) == [
        Fraction(1, 2), Fraction(1), Fraction(1, 2), Fraction(0),
    ]
    assert np.allclose(np.diag(D.matrix()), [0.5, 1.0, 0.5, 0.0])


def test_mu_of_identity_is_weight(z12):
    X = mu(z12, BandOperator.identity(z12), 3)
    mats = X.pointwise_matrices()
    expected = DiagonalWeight(3, 1).values()
    assert np.allclose(mats[0], np.diag(expected))
    assert np.allclose(mats[7], np.diag(expected))


def test_sqrt_tent_gap():
    root, gap = sqrt_tent_gap(4, 1, (1,))
    assert gap == Fraction(1, 4)
    assert root == pytest.approx(0.5)


def test_commutator_with_sqrt_weight(z64):
    small = commutator_sqrtD(z64, np.ones(64), 1, 4)
    large = commutator_sqrtD(z64, np.ones(64), 1, 16)
    assert small.ok and large.ok
    assert small.estimate == pytest.approx(small.bound, abs=1e-12)
    assert small.bound == pytest.approx(0.5)
    assert small.tent_bound == pytest.approx(0.25)
    assert 1.8 <= small.estimate / large.estimate <= 2.2
    assert small.to_json()['ok']

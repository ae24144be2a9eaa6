"""
Completely positive maps of the crossed-product approximation.

* inner approximations `(F, psi, phi)` of the coefficient algebra and
  their amplifications `psi_n`, `phi_n`;
* `sigma`: the map `M_K(C(sample)) -> crossed product` built from the
  square roots of a tower family of side `2n`,
  `e_{v,w} (x) a -> f_{s_p(v)}^{1/2} u_v a u_w^* f_{s_p(w)}^{1/2}`;
* audits: order-zero defect, almost-orthogonality (Cotlar-Stein),
  positivity and the tower-relation defect of `sigma`.
"""
from dataclasses import dataclass
from functools import reduce
from logging import getLogger
from numbers import Number
from typing import Callable, Iterable, Sequence

import numpy as np

from rokhlindim.cstar.band import (
    BandOperator,
    CompressedOperator,
    dense_matrix,
    translate_function,
)
from rokhlindim.dynsys import SampledSystem
from rokhlindim.errors import ParameterError
from rokhlindim.lattice import (
    BoxWindow,
    Vector,
    as_vector,
    index_unshift,
    shift_s,
    sub,
)
from rokhlindim.rokhlin import TowerFamily, sqrt_family

lg = getLogger(__name__)

__all__ = [
    'InnerApproximation',
    'IdentityApproximation',
    'PartitionApproximation',
    'CotlarReport',
    'PositivityReport',
    'psi_n',
    'phi_n',
    'sigma',
    'tower_index',
    'star_defect',
    'order_zero_defect',
    'orthogonal_test_pairs',
    'positivity_defect',
    'cotlar_bound_check',
]


# ----------------------------------------------------------------------
# inner approximations
# ----------------------------------------------------------------------


class InnerApproximation:
    """
    A c.p. approximation `A -> F -> A` of the coefficient algebra by a
    finite-dimensional commutative algebra `F = C^k`, of nuclear
    dimension `s`.
    """

    s: int = 0

    def dim(self, size: int) -> int:
        """Dimension of `F` for a sample of `size` points"""
        raise NotImplementedError

    def psi(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def phi(self, b: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tolerance(self, functions: Iterable[np.ndarray]) -> float:
        """`max ||phi(psi(a)) - a||` over the given functions"""
        return max(
            (float(np.abs(self.phi(self.psi(a)) - a).max()) for a in functions),
            default=0.0,
        )

    def to_json(self) -> dict:
        return {'kind': type(self).__name__, 's': self.s}


class IdentityApproximation(InnerApproximation):
    """`F = C(sample)`, `psi = phi = id` (exact)"""

    def dim(self, size: int) -> int:
        return size

    def psi(self, a: np.ndarray) -> np.ndarray:
        return a

    def phi(self, b: np.ndarray) -> np.ndarray:
        return b


class PartitionApproximation(InnerApproximation):
    """
    Conditional expectation onto functions constant on the cells of a
    partition of the sample; `phi` is the inclusion.

    Parameters
    ----------
    cells : sequence[int]
        Cell label of each point
    """

    def __init__(self, cells: Sequence[int]):
        labels, inverse = np.unique(np.asarray(cells), return_inverse=True)
        self.cells = inverse
        self.counts = np.bincount(inverse)
        self.k = len(labels)

    @classmethod
    def blocks(cls, size: int, width: int) -> "PartitionApproximation":
        """Cells of `width` consecutive point indices"""
        if width < 1:
            raise ParameterError(f'Cell width must be >= 1, got {width}')
        return cls(np.arange(size) // width)

    def dim(self, size: int) -> int:
        if size != len(self.cells):
            raise ParameterError(
                f'Partition of {len(self.cells)} points used on {size}'
            )
        return self.k

    def psi(self, a: np.ndarray) -> np.ndarray:
        sums = np.zeros(self.k, dtype=np.complex128)
        np.add.at(sums, self.cells, a)
        return sums / self.counts

    def phi(self, b: np.ndarray) -> np.ndarray:
        return b[self.cells]

    def to_json(self) -> dict:
        return {**super().to_json(), 'cells': self.k}


def psi_n(X: CompressedOperator, inner: InnerApproximation) -> CompressedOperator:
    """Blockwise `psi`"""
    return X.map_blocks(inner.psi, size=inner.dim(X.size))


def phi_n(
    Y: CompressedOperator, inner: InnerApproximation, size: int
) -> CompressedOperator:
    """Blockwise `phi`, back onto a sample of `size` points"""
    return Y.map_blocks(inner.phi, size=size)


# ----------------------------------------------------------------------
# sigma
# ----------------------------------------------------------------------


def _root(family: TowerFamily) -> TowerFamily:
    return family if family.provenance == 'sqrt' else sqrt_family(family)


def _selector(p, m: int) -> Vector:
    p = as_vector(p, m)
    if any(x not in (0, 1) for x in p):
        raise ParameterError(f'Shift selector must be in {{0,1}}^m, got {p}')
    return p


def tower_index(p: Vector, n: int, v: Vector) -> Vector:
    """Index in `B_{2n}` of the tower function `f_{s_p(v)}`, `v` in `J_n`"""
    return index_unshift(shift_s(p, n, v), n)


def sigma(
    sys: SampledSystem,
    family: TowerFamily,
    l: int,
    p,
    compressed: CompressedOperator,
) -> BandOperator:
    """
    Apply `sigma_p^(l)` to a compressed operator

    Parameters
    ----------
    sys : SampledSystem
        System
    family : TowerFamily
        Tower family of side `2n`; its square roots are taken unless
        its provenance is already 'sqrt'
    l : int
        Level
    p : vector in {0,1}^m
        Shift selector
    compressed : CompressedOperator
        Operator indexed by `J_n`, with coefficients on the sample

    Returns
    -------
    BandOperator
        `sum_{v,w} f_{s_p(v)}^{1/2} alpha^v(b_{v,w})
        alpha^{v-w}(f_{s_p(w)}^{1/2}) u_{v-w}`
    """
    n = compressed.n
    if family.n != 2 * n or family.m != sys.m:
        raise ParameterError(
            f'Tower family of side {family.n} does not match the window '
            f'J_{n} (side {2 * n} expected)'
        )
    if compressed.size != sys.size:
        raise ParameterError('Compressed operator is not over the sample')
    if not 0 <= l < family.L:
        raise ParameterError(f'Level {l} out of range')
    p = _selector(p, sys.m)
    root = _root(family)
    terms: dict[Vector, np.ndarray] = {}
    for (v, w), b in compressed.blocks.items():
        fv = root.function(l, tower_index(p, n, v))
        fw = root.function(l, tower_index(p, n, w))
        shift = sub(v, w)
        c = fv * translate_function(sys, b, v) * translate_function(sys, fw, shift)
        terms[shift] = terms[shift] + c if shift in terms else c
    return BandOperator(sys, terms)


def star_defect(
    sys: SampledSystem,
    family: TowerFamily,
    l: int,
    p,
    v,
    w,
    a,
    root: TowerFamily | None = None,
) -> float:
    """
    `||sigma_p^(l)(e_{v,w} (x) a) - f_{s_p(v)} u_v a u_{-w}||`

    Both sides are multiples of `u_{v-w}`, so the norm is exact.
    """
    v, w = as_vector(v, sys.m), as_vector(w, sys.m)
    n = family.n // 2
    p = _selector(p, sys.m)
    a = np.broadcast_to(np.asarray(a, dtype=np.complex128), (sys.size,))
    unit = CompressedOperator.unit(n, sys.m, sys.size, v, w, a)
    lhs = sigma(sys, root or family, l, p, unit)
    f = np.asarray(
        family.function(l, tower_index(p, n, v)), dtype=np.float64
    )
    rhs = BandOperator.single(sys, f * translate_function(sys, a, v), sub(v, w))
    return (lhs - rhs).norm()


# ----------------------------------------------------------------------
# audits
# ----------------------------------------------------------------------


def _norm(x) -> float:
    if isinstance(x, np.ndarray):
        if x.ndim == 1:
            return float(np.abs(x).max()) if x.size else 0.0
        return float(np.linalg.norm(x, 2))
    if isinstance(x, BandOperator):
        return x.norm(window=2 * x.band_width + 1)
    if isinstance(x, CompressedOperator):
        return x.norm()
    if isinstance(x, Number):
        return abs(x)
    raise ParameterError(f'Cannot take the norm of {type(x).__name__}')


def _product(a, b):
    if isinstance(a, np.ndarray) and a.ndim == 1:
        return a * b
    return a @ b


def _adjoint(x):
    if isinstance(x, np.ndarray):
        return np.conj(x) if x.ndim == 1 else np.conj(x).T
    return x.adjoint()


def order_zero_defect(
    map_under_test: Callable,
    orthogonal_pairs: Iterable[tuple],
    *,
    atol: float = 1e-12,
) -> float:
    """
    `max ||T(a) T(b)|| / (||a|| ||b||)` over pairs with `ab = 0`

    Band-operator outputs are measured with `BandOperator.norm`.

    Parameters
    ----------
    map_under_test : callable
        The map `T`
    orthogonal_pairs : iterable of (a, b)
        Pairs of functions (1D arrays), matrices (2D arrays) or
        compressed operators

    Returns
    -------
    float
    """
    worst = 0.0
    for i, (a, b) in enumerate(orthogonal_pairs):
        na, nb = _norm(a), _norm(b)
        if na == 0 or nb == 0:
            continue
        gap = _norm(_product(a, b))
        if gap > atol * na * nb:
            raise ParameterError(
                f'Test pair {i} is not orthogonal (|ab| = {gap:.3g})',
                witness={'pair': i, 'product_norm': gap},
            )
        value = _norm(_product(map_under_test(a), map_under_test(b))) / (na * nb)
        worst = max(worst, value)
    return worst


def orthogonal_test_pairs(
    size: int, n: int, m: int
) -> list[tuple[CompressedOperator, CompressedOperator]]:
    """
    Orthogonal pairs of matrix units over `J_n`:

    * `(e_{v,v}, e_{w,w})`, `v != w`;
    * `(e_{v,w}, e_{v,w})`, `v != w`;
    * `(e_{v,v} (x) 1_E, e_{v,v} (x) 1_{E^c})` with `E` the first half
      of the sample.
    """
    window = list(BoxWindow('J', n, m))
    unit = CompressedOperator.unit
    pairs = []
    for i, v in enumerate(window):
        for w in window[i + 1:]:
            pairs.append((unit(n, m, size, v, v), unit(n, m, size, w, w)))
            pairs.append((unit(n, m, size, v, w), unit(n, m, size, v, w)))
            pairs.append((unit(n, m, size, w, v), unit(n, m, size, w, v)))
    half = np.zeros(size)
    half[: size // 2] = 1
    for v in window:
        pairs.append((
            unit(n, m, size, v, v, half), unit(n, m, size, v, v, 1 - half)
        ))
    return pairs


@dataclass
class PositivityReport:
    """Least eigenvalue of a compression of `sigma(y^* y)`"""

    min_eigenvalue: float
    window: int
    tol: float = 1e-9

    @property
    def ok(self) -> bool:
        return self.min_eigenvalue >= -self.tol

    def to_json(self) -> dict:
        return {
            'min_eigenvalue': self.min_eigenvalue,
            'window': self.window,
            'ok': self.ok,
        }


def positivity_defect(
    sys: SampledSystem,
    family: TowerFamily,
    l: int,
    p,
    y: CompressedOperator,
    window: int | None = None,
) -> PositivityReport:
    """
    Least eigenvalue of `sigma_p^(l)(y^* y)` compressed to `J_K`
    (default `K = 2n`)
    """
    x = sigma(sys, family, l, p, y.adjoint() @ y)
    K = window or 2 * y.n
    M = dense_matrix(sys, x, K)
    H = (M + M.conj().T) / 2
    value = float(np.linalg.eigvalsh(H).min()) if H.size else 0.0
    return PositivityReport(value, K)


@dataclass
class CotlarReport:
    """
    Almost-orthogonality check `||sum b_j|| <= delta + max ||b_j||`
    given `||b_i^* b_j|| <= eta`
    """

    eta: float
    delta: float
    pairwise_max: float
    sum_norm: float
    max_norm: float
    contractions: bool

    @property
    def premise(self) -> bool:
        return self.pairwise_max <= self.eta + 1e-12 and self.contractions

    @property
    def holds(self) -> bool:
        return self.sum_norm <= self.delta + self.max_norm + 1e-12

    def to_json(self) -> dict:
        return {
            'eta': self.eta,
            'delta': self.delta,
            'pairwise_max': self.pairwise_max,
            'sum_norm': self.sum_norm,
            'max_norm': self.max_norm,
            'contractions': self.contractions,
            'premise': self.premise,
            'holds': self.holds,
        }


def cotlar_bound_check(
    operators: Sequence, eta: float, delta: float
) -> CotlarReport:
    """
    Check an instance of the Cotlar-Stein type inequality

    A violated premise is reported and the conclusion is checked anyway.
    """
    operators = list(operators)
    if not operators:
        raise ParameterError('Empty operator family')
    norms = [_norm(b) for b in operators]
    pairwise = 0.0
    for i, bi in enumerate(operators):
        for j, bj in enumerate(operators):
            if i != j:
                pairwise = max(pairwise, _norm(_product(_adjoint(bi), bj)))
    total = reduce(lambda x, y: x + y, operators)
    report = CotlarReport(
        float(eta), float(delta), pairwise, _norm(total), max(norms),
        all(x <= 1 + 1e-12 for x in norms),
    )
    if not report.premise:
        lg.warning(
            f'almost-orthogonality premise fails: max |b_i* b_j| = '
            f'{pairwise:.3g} > eta = {eta}'
        )
    return report

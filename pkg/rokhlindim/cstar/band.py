"""
Band model of the crossed product `C(X) x Z^m`.

A `BandOperator` is a finite sum `sum_v a_v u_v` with coefficient
functions `a_v` on the sample. It acts on `l2(Z^m) (x) l2(sample)`
through the regular representation

    (a u_v xi)_w = alpha^{-w}(a) * xi_{w-v}

where `alpha^v(a) = a o alpha^{-v}`, i.e. `alpha^{-w}(a) = a[perm(w)]`.

A `CompressedOperator` is an element of `M_K(C(X))`, `K = |J_n|`,
stored as a sparse map of blocks `(w, w') -> function`. Compressing a
band operator to the window `J_n` gives

    Psi(a u_v) = sum_{w in J_n, w - v in J_n} e_{w, w-v} (x) alpha^{-w}(a)

Vectors on a window `J_K` are arrays of shape `(|J_K|, P)`; flattened
indices are slot-major (`slot * P + point`).
"""
from dataclasses import dataclass, field
from fractions import Fraction
from logging import getLogger
from numbers import Number
from typing import Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from rokhlindim.cstar.norms import operator_norm
from rokhlindim.dynsys import SampledSystem
from rokhlindim.errors import ParameterError
from rokhlindim.lattice import (
    BoxWindow,
    TentProfile,
    Vector,
    add,
    as_vector,
    neg,
    norm_inf,
    sub,
    zero,
)

lg = getLogger(__name__)

__all__ = [
    'BandOperator',
    'CompressedOperator',
    'DiagonalWeight',
    'CommutatorEstimate',
    'band_apply',
    'regular_matrix',
    'dense_matrix',
    'compress_dense',
    'compress_psi',
    'mu',
    'commutator_sqrtD',
    'translate_function',
    'scale_blocks',
    'sqrt_tent_gap',
]

# compressed operators with at most this many slots get exact norms
EXACT_NORM_SLOTS = 256


def _coef(sys: SampledSystem, a) -> np.ndarray:
    if isinstance(a, Number):
        return np.full(sys.size, complex(a))
    a = np.asarray(a, dtype=np.complex128)
    if a.shape != (sys.size,):
        raise ParameterError(
            f'Coefficient functions must have shape ({sys.size},), '
            f'got {a.shape}'
        )
    return a


def translate_function(sys: SampledSystem, a: np.ndarray, v: Vector) -> np.ndarray:
    """`alpha^v(a) = a o alpha^{-v}`"""
    return a[sys.permutation(neg(v))]


# ----------------------------------------------------------------------
# band operators
# ----------------------------------------------------------------------


@dataclass(eq=False)
class BandOperator:
    """
    Finite sum `sum_v a_v u_v` in the crossed product.

    Supports `+`, `-`, scalar `*`, `@` (product in the crossed product)
    and `adjoint()`.
    """

    sys: SampledSystem
    terms: dict[Vector, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        terms = {}
        for v, a in dict(self.terms).items():
            v = as_vector(v, self.sys.m)
            a = _coef(self.sys, a)
            terms[v] = terms[v] + a if v in terms else a
        self.terms = terms

    @classmethod
    def single(cls, sys: SampledSystem, a, v) -> "BandOperator":
        """The operator `a u_v`"""
        return cls(sys, {as_vector(v, sys.m): a})

    @classmethod
    def identity(cls, sys: SampledSystem) -> "BandOperator":
        return cls(sys, {zero(sys.m): 1.0})

    @property
    def m(self) -> int:
        return self.sys.m

    @property
    def band_width(self) -> int:
        """Largest `|v|_inf` over the terms"""
        return max((norm_inf(v) for v in self.terms), default=0)

    def pruned(self, atol: float = 0.0) -> "BandOperator":
        """Drop terms whose coefficient is (numerically) zero"""
        return BandOperator(self.sys, {
            v: a for v, a in self.terms.items() if np.abs(a).max() > atol
        })

    def _check(self, other: "BandOperator") -> None:
        if other.sys is not self.sys:
            raise ParameterError('Band operators live on different systems')

    def __add__(self, other: "BandOperator") -> "BandOperator":
        if not isinstance(other, BandOperator):
            return NotImplemented
        self._check(other)
        terms = dict(self.terms)
        for v, a in other.terms.items():
            terms[v] = terms[v] + a if v in terms else a
        return BandOperator(self.sys, terms)

    def __neg__(self) -> "BandOperator":
        return BandOperator(self.sys, {v: -a for v, a in self.terms.items()})

    def __sub__(self, other: "BandOperator") -> "BandOperator":
        if not isinstance(other, BandOperator):
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar) -> "BandOperator":
        if not isinstance(scalar, Number):
            return NotImplemented
        return BandOperator(
            self.sys, {v: complex(scalar) * a for v, a in self.terms.items()}
        )

    __rmul__ = __mul__

    def __matmul__(self, other: "BandOperator") -> "BandOperator":
        # (a u_v)(b u_w) = a alpha^v(b) u_{v+w}
        if not isinstance(other, BandOperator):
            return NotImplemented
        self._check(other)
        terms: dict[Vector, np.ndarray] = {}
        for v, a in self.terms.items():
            for w, b in other.terms.items():
                c = a * translate_function(self.sys, b, v)
                key = add(v, w)
                terms[key] = terms[key] + c if key in terms else c
        return BandOperator(self.sys, terms)

    def adjoint(self) -> "BandOperator":
        # (a u_v)^* = alpha^{-v}(conj(a)) u_{-v}
        return BandOperator(self.sys, {
            neg(v): translate_function(self.sys, np.conj(a), neg(v))
            for v, a in self.terms.items()
        })

    def norm_upper(self) -> float:
        """`sum_v sup |a_v|`, an upper bound of the norm"""
        return float(sum(np.abs(a).max() for a in self.terms.values()))

    def norm(self, window: int | None = None, **kwargs) -> float:
        """
        Operator norm.

        Exact (`sup |a|`) for a single term. Otherwise a lower estimate:
        the norm of the operator restricted to inputs on `J_K`, with
        `K = window` (default `2 * band_width + 1`) and untruncated
        outputs.
        """
        terms = self.pruned()
        if not terms.terms:
            return 0.0
        if len(terms.terms) == 1:
            (a,) = terms.terms.values()
            return float(np.abs(a).max())
        K = window or 2 * terms.band_width + 1
        return float(operator_norm(terms.as_linear_operator(K), **kwargs))

    def as_linear_operator(self, window: int) -> LinearOperator:
        """
        Restriction to inputs supported on `J_K`, with outputs on the
        padded window `J_{K + band_width}`
        """
        inner = BoxWindow('J', window, self.m)
        outer = BoxWindow('J', window + self.band_width, self.m)
        P = self.sys.size
        embed = np.array([outer.index(w) for w in inner])
        adjoint = self.adjoint()
        K_out = window + self.band_width

        def matvec(x):
            xi = np.zeros((len(outer), P), dtype=np.complex128)
            xi[embed] = np.reshape(x, (len(inner), P))
            return band_apply(self.sys, self, K_out, xi).reshape(-1)

        def rmatvec(y):
            out = band_apply(
                self.sys, adjoint, K_out, np.reshape(y, (len(outer), P)),
                truncate=True,
            )
            return out[embed].reshape(-1)

        return LinearOperator(
            (len(outer) * P, len(inner) * P),
            matvec=matvec, rmatvec=rmatvec, dtype=np.complex128,
        )

    def __repr__(self) -> str:
        keys = ', '.join(str(v) for v in sorted(self.terms))
        return f'BandOperator(terms=[{keys}])'


def band_apply(
    sys: SampledSystem,
    op: BandOperator,
    window_pad: int,
    vector: np.ndarray,
    *,
    truncate: bool = False,
) -> np.ndarray:
    """
    Apply a band operator to a vector on the window `J_K`

    Parameters
    ----------
    sys : SampledSystem
        System
    op : BandOperator
        Operator
    window_pad : int
        Window parameter `K`
    vector : (|J_K|, P) or (|J_K| * P,) array
        Input, slot-major

    Other Parameters
    ----------------
    truncate : bool
        Drop outputs leaving the window instead of rejecting them

    Returns
    -------
    (|J_K|, P) array
    """
    window = BoxWindow('J', window_pad, sys.m)
    P = sys.size
    xi = np.asarray(vector, dtype=np.complex128)
    flat = xi.ndim == 1
    xi = xi.reshape(len(window), P)
    out = np.zeros_like(xi)
    slots = list(window)
    support = [k for k, w in enumerate(slots) if np.any(xi[k])]
    for v, a in op.terms.items():
        for k in support:
            target = add(slots[k], v)
            if target not in window:
                if truncate:
                    continue
                raise ParameterError(
                    f'Window J_{window_pad} is too small: slot {slots[k]} '
                    f'is sent to {target} by the term at {v}'
                )
            # (a u_v xi)_t = alpha^{-t}(a) xi_{t-v}
            out[window.index(target)] += a[sys.permutation(target)] * xi[k]
    return out.reshape(-1) if flat else out


def regular_matrix(sys: SampledSystem, op: BandOperator, K: int) -> sp.csr_matrix:
    """
    Sparse matrix of the operator compressed to the window `J_K`,
    assembled entry by entry
    """
    window = BoxWindow('J', K, sys.m)
    P = sys.size
    rows, cols, vals = [], [], []
    for v, a in op.terms.items():
        for t in window:
            s = sub(t, v)
            if s not in window:
                continue
            i, j = window.index(t), window.index(s)
            for x in range(P):
                # alpha^{-t}(a)(x) = a(alpha^t(x))
                value = a[sys.act(t, x)]
                if value != 0:
                    rows.append(i * P + x)
                    cols.append(j * P + x)
                    vals.append(value)
    n = len(window) * P
    return sp.coo_matrix(
        (np.asarray(vals, dtype=np.complex128), (rows, cols)), shape=(n, n)
    ).tocsr()


def dense_matrix(sys: SampledSystem, op: BandOperator, K: int) -> np.ndarray:
    """Dense version of `regular_matrix`"""
    return regular_matrix(sys, op, K).toarray()


def compress_dense(
    sys: SampledSystem, op: BandOperator, n: int, pad: int | None = None
) -> np.ndarray:
    """
    `Q x Q` computed from the dense regular matrix on a padded window,
    `Q` the projection onto the slots of `J_n`
    """
    K = max(n, pad or n + op.band_width)
    outer = BoxWindow('J', K, sys.m)
    P = sys.size
    slots = np.array([outer.index(w) for w in BoxWindow('J', n, sys.m)])
    index = (slots[:, None] * P + np.arange(P)[None, :]).reshape(-1)
    return dense_matrix(sys, op, K)[np.ix_(index, index)]


# ----------------------------------------------------------------------
# compressed operators
# ----------------------------------------------------------------------


Block = tuple[Vector, Vector]


@dataclass(eq=False)
class CompressedOperator:
    """
    Element of `M_K(C(sample))`, indexed by the window `J_n`.

    Attributes
    ----------
    n : int
        Window parameter (`K = |J_n|`)
    m : int
        Rank
    size : int
        Number of sample points (or of inner-algebra coordinates)
    blocks : dict[(w, w'), (size,) array]
        Nonzero blocks
    """

    n: int
    m: int
    size: int
    blocks: dict[Block, np.ndarray] = field(default_factory=dict)

    @property
    def window(self) -> BoxWindow:
        return BoxWindow('J', self.n, self.m)

    @classmethod
    def unit(
        cls, n: int, m: int, size: int, v: Vector, w: Vector, a=1.0
    ) -> "CompressedOperator":
        """The matrix unit `e_{v,w} (x) a`"""
        window = BoxWindow('J', n, m)
        v, w = as_vector(v, m), as_vector(w, m)
        if v not in window or w not in window:
            raise ParameterError(f'({v}, {w}) is outside J_{n}')
        a = np.broadcast_to(np.asarray(a, dtype=np.complex128), (size,)).copy()
        return cls(n, m, size, {(v, w): a})

    def _check(self, other: "CompressedOperator") -> None:
        if (other.n, other.m, other.size) != (self.n, self.m, self.size):
            raise ParameterError('Compressed operators have different shapes')

    def map_blocks(self, fn, size: int | None = None) -> "CompressedOperator":
        """Apply a function to every block"""
        return CompressedOperator(
            self.n, self.m, self.size if size is None else size,
            {k: fn(b) for k, b in self.blocks.items()},
        )

    def __add__(self, other: "CompressedOperator") -> "CompressedOperator":
        if not isinstance(other, CompressedOperator):
            return NotImplemented
        self._check(other)
        blocks = dict(self.blocks)
        for k, b in other.blocks.items():
            blocks[k] = blocks[k] + b if k in blocks else b
        return CompressedOperator(self.n, self.m, self.size, blocks)

    def __neg__(self) -> "CompressedOperator":
        return self.map_blocks(lambda b: -b)

    def __sub__(self, other: "CompressedOperator") -> "CompressedOperator":
        if not isinstance(other, CompressedOperator):
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar) -> "CompressedOperator":
        if not isinstance(scalar, Number):
            return NotImplemented
        return self.map_blocks(lambda b: complex(scalar) * b)

    __rmul__ = __mul__

    def __matmul__(self, other: "CompressedOperator") -> "CompressedOperator":
        if not isinstance(other, CompressedOperator):
            return NotImplemented
        self._check(other)
        rows: dict[Vector, list] = {}
        for (w1, w2), c in other.blocks.items():
            rows.setdefault(w1, []).append((w2, c))
        blocks: dict[Block, np.ndarray] = {}
        for (w0, w1), b in self.blocks.items():
            for w2, c in rows.get(w1, []):
                key = (w0, w2)
                blocks[key] = blocks[key] + b * c if key in blocks else b * c
        return CompressedOperator(self.n, self.m, self.size, blocks)

    def adjoint(self) -> "CompressedOperator":
        return CompressedOperator(self.n, self.m, self.size, {
            (w2, w1): np.conj(b) for (w1, w2), b in self.blocks.items()
        })

    def pointwise_matrices(self) -> np.ndarray:
        """(size, K, K) stack of the matrices at each point"""
        window = self.window
        out = np.zeros((self.size, len(window), len(window)), dtype=np.complex128)
        for (w1, w2), b in self.blocks.items():
            out[:, window.index(w1), window.index(w2)] += b
        return out

    def to_sparse(self) -> sp.csr_matrix:
        """Matrix on `l2(J_n) (x) l2(sample)`, slot-major"""
        window = self.window
        P = self.size
        rows, cols, vals = [], [], []
        for (w1, w2), b in self.blocks.items():
            i, j = window.index(w1), window.index(w2)
            rows.append(i * P + np.arange(P))
            cols.append(j * P + np.arange(P))
            vals.append(b)
        n = len(window) * P
        if not vals:
            return sp.csr_matrix((n, n), dtype=np.complex128)
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        ).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def as_linear_operator(self) -> LinearOperator:
        window = self.window
        K, P = len(window), self.size
        index = {w: i for i, w in enumerate(window)}
        entries = [
            (index[w1], index[w2], b) for (w1, w2), b in self.blocks.items()
        ]

        def matvec(x):
            x = np.reshape(x, (K, P))
            y = np.zeros((K, P), dtype=np.complex128)
            for i, j, b in entries:
                y[i] += b * x[j]
            return y.reshape(-1)

        def rmatvec(y):
            y = np.reshape(y, (K, P))
            x = np.zeros((K, P), dtype=np.complex128)
            for i, j, b in entries:
                x[j] += np.conj(b) * y[i]
            return x.reshape(-1)

        return LinearOperator(
            (K * P, K * P), matvec=matvec, rmatvec=rmatvec, dtype=np.complex128
        )

    def norm(self, method: str = 'auto', **kwargs) -> float:
        """
        Norm in `M_K(C(sample))`: the largest spectral norm of the
        pointwise matrices ('exact'), or a power iteration ('power')
        """
        if not self.blocks:
            return 0.0
        if method == 'auto':
            method = 'exact' if len(self.window) <= EXACT_NORM_SLOTS else 'power'
        if method == 'exact':
            mats = self.pointwise_matrices()
            return float(np.linalg.norm(mats, ord=2, axis=(1, 2)).max())
        if method == 'power':
            return float(operator_norm(
                self.as_linear_operator(), method='power', **kwargs
            ))
        raise ParameterError(f'Unknown norm method: {method!r}')

    def __repr__(self) -> str:
        return (
            f'CompressedOperator(n={self.n}, m={self.m}, '
            f'blocks={len(self.blocks)})'
        )


# ----------------------------------------------------------------------
# the maps Psi and mu
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiagonalWeight:
    """The diagonal tent weight `D_{w,w} = d_n^m(w)` on `J_n`"""

    n: int
    m: int

    def exact(self) -> dict[Vector, Fraction]:
        tent = TentProfile(self.n, self.m)
        return {w: tent(w) for w in BoxWindow('J', self.n, self.m)}

    def values(self) -> np.ndarray:
        return np.array([float(x) for x in self.exact().values()])

    def sqrt(self) -> dict[Vector, float]:
        return {w: float(np.sqrt(float(x))) for w, x in self.exact().items()}

    def matrix(self) -> np.ndarray:
        return np.diag(self.values())


def compress_psi(sys: SampledSystem, op: BandOperator, n: int) -> CompressedOperator:
    """
    Compression `Q x Q` to the window `J_n`

    Returns
    -------
    CompressedOperator
        Blocks `(w, w - v) -> alpha^{-w}(a_v)`
    """
    window = BoxWindow('J', n, sys.m)
    blocks: dict[Block, np.ndarray] = {}
    for v, a in op.terms.items():
        for w in window:
            s = sub(w, v)
            if s not in window:
                continue
            value = a[sys.permutation(w)]
            key = (w, s)
            blocks[key] = blocks[key] + value if key in blocks else value
    return CompressedOperator(n, sys.m, sys.size, blocks)


def scale_blocks(
    X: CompressedOperator, left: Mapping[Vector, float], right: Mapping[Vector, float]
) -> CompressedOperator:
    """`diag(left) X diag(right)`"""
    return CompressedOperator(X.n, X.m, X.size, {
        (w1, w2): left[w1] * b * right[w2] for (w1, w2), b in X.blocks.items()
    })


def mu(sys: SampledSystem, op: BandOperator, n: int) -> CompressedOperator:
    """`sqrt(D) Psi(x) sqrt(D)`"""
    root = DiagonalWeight(n, sys.m).sqrt()
    return scale_blocks(compress_psi(sys, op, n), root, root)


@dataclass
class CommutatorEstimate:
    """
    Norm of `[sqrt(D), Psi(a u_v)]` with its bounds

    Attributes
    ----------
    estimate : float
        Measured norm
    bound : float
        `max_w |sqrt(d(w)) - sqrt(d(w-v))| * sup|a|`
    tent_bound : float
        `max_w |d(w) - d(w-v)| * sup|a|`
    """

    estimate: float
    bound: float
    tent_bound: float

    @property
    def ok(self) -> bool:
        return self.estimate <= self.bound + 1e-12

    def to_json(self) -> dict:
        return {
            'estimate': self.estimate,
            'bound': self.bound,
            'tent_bound': self.tent_bound,
            'ok': self.ok,
        }


def sqrt_tent_gap(n: int, m: int, v: Vector) -> tuple[float, Fraction]:
    """
    `max |sqrt(d(w)) - sqrt(d(w-v))|` and `max |d(w) - d(w-v)|` over
    `w` in `J_n` with `w - v` in `J_n`
    """
    weights = DiagonalWeight(n, m).exact()
    root_gap, gap = 0.0, Fraction(0)
    for w, dw in weights.items():
        s = sub(w, v)
        if s not in weights:
            continue
        ds = weights[s]
        gap = max(gap, abs(dw - ds))
        root_gap = max(root_gap, abs(np.sqrt(float(dw)) - np.sqrt(float(ds))))
    return float(root_gap), gap


def commutator_sqrtD(
    sys: SampledSystem, a, v, n: int, method: str = 'auto'
) -> CommutatorEstimate:
    """
    Measure `||[sqrt(D), Psi(a u_v)]||` and compare it with the
    square-root tent gap

    Parameters
    ----------
    sys : SampledSystem
        System
    a : (P,) array
        Coefficient function
    v : vector
        Group element
    n : int
        Window parameter

    Returns
    -------
    CommutatorEstimate
    """
    v = as_vector(v, sys.m)
    a = _coef(sys, a)
    root = DiagonalWeight(n, sys.m).sqrt()
    X = compress_psi(sys, BandOperator.single(sys, a, v), n)
    one = {w: 1.0 for w in root}
    commutator = scale_blocks(X, root, one) - scale_blocks(X, one, root)
    root_gap, gap = sqrt_tent_gap(n, sys.m, v)
    sup = float(np.abs(a).max())
    return CommutatorEstimate(
        commutator.norm(method), root_gap * sup, float(gap) * sup
    )

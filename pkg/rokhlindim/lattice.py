"""
Exact combinatorics of the lattice Z^m.

Two families of boxes are used everywhere:

* `B_n = {0, ..., n-1}^m` indexes tower levels;
* `J_n = {-n+1, ..., n}^m` is the symmetric window of the crossed-product
  model.

Tent weights `d_n^m` on `J_n` are exact rationals. Together with the
half-period shifts `s_a` they form an exact partition of unity:
`sum_a d_n^m(s_a(v)) = 1` for every `v` in `J_n`.
All enumerations are lexicographic.
"""
import itertools
from dataclasses import dataclass
from fractions import Fraction
from logging import getLogger
from typing import Iterable, Iterator, Literal, Sequence

from rokhlindim.errors import ParameterError

lg = getLogger(__name__)

__all__ = [
    'Vector',
    'BoxKind',
    'BoxWindow',
    'TentProfile',
    'CoveringTranslates',
    'as_vector',
    'zero',
    'add',
    'sub',
    'neg',
    'norm_inf',
    'enum_box',
    'tent',
    'tent_m',
    'shift_s',
    'partition_weights',
    'cover_translates',
    'separation_vectors',
    'difference_box',
    'index_shift',
    'index_unshift',
    'mod_box',
    'covering_centers',
    'tent_lipschitz_defect',
    'translates_union',
]

Vector = tuple[int, ...]
BoxKind = Literal['B', 'J']
VectorLike = int | Sequence[int]


# ----------------------------------------------------------------------
# vectors
# ----------------------------------------------------------------------


def as_vector(v: VectorLike, m: int | None = None) -> Vector:
    """
    Convert an integer or a sequence of integers to a lattice vector

    Parameters
    ----------
    v : int | sequence[int]
        Coordinates. A bare integer is a rank-one vector.
    m : int, optional
        Expected rank.

    Returns
    -------
    v : tuple[int]
    """
    if isinstance(v, int):
        v = (v,)
    v = tuple(int(x) for x in v)
    if not v:
        raise ParameterError('Lattice vectors must have rank >= 1')
    if m is not None and len(v) != m:
        raise ParameterError(f'Expected a vector of rank {m}, got {v}')
    return v


def zero(m: int) -> Vector:
    return (0,) * m


def add(v: Vector, w: Vector) -> Vector:
    return tuple(a + b for a, b in zip(v, w))


def sub(v: Vector, w: Vector) -> Vector:
    return tuple(a - b for a, b in zip(v, w))


def neg(v: Vector) -> Vector:
    return tuple(-a for a in v)


def norm_inf(v: Vector) -> int:
    return max((abs(a) for a in v), default=0)


def _check_params(n: int, m: int) -> None:
    if n < 1:
        raise ParameterError(f'Box side must be >= 1, got n={n}')
    if m < 1:
        raise ParameterError(f'Rank must be >= 1, got m={m}')


# ----------------------------------------------------------------------
# boxes
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class BoxWindow:
    """
    A box of the lattice.

    * kind `'B'`: `{0, ..., n-1}^m`, `n^m` vectors
    * kind `'J'`: `{-n+1, ..., n}^m`, `(2n)^m` vectors
    """

    kind: BoxKind
    n: int
    m: int

    def __post_init__(self):
        if self.kind not in ('B', 'J'):
            raise ParameterError(f'Unknown box kind: {self.kind!r}')
        _check_params(self.n, self.m)

    @property
    def lower(self) -> int:
        return 0 if self.kind == 'B' else 1 - self.n

    @property
    def side(self) -> int:
        return self.n if self.kind == 'B' else 2 * self.n

    def __len__(self) -> int:
        return self.side ** self.m

    def __iter__(self) -> Iterator[Vector]:
        axis = range(self.lower, self.lower + self.side)
        return itertools.product(axis, repeat=self.m)

    def __contains__(self, v: Vector) -> bool:
        if len(v) != self.m:
            return False
        return all(self.lower <= x < self.lower + self.side for x in v)

    def index(self, v: Vector) -> int:
        """Position of `v` in the lexicographic enumeration"""
        if v not in self:
            raise ParameterError(f'{v} is not in {self.kind}_{self.n}^{self.m}')
        index = 0
        for x in v:
            index = index * self.side + (x - self.lower)
        return index


def enum_box(kind: BoxKind, n: int, m: int) -> list[Vector]:
    """
    Enumerate `B_n^m` or `J_n^m` in lexicographic order

    Parameters
    ----------
    kind : {'B', 'J'}
        Box family
    n : int
        Side parameter
    m : int
        Rank

    Returns
    -------
    vectors : list[tuple[int]]
    """
    return list(BoxWindow(kind, n, m))


def difference_box(n: int, m: int) -> list[Vector]:
    """`B_n - B_n = {-(n-1), ..., n-1}^m`, lexicographic"""
    _check_params(n, m)
    return list(itertools.product(range(1 - n, n), repeat=m))


def index_shift(v: Vector, n: int) -> Vector:
    """Move an index of `B_{2n}` into `J_n` (translation by `-n+1`)"""
    return tuple(x - n + 1 for x in v)


def index_unshift(w: Vector, n: int) -> Vector:
    """Inverse of `index_shift`: move an index of `J_n` into `B_{2n}`"""
    return tuple(x + n - 1 for x in w)


def mod_box(v: Vector, n: int) -> Vector:
    """Reduce a vector coordinatewise into `B_n`"""
    return tuple(x % n for x in v)


# ----------------------------------------------------------------------
# tents
# ----------------------------------------------------------------------


def _check_window(n: int, j: int) -> None:
    if not (-n + 1 <= j <= n):
        raise ParameterError(f'{j} is outside the window J_{n}')


def tent(n: int, j: int) -> Fraction:
    """
    Tent weight `d_n(j) = 1 - |j|/n` on `{-n+1, ..., n}`

    Returns
    -------
    value : Fraction
        Exact value in [0, 1]
    """
    _check_params(n, 1)
    _check_window(n, j)
    return 1 - Fraction(abs(j), n)


def tent_m(n: int, v: VectorLike) -> Fraction:
    """Product tent `d_n^m(v) = prod_i d_n(v_i)`"""
    v = as_vector(v)
    value = Fraction(1)
    for j in v:
        value *= tent(n, j)
    return value


@dataclass(frozen=True)
class TentProfile:
    """The product tent `d_n^m` seen as a function on `J_n`"""

    n: int
    m: int

    def __post_init__(self):
        _check_params(self.n, self.m)

    def __call__(self, v: VectorLike) -> Fraction:
        return tent_m(self.n, as_vector(v, self.m))

    def values(self) -> list[Fraction]:
        """Values over `J_n`, in lexicographic order"""
        return [self(v) for v in BoxWindow('J', self.n, self.m)]


def shift_s(a: VectorLike, n: int, v: VectorLike) -> Vector:
    """
    Half-period shift `s_a(v)_i = v_i + a_i n mod 2n`, represented in `J_n`

    Parameters
    ----------
    a : sequence[int]
        Element of `{0, 1}^m`
    n : int
        Window parameter
    v : sequence[int]
        Element of `J_n`

    Returns
    -------
    w : tuple[int]
        Element of `J_n`
    """
    v = as_vector(v)
    a = as_vector(a, len(v))
    if any(x not in (0, 1) for x in a):
        raise ParameterError(f'Shift selector must be in {{0,1}}^m, got {a}')
    for j in v:
        _check_window(n, j)
    out = []
    for j, ai in zip(v, a):
        r = (j + ai * n) % (2 * n)
        if r > n:
            r -= 2 * n
        out.append(r)
    return tuple(out)


def partition_weights(n: int, v: VectorLike) -> dict[Vector, Fraction]:
    """
    Weights `d_n^m(s_a(v))` for every `a` in `{0,1}^m`

    The weights sum to one exactly.
    """
    v = as_vector(v)
    return {
        a: tent_m(n, shift_s(a, n, v))
        for a in itertools.product((0, 1), repeat=len(v))
    }


def tent_lipschitz_defect(n: int, m: int) -> Fraction:
    """
    Largest value of `|d(v) - d(w)| - m |v - w|_inf / n` over `J_n x J_n`.

    Nonpositive whenever the tent is `m/n`-Lipschitz.
    """
    window = enum_box('J', n, m)
    values = {v: tent_m(n, v) for v in window}
    worst = None
    for v in window:
        for w in window:
            gap = (
                abs(values[v] - values[w])
                - Fraction(m * norm_inf(sub(v, w)), n)
            )
            if worst is None or gap > worst:
                worst = gap
    return worst


# ----------------------------------------------------------------------
# translates
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CoveringTranslates:
    """
    Translates `w_a` whose `B_n` boxes are meant to tile `B_{2n}`
    """

    vectors: tuple[Vector, ...]
    base_n: int

    @property
    def m(self) -> int:
        return len(self.vectors[0])

    def boxes(self) -> Iterator[set[Vector]]:
        base = enum_box('B', self.base_n, self.m)
        for w in self.vectors:
            yield {add(w, v) for v in base}

    def check_tiling(self) -> bool:
        """Translated boxes are pairwise disjoint and exhaust `B_{2n}`"""
        seen: set[Vector] = set()
        total = 0
        for box in self.boxes():
            total += len(box)
            seen |= box
        target = set(enum_box('B', 2 * self.base_n, self.m))
        return total == len(seen) and seen == target


def cover_translates(n: int, m: int) -> CoveringTranslates:
    """
    Translates `w_a = (a_j n)_j`, `a` in `{0,1}^m`, tiling `B_{2n}`
    """
    _check_params(n, m)
    vectors = tuple(
        tuple(aj * n for aj in a)
        for a in itertools.product((0, 1), repeat=m)
    )
    return CoveringTranslates(vectors, n)


def separation_vectors(n: int, d: int, m: int) -> list[Vector]:
    """
    Vectors `v_1, ..., v_d` with `v_l = (2ln, 0, ..., 0)`.

    With `v_0 = 0`, the boxes `v_l + (B_n - B_n)` are pairwise disjoint.
    """
    _check_params(n, m)
    if d < 0:
        raise ParameterError(f'Dimension parameter must be >= 0, got d={d}')
    return [(2 * l * n,) + (0,) * (m - 1) for l in range(1, d + 1)]


def covering_centers(k: int, m: int) -> list[Vector]:
    """
    Centers `a_j` in `{-k, k}^m` with `J_{2k} = U_j (a_j + J_k)`
    """
    _check_params(k, m)
    return [
        tuple((2 * p - 1) * k for p in bits)
        for bits in itertools.product((0, 1), repeat=m)
    ]


def translates_union(vectors: Iterable[Vector], box: Iterable[Vector]) -> set:
    """Union of `w + box` over the given translates"""
    box = list(box)
    return {add(w, v) for w in vectors for v in box}

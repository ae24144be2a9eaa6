"""
Point-set operations on sampled systems.

`PointSet` is an immutable bitset over the points of a `SampledSystem`.
This module provides its translates under the action, metric fattening
(closed balls), the `(M, k)`-disjointness audit, and the largest
fattening that keeps a set disjoint.

Closures are modeled by fattening with the system's `closure_eps`
(0 by default: finite samples are discrete).
"""
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from logging import getLogger
from typing import TYPE_CHECKING, Iterable, Iterator, Sequence

import numpy as np

from rokhlindim.errors import (
    EnumerationBudgetError,
    ParameterError,
    PreconditionError,
)
from rokhlindim.lattice import Vector, as_vector
from rokhlindim.utils.ui import RationalLike, as_fraction, fraction_str

if TYPE_CHECKING:
    from rokhlindim.dynsys import SampledSystem

lg = getLogger(__name__)

__all__ = [
    'PointSet',
    'DisjointnessReport',
    'FatteningMargin',
    'translate_set',
    'fatten',
    'closure',
    'distance_grid',
    'translate_stack',
    'is_disjoint',
    'disjointness_order',
    'fattening_margin',
]


class PointSet:
    """
    A subset of the points of a sampled system.

    Stored as a read-only boolean mask. Set operators (`|`, `&`, `-`,
    `<=`) and `len`, `in`, iteration over point indices are supported.
    """

    __slots__ = ('mask',)

    def __init__(self, mask: np.ndarray) -> None:
        mask = np.array(mask, dtype=bool, copy=True).reshape(-1)
        mask.flags.writeable = False
        self.mask = mask

    @classmethod
    def from_indices(cls, indices: Iterable[int], size: int) -> "PointSet":
        mask = np.zeros(size, dtype=bool)
        indices = np.asarray(list(indices), dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= size):
            raise ParameterError(
                f'Point indices out of range for a sample of size {size}'
            )
        mask[indices] = True
        return cls(mask)

    @classmethod
    def empty(cls, size: int) -> "PointSet":
        return cls(np.zeros(size, dtype=bool))

    @classmethod
    def full(cls, size: int) -> "PointSet":
        return cls(np.ones(size, dtype=bool))

    @property
    def size(self) -> int:
        """Size of the ambient sample"""
        return len(self.mask)

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __iter__(self) -> Iterator[int]:
        return iter(int(i) for i in self.indices())

    def __contains__(self, point: int) -> bool:
        return 0 <= point < self.size and bool(self.mask[point])

    def _other(self, other: "PointSet") -> np.ndarray:
        if not isinstance(other, PointSet):
            return NotImplemented
        if other.size != self.size:
            raise ParameterError(
                f'Point sets live on different samples '
                f'({self.size} vs {other.size})'
            )
        return other.mask

    def __or__(self, other: "PointSet") -> "PointSet":
        return PointSet(self.mask | self._other(other))

    def __and__(self, other: "PointSet") -> "PointSet":
        return PointSet(self.mask & self._other(other))

    def __sub__(self, other: "PointSet") -> "PointSet":
        return PointSet(self.mask & ~self._other(other))

    def __le__(self, other: "PointSet") -> bool:
        return not bool((self.mask & ~self._other(other)).any())

    def __ge__(self, other: "PointSet") -> bool:
        return other <= self

    def isdisjoint(self, other: "PointSet") -> bool:
        return not bool((self.mask & self._other(other)).any())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return self.size == other.size and bool(
            np.array_equal(self.mask, other.mask)
        )

    def __hash__(self) -> int:
        return hash((self.size, self.mask.tobytes()))

    def __repr__(self) -> str:
        return f'PointSet({self.to_json()}, size={self.size})'

    def to_json(self) -> list[int]:
        return [int(i) for i in self.indices()]

    @classmethod
    def from_json(cls, obj: Sequence[int], size: int) -> "PointSet":
        return cls.from_indices(obj, size)


# ----------------------------------------------------------------------
# basic operations
# ----------------------------------------------------------------------


def translate_set(
    sys: "SampledSystem", E: PointSet, g: Vector | int
) -> PointSet:
    """
    Image `alpha^g(E)` of a point set

    Parameters
    ----------
    sys : SampledSystem
        Ambient system
    E : PointSet
        Set to translate
    g : vector
        Group element

    Returns
    -------
    PointSet
    """
    perm = sys.permutation(as_vector(g, sys.m))
    mask = np.zeros(sys.size, dtype=bool)
    mask[perm[E.mask]] = True
    return PointSet(mask)


def translate_stack(
    sys: "SampledSystem", E: PointSet, window: Sequence[Vector]
) -> np.ndarray:
    """Boolean matrix whose rows are the masks of `alpha^g(E)`, g in window"""
    stack = np.zeros((len(window), sys.size), dtype=bool)
    for i, g in enumerate(window):
        stack[i, sys.permutation(g)[E.mask]] = True
    return stack


def _ball_mask(
    sys: "SampledSystem", indices: np.ndarray, delta: Fraction
) -> np.ndarray:
    # rows: centers, cols: points; closed balls, exact comparison
    rows = sys.dist_num[indices]
    return rows * delta.denominator <= delta.numerator * sys.dist_den


def fatten(
    sys: "SampledSystem", E: PointSet, delta: RationalLike
) -> PointSet:
    """
    Closed metric neighbourhood `{x : dist(x, E) <= delta}`

    Parameters
    ----------
    sys : SampledSystem
        Ambient system
    E : PointSet
        Set to fatten
    delta : rational
        Radius (>= 0)

    Returns
    -------
    PointSet
    """
    delta = as_fraction(delta)
    if delta < 0:
        raise ParameterError(f'Fattening radius must be >= 0, got {delta}')
    if not len(E):
        return PointSet.empty(sys.size)
    return PointSet(_ball_mask(sys, E.indices(), delta).any(axis=0) | E.mask)


def closure(sys: "SampledSystem", E: PointSet) -> PointSet:
    """Closure model of a set: fattening by `sys.closure_eps`"""
    if sys.closure_eps == 0:
        return E
    return fatten(sys, E, sys.closure_eps)


def distance_grid(sys: "SampledSystem") -> list[Fraction]:
    """Sorted distinct pairwise distances (the radii at which balls change)"""
    values = np.unique(sys.dist_num)
    return [Fraction(int(k), sys.dist_den) for k in values]


# ----------------------------------------------------------------------
# disjointness
# ----------------------------------------------------------------------


def _unique_window(M: Iterable, m: int) -> list[Vector]:
    window = []
    seen = set()
    for g in M:
        g = as_vector(g, m)
        if g not in seen:
            seen.add(g)
            window.append(g)
    return window


def is_disjoint(
    sys: "SampledSystem", E: PointSet, M: Iterable, k: int = 1
) -> bool:
    """
    Whether `E` is `(M, k)`-disjoint.

    Every `k+1` distinct `M`-translates have empty intersection, i.e.,
    no point lies in more than `k` translates.
    """
    window = _unique_window(M, sys.m)
    if not window or not len(E):
        return True
    counts = translate_stack(sys, E, window).sum(axis=0)
    return int(counts.max()) <= k


def overlap_witness(
    sys: "SampledSystem", E: PointSet, M: Iterable, k: int = 1
) -> dict | None:
    """A point lying in more than `k` translates, with those translates"""
    window = _unique_window(M, sys.m)
    if not window or not len(E):
        return None
    stack = translate_stack(sys, E, window)
    counts = stack.sum(axis=0)
    bad = np.flatnonzero(counts > k)
    if not bad.size:
        return None
    point = int(bad[0])
    return {
        'point': point,
        'translates': [list(window[i]) for i in np.flatnonzero(stack[:, point])],
    }


@dataclass
class DisjointnessReport:
    """
    Outcome of `disjointness_order`.

    Attributes
    ----------
    window : list[tuple[int]]
        The (deduplicated) window `M`
    order : int | None
        Smallest `k <= k_max` such that the set is `(M, k)`-disjoint,
        or None if it exceeds `k_max`
    vacuous : bool
        The order was reached only because `k+1 > |M|`
    witness : tuple[tuple[int]] | None
        Translates with nonempty common intersection at the level just
        below the order (or at `k_max` when exceeded)
    witness_points : list[int]
        Points of that intersection
    """

    window: list[Vector]
    k_max: int
    order: int | None = None
    vacuous: bool = False
    witness: tuple[Vector, ...] | None = None
    witness_points: list[int] = field(default_factory=list)

    @property
    def exceeds(self) -> bool:
        return self.order is None

    def to_json(self) -> dict:
        return {
            'window': [list(g) for g in self.window],
            'k_max': self.k_max,
            'order': self.order,
            'exceeds': self.exceeds,
            'vacuous': self.vacuous,
            'witness': (
                None if self.witness is None
                else [list(g) for g in self.witness]
            ),
            'witness_points': list(self.witness_points),
        }


def disjointness_order(
    sys: "SampledSystem",
    E: PointSet,
    M: Iterable,
    k_max: int,
    *,
    budget: int = 1_000_000,
) -> DisjointnessReport:
    """
    Smallest `k` such that `E` is `(M, k)`-disjoint.

    Subsets of `M` are enumerated lexicographically by increasing size,
    with early exit on the first nonempty intersection at each size.

    Parameters
    ----------
    sys : SampledSystem
        Ambient system
    E : PointSet
        Audited set
    M : sequence of vectors
        Finite window of group elements
    k_max : int
        Largest order tested

    Other Parameters
    ----------------
    budget : int
        Largest number of subsets that may be enumerated

    Returns
    -------
    DisjointnessReport
    """
    if k_max < 1:
        raise ParameterError(f'k_max must be >= 1, got {k_max}')
    window = _unique_window(M, sys.m)
    top = min(k_max + 1, len(window))
    nb_subsets = sum(math.comb(len(window), j) for j in range(1, top + 1))
    if nb_subsets > budget:
        raise EnumerationBudgetError(
            f'Exhaustive audit needs {nb_subsets} subsets of a window of '
            f'size {len(window)} (budget {budget})',
            witness={'window_size': len(window), 'subsets': nb_subsets},
        )
    stack = translate_stack(sys, E, window)
    report = DisjointnessReport(window, k_max)

    for k in range(0, k_max + 1):
        if k + 1 > len(window):
            report.order = k
            report.vacuous = True
            return report
        found = None
        for subset in itertools.combinations(range(len(window)), k + 1):
            common = np.logical_and.reduce(stack[list(subset)], axis=0)
            if common.any():
                found = subset, common
                break
        if found is None:
            report.order = k
            return report
        subset, common = found
        report.witness = tuple(window[i] for i in subset)
        report.witness_points = [int(i) for i in np.flatnonzero(common)]

    lg.debug(f'disjointness order exceeds k_max={k_max}')
    return report


@dataclass
class FatteningMargin:
    """Largest grid radius keeping a fattening `(F, k)`-disjoint"""

    delta: Fraction
    fattened: PointSet
    report: DisjointnessReport

    def to_json(self) -> dict:
        return {
            'delta': fraction_str(self.delta),
            'fattened': self.fattened.to_json(),
            'report': self.report.to_json(),
        }


def fattening_margin(
    sys: "SampledSystem",
    E: PointSet,
    F: Iterable,
    k: int,
    delta_grid: Sequence[RationalLike] | None = None,
) -> FatteningMargin:
    """
    Largest `delta` on a grid such that `fatten(E, delta)` is still
    `(F, k)`-disjoint.

    Parameters
    ----------
    sys : SampledSystem
        Ambient system
    E : PointSet
        A `(F, k)`-disjoint set
    F : sequence of vectors
        Window
    k : int
        Disjointness order
    delta_grid : sequence of rationals, optional
        Candidate radii. Default: all pairwise distances.

    Returns
    -------
    FatteningMargin
    """
    F = _unique_window(F, sys.m)
    if not is_disjoint(sys, E, F, k):
        raise PreconditionError(
            f'Set is not ({len(F)} translates, {k})-disjoint',
            witness=overlap_witness(sys, E, F, k),
        )
    if delta_grid is None:
        delta_grid = distance_grid(sys)
    delta_grid = sorted(set(map(as_fraction, delta_grid)))
    if not delta_grid:
        raise ParameterError('Empty fattening grid')

    best = None
    fattened = E
    for delta in delta_grid:
        candidate = fatten(sys, E, delta)
        if not is_disjoint(sys, candidate, F, k):
            break
        best, fattened = delta, candidate
    if best is None:
        # every grid value already breaks disjointness (grid without 0)
        best, fattened = Fraction(0), E
    report = disjointness_order(sys, fattened, F, max(k, 1))
    return FatteningMargin(best, fattened, report)

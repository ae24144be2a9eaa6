"""
Rokhlin covers and Rokhlin tower functions.

* `cover_from_marker` turns a controlled marker into a tower cover
  `U_v^(l) = alpha^(v_l + v)(Z)`.
* `towers_from_cover` synthesises tapered tower functions of side
  `L` from a cover of side `8 L n`.
* `normalize_towers` divides a family by its pointwise sum.
* `verify_tower_relations` measures the defects of the Rokhlin relations
  (unit, orthogonality, equivariance) as sup-norms over the sample.

Tower values are exact `Fraction` arrays (dtype object) except for
square-root families, which are float.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from logging import getLogger
from typing import Iterable, Literal, Sequence

import numpy as np

from rokhlindim.dynsys import SampledSystem
from rokhlindim.errors import ParameterError, PreconditionError, VerificationError
from rokhlindim.lattice import (
    BoxWindow,
    Vector,
    add,
    as_vector,
    covering_centers,
    mod_box,
    neg,
    norm_inf,
)
from rokhlindim.markers import ControlledMarkerWitness, verify_controlled_marker
from rokhlindim.topo import (
    PointSet,
    closure,
    is_disjoint,
    overlap_witness,
    translate_set,
)
from rokhlindim.utils.ui import RationalLike, as_fraction, fraction_str

lg = getLogger(__name__)

__all__ = [
    'RokhlinCover',
    'CoverReport',
    'TowerFamily',
    'ToleranceReport',
    'BoundTable',
    'cover_from_marker',
    'cover_from_marker_m1',
    'verify_cover',
    'taper_weight',
    'towers_from_cover',
    'indicator_towers',
    'normalize_towers',
    'sqrt_family',
    'verify_tower_relations',
    'report_bounds',
    'crossed_product_bound',
]

Provenance = Literal['raw', 'normalized', 'sqrt']


# ----------------------------------------------------------------------
# covers
# ----------------------------------------------------------------------


@dataclass
class RokhlinCover:
    """
    Towers `U_v^(l)`, `l < L`, `v` in `B_n` (lexicographic order).
    """

    n: int
    m: int
    towers: list[list[PointSet]]

    @property
    def L(self) -> int:
        return len(self.towers)

    @property
    def window(self) -> BoxWindow:
        return BoxWindow('B', self.n, self.m)

    def level(self, l: int, v: Vector) -> PointSet:
        return self.towers[l][self.window.index(as_vector(v, self.m))]

    def to_json(self) -> dict:
        return {
            'n': self.n,
            'm': self.m,
            'L': self.L,
            'towers': [[U.to_json() for U in tower] for tower in self.towers],
        }

    @classmethod
    def from_json(cls, obj: dict, sys: SampledSystem) -> "RokhlinCover":
        return cls(
            int(obj['n']),
            int(obj['m']),
            [
                [PointSet.from_json(U, sys.size) for U in tower]
                for tower in obj['towers']
            ],
        )


@dataclass
class CoverReport:
    """Outcome of `verify_cover`"""

    equivariant: bool = True
    disjoint: bool = True
    covers: bool = True
    equivariance_witness: dict | None = None
    disjointness_witness: dict | None = None
    uncovered: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.equivariant and self.disjoint and self.covers

    def to_json(self) -> dict:
        return {
            'ok': self.ok,
            'equivariant': self.equivariant,
            'equivariance_witness': self.equivariance_witness,
            'disjoint': self.disjoint,
            'disjointness_witness': self.disjointness_witness,
            'covers': self.covers,
            'uncovered': list(self.uncovered),
        }


def verify_cover(sys: SampledSystem, cover: RokhlinCover) -> CoverReport:
    """
    Check equivariance, per-level disjointness of closures and covering

    Returns
    -------
    CoverReport
    """
    report = CoverReport()
    covered: set[int] = set()
    window = list(cover.window)
    for l, tower in enumerate(cover.towers):
        base = set(tower[0])
        owner: dict[int, Vector] = {}
        for v, U in zip(window, tower):
            points = set(U)
            covered |= points
            image = {sys.act(v, x) for x in base}
            if report.equivariant and image != points:
                report.equivariant = False
                point = min(image ^ points)
                report.equivariance_witness = {
                    'level': l, 'v': list(v), 'point': point,
                }
            if not report.disjoint:
                continue
            for x in closure(sys, U):
                if x in owner:
                    report.disjoint = False
                    report.disjointness_witness = {
                        'level': l,
                        'v': [list(owner[x]), list(v)],
                        'point': x,
                    }
                    break
                owner[x] = v
    report.uncovered = [x for x in range(sys.size) if x not in covered]
    report.covers = not report.uncovered
    return report


def cover_from_marker(
    sys: SampledSystem, Z: PointSet, n: int, translates: Sequence
) -> RokhlinCover:
    """
    Tower cover `U_v^(l) = alpha^(v_l + v)(Z)` of a controlled marker

    Parameters
    ----------
    sys : SampledSystem
        System
    Z : PointSet
        Controlled `B_n`-marker
    n : int
        Tower side
    translates : sequence of vectors
        Controlling translates `v_l`

    Returns
    -------
    RokhlinCover
    """
    translates = [as_vector(t, sys.m) for t in translates]
    witness = ControlledMarkerWitness(Z, n, translates)
    report = verify_controlled_marker(sys, witness)
    if not report.ok:
        raise VerificationError(
            'Marker is not a controlled marker', witness=report.to_json()
        )
    window = list(BoxWindow('B', n, sys.m))
    towers = [
        [translate_set(sys, Z, add(t, v)) for v in window]
        for t in translates
    ]
    cover = RokhlinCover(n, sys.m, towers)
    check = verify_cover(sys, cover)
    if not check.ok:
        raise VerificationError(
            'Constructed cover fails verification', witness=check.to_json()
        )
    lg.info(f'cover: n={n}, L={cover.L}')
    return cover


def cover_from_marker_m1(
    sys: SampledSystem, Z: PointSet, n: int, d: int
) -> RokhlinCover:
    """
    Rank-one cover with `2(d+1)` towers `U_j^(l) = phi^(ln + j)(Z')`,
    `Z' = phi^-(n-1)(Z)`, from a `B_n`-marker `Z` whose translates over
    `(B_n - B_n) + {2ln}` cover the sample.
    """
    if sys.m != 1:
        raise ParameterError('Rank-one covers need m = 1')
    if d < 0:
        raise ParameterError(f'd must be >= 0, got {d}')
    Zp = translate_set(sys, Z, (1 - n,))
    translates = [(l * n,) for l in range(2 * (d + 1))]
    return cover_from_marker(sys, Zp, n, translates)


# ----------------------------------------------------------------------
# tower functions
# ----------------------------------------------------------------------


@dataclass
class TowerFamily:
    """
    Tower functions `f_v^(l)` for `l < L`, `v` in `B_n`.

    Attributes
    ----------
    n : int
        Tower side
    m : int
        Rank
    values : (L, n**m, P) array
        `values[l, k, x] = f_{v_k}^(l)(x)`, with `v_k` the `k`-th element
        of `B_n`. Object dtype (Fractions) for exact families.
    provenance : {'raw', 'normalized', 'sqrt'}
    """

    n: int
    m: int
    values: np.ndarray
    provenance: Provenance = 'raw'

    @property
    def L(self) -> int:
        return self.values.shape[0]

    @property
    def window(self) -> BoxWindow:
        return BoxWindow('B', self.n, self.m)

    @property
    def exact(self) -> bool:
        return self.values.dtype == object

    def function(self, l: int, v: Vector) -> np.ndarray:
        """Values of `f_v^(l)` (v reduced mod n)"""
        v = mod_box(as_vector(v, self.m), self.n)
        return self.values[l, self.window.index(v)]

    def total(self) -> np.ndarray:
        """Pointwise sum over every level and index"""
        return self.values.sum(axis=(0, 1))

    def as_float(self) -> np.ndarray:
        return self.values.astype(np.float64)

    def to_json(self) -> dict:
        if self.exact:
            encode = fraction_str
        else:
            encode = float
        return {
            'n': self.n,
            'm': self.m,
            'L': self.L,
            'provenance': self.provenance,
            'values': [
                [[encode(x) for x in f] for f in tower]
                for tower in self.values
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TowerFamily":
        raw = obj['values']
        if obj.get('provenance') == 'sqrt':
            values = np.asarray(raw, dtype=np.float64)
        else:
            values = np.array(
                [[[as_fraction(x) for x in f] for f in tower] for tower in raw],
                dtype=object,
            )
        return cls(int(obj['n']), int(obj['m']), values, obj.get('provenance', 'raw'))


def _zeros(shape: tuple) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(Fraction(0))
    return out


def taper_weight(w: Vector, L: int, n: int) -> Fraction:
    """
    Weight of tower position `w`: 1 up to `2Ln`, linear down to 0 at
    `3Ln`, 0 beyond
    """
    r = norm_inf(w)
    if r <= 2 * L * n:
        return Fraction(1)
    if r <= 3 * L * n:
        return Fraction(3 * L * n - r, L * n)
    return Fraction(0)


def _bump(
    sys: SampledSystem, base: PointSet, delta: Fraction
) -> tuple[np.ndarray, PointSet]:
    if delta == 0:
        h = _zeros((sys.size,))
        h[base.mask] = Fraction(1)
        return h, base
    dmin = sys.dist_num[base.indices()].min(axis=0)
    scale = delta.numerator * sys.dist_den
    h = np.array(
        [Fraction(max(0, scale - int(k) * delta.denominator), scale) for k in dmin],
        dtype=object,
    )
    support = PointSet(dmin * delta.denominator < scale)
    return h, support


def towers_from_cover(
    sys: SampledSystem,
    cover_big: RokhlinCover,
    L_small: int,
    n_param: int,
    delta_bump: RationalLike = 0,
) -> TowerFamily:
    """
    Synthesise tapered tower functions of side `L_small`

    Parameters
    ----------
    sys : SampledSystem
        System
    cover_big : RokhlinCover
        Verified cover of side `8 * L_small * n_param`; seen as indexed
        by `J_N`, `N = 4 * L_small * n_param`
    L_small : int
        Side of the synthesised towers
    n_param : int
        Taper length parameter (equivariance defect about `2/n_param`)
    delta_bump : rational
        Radius of the bump functions (0: indicators)

    Returns
    -------
    TowerFamily
        `2^m * cover_big.L` levels, raw provenance
    """
    L, n, m = L_small, n_param, sys.m
    if L < 1 or n < 1:
        raise ParameterError(f'L_small and n_param must be >= 1, got {L}, {n}')
    N = 4 * L * n
    if cover_big.n != 2 * N or cover_big.m != m:
        raise ParameterError(
            f'Cover side {cover_big.n} does not match 8*L*n = {2 * N}'
        )
    delta_bump = as_fraction(delta_bump)
    if delta_bump < 0:
        raise ParameterError('delta_bump must be >= 0')

    small = BoxWindow('B', L, m)
    big = BoxWindow('B', 2 * N, m)
    window = list(BoxWindow('J', N, m))
    centers = covering_centers(2 * L * n, m)
    values = _zeros((cover_big.L * len(centers), len(small), sys.size))

    for l, tower in enumerate(cover_big.towers):
        base = tower[big.index((N - 1,) * m)]
        h, support = _bump(sys, base, delta_bump)
        if not is_disjoint(sys, support, window, 1):
            raise PreconditionError(
                f'Bump supports of level {l} overlap at radius {delta_bump}',
                witness=overlap_witness(sys, support, window, 1),
            )
        f = _zeros((len(small), sys.size))
        for w in window:
            c = taper_weight(w, L, n)
            if not c:
                continue
            k = small.index(mod_box(w, L))
            f[k] = f[k] + c * h[sys.permutation(neg(w))]
        for j, a in enumerate(centers):
            values[l * len(centers) + j] = f[:, sys.permutation(neg(a))]
        lg.debug(f'tower synthesis: level {l} done')

    return TowerFamily(L, m, values, 'raw')


def indicator_towers(sys: SampledSystem, cover: RokhlinCover) -> TowerFamily:
    """Indicator functions of the tower sets of a cover"""
    values = _zeros((cover.L, len(cover.window), sys.size))
    for l, tower in enumerate(cover.towers):
        for k, U in enumerate(tower):
            values[l, k, U.mask] = Fraction(1)
    return TowerFamily(cover.n, cover.m, values, 'raw')


def normalize_towers(family: TowerFamily) -> TowerFamily:
    """
    Divide a family by its pointwise sum `S`

    Raises `PreconditionError` if `S < 1` somewhere.
    """
    S = family.total()
    low = [x for x in range(len(S)) if S[x] < 1]
    if low:
        x = low[0]
        raise PreconditionError(
            f'Tower sum is below one at point {x}',
            witness={'point': x, 'sum': str(S[x])},
        )
    values = family.values / S[None, None, :]
    return TowerFamily(family.n, family.m, values, 'normalized')


def sqrt_family(family: TowerFamily) -> TowerFamily:
    """Pointwise square roots (float)"""
    return TowerFamily(
        family.n, family.m, np.sqrt(family.as_float()), 'sqrt'
    )


# ----------------------------------------------------------------------
# relations
# ----------------------------------------------------------------------


@dataclass
class ToleranceReport:
    """
    Sup-norm defects of the Rokhlin relations.

    Attributes
    ----------
    eps1 : unit defect `sup |1 - sum f|`
    eps1prime : sub-unit margin `min(sum f) - 1`
    eps2 : orthogonality `max sup |f_v f_w|` within a level
    eps3 : equivariance `max sup |f_w o alpha^-v - f_(v+w mod n)|`
    eps4 : commutator with test functions (0 in a commutative algebra)
    eps5 : commutator between tower functions (0 likewise)
    """

    eps1: Fraction | float
    eps1prime: Fraction | float
    eps2: Fraction | float
    eps3: Fraction | float
    eps4: Fraction | float = Fraction(0)
    eps5: Fraction | float = Fraction(0)
    witnesses: dict = field(default_factory=dict)

    @property
    def eps(self) -> Fraction | float:
        return max(self.eps1, self.eps2, self.eps3, self.eps4, self.eps5)

    def to_json(self) -> dict:
        def enc(x):
            return fraction_str(x) if isinstance(x, Fraction) else float(x)
        return {
            'eps1': enc(self.eps1),
            'eps1prime': enc(self.eps1prime),
            'eps2': enc(self.eps2),
            'eps3': enc(self.eps3),
            'eps4': enc(self.eps4),
            'eps5': enc(self.eps5),
            'witnesses': dict(self.witnesses),
        }


def _sup(x: np.ndarray) -> tuple:
    # (value, argmax) of |x|
    a = np.abs(x)
    i = int(np.argmax(a)) if a.size else 0
    return (a[i] if a.size else 0), i


def verify_tower_relations(
    sys: SampledSystem,
    family: TowerFamily,
    test_functions: Iterable[np.ndarray] | None = None,
) -> ToleranceReport:
    """
    Measure the Rokhlin relation defects of a tower family

    Parameters
    ----------
    sys : SampledSystem
        System
    family : TowerFamily
        Tower functions
    test_functions : sequence of (P,) arrays, optional
        Functions whose commutators with the towers are measured

    Returns
    -------
    ToleranceReport
    """
    one = Fraction(1) if family.exact else 1.0
    zero_ = Fraction(0) if family.exact else 0.0
    values = family.values
    window = list(family.window)
    witnesses = {}

    S = family.total()
    eps1, x = _sup(one - S)
    witnesses['eps1'] = {'point': x}
    eps1prime = min(S) - one

    eps2 = zero_
    for l in range(family.L):
        for k in range(len(window)):
            for k2 in range(k + 1, len(window)):
                value, x = _sup(values[l, k] * values[l, k2])
                if value > eps2:
                    eps2 = value
                    witnesses['eps2'] = {
                        'level': l,
                        'v': [list(window[k]), list(window[k2])],
                        'point': x,
                    }

    eps3 = zero_
    for l in range(family.L):
        for v in window:
            perm = sys.permutation(neg(v))
            for k, w in enumerate(window):
                target = family.function(l, add(v, w))
                value, x = _sup(values[l, k][perm] - target)
                if value > eps3:
                    eps3 = value
                    witnesses['eps3'] = {
                        'level': l, 'v': list(v), 'w': list(w), 'point': x,
                    }

    eps4 = zero_
    for a in test_functions or []:
        a = np.asarray(a)
        for f in values.reshape(-1, sys.size):
            value, _ = _sup(f * a - a * f)
            eps4 = max(eps4, value)

    return ToleranceReport(
        eps1, eps1prime, eps2, eps3, eps4, zero_, witnesses
    )


# ----------------------------------------------------------------------
# bounds
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class BoundTable:
    """Closed-form dimension bounds for a rank-`m` action on a
    `d`-dimensional space"""

    d: int
    m: int
    dim_rok_bound: int
    dim_rok_cyc_bound: int
    dim_nuc_bound: int

    def to_json(self) -> dict:
        return {
            'd': self.d,
            'm': self.m,
            'dim_rok_bound': self.dim_rok_bound,
            'dim_rok_cyc_bound': self.dim_rok_cyc_bound,
            'dim_nuc_bound': self.dim_nuc_bound,
        }


def report_bounds(d: int, m: int) -> BoundTable:
    """
    Rokhlin dimension, cyclic Rokhlin dimension and crossed-product
    nuclear dimension bounds
    """
    if d < 0 or m < 1:
        raise ParameterError(f'Need d >= 0 and m >= 1, got d={d}, m={m}')
    return BoundTable(
        d, m,
        dim_rok_bound=2 ** m * (d + 1) - 1,
        dim_rok_cyc_bound=2 ** (2 * m) * (d + 1) - 1,
        dim_nuc_bound=2 ** (3 * m) * (d + 1) ** 2 - 1,
    )


def crossed_product_bound(s: int, d_cyc: int, m: int) -> int:
    """Nuclear dimension bound `2^m (s+1)(d_cyc+1) - 1` for the crossed
    product of an algebra of nuclear dimension `s`"""
    if s < 0 or d_cyc < 0 or m < 1:
        raise ParameterError('Need s >= 0, d_cyc >= 0 and m >= 1')
    return 2 ** m * (s + 1) * (d_cyc + 1) - 1

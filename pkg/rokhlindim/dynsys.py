"""
Finite sampled stand-ins for compact metric Z^m-systems.

A `SampledSystem` holds `P` labelled points, an exact rational metric
(integer numerators over a common denominator) and `m` commuting
generator permutations. Point arguments are always point *indices*;
use `sys.index(label)` to look a point up by its label.

Freeness is audited at a finite radius: `check_free(sys, R)` inspects
every `g` in `J_R minus {0}`.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from logging import getLogger
from typing import Any, Hashable, Iterable

import numpy as np

from rokhlindim.errors import ParameterError
from rokhlindim.lattice import BoxWindow, Vector, as_vector, norm_inf, sub
from rokhlindim.topo import PointSet
from rokhlindim.utils.ui import RationalLike, as_fraction, fraction_str

lg = getLogger(__name__)

__all__ = [
    'SampledSystem',
    'FreenessCertificate',
    'IsometryAudit',
    'act',
    'fixed_point_set',
    'check_free',
    'is_isometric',
    'required_radius',
    'make_cyclic',
    'make_odometer',
    'make_product',
    'load_system',
    'system_to_json',
    'with_closure_eps',
]

# largest sample for which the metric is stored densely
MAX_POINTS = 2 ** 14
# largest sample for which the triangle inequality is checked exhaustively
EXHAUSTIVE_TRIANGLE = 512
# number of cached permutations, in units of points
PERMUTATION_CACHE = 2 ** 22


def _frozen(x: np.ndarray) -> np.ndarray:
    x.flags.writeable = False
    return x


@dataclass(frozen=True, eq=False)
class SampledSystem:
    """
    A finite metric space with a Z^m-action by commuting bijections.

    Attributes
    ----------
    labels : tuple
        Point labels (hashable), in index order
    dist_num : (P, P) array[int64]
        Metric numerators: `d(i, j) = dist_num[i, j] / dist_den`
    dist_den : int
        Common metric denominator
    generators : tuple of (P,) array[intp]
        `generators[i][x]` is the image of point `x` under `e_i`
    closure_eps : Fraction
        Fattening radius that models the closure of a set
    description : dict, optional
        Builder description (used for compact serialisation)
    """

    labels: tuple
    dist_num: np.ndarray
    dist_den: int
    generators: tuple[np.ndarray, ...]
    closure_eps: Fraction = Fraction(0)
    description: dict | None = None
    _perms: dict = field(default_factory=dict, repr=False)
    _powers: dict = field(default_factory=dict, repr=False)
    _lookup: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        P = len(self.labels)
        if P < 1:
            raise ParameterError('A sampled system needs at least one point')
        if P > MAX_POINTS:
            raise ParameterError(
                f'Sample of {P} points is too large for a dense metric '
                f'(max {MAX_POINTS})'
            )
        if not self.generators:
            raise ParameterError('A sampled system needs rank >= 1')
        dist = np.asarray(self.dist_num, dtype=np.int64)
        if dist.shape != (P, P):
            raise ParameterError(
                f'Metric must be {P}x{P}, got {dist.shape}'
            )
        if int(self.dist_den) < 1:
            raise ParameterError('Metric denominator must be positive')
        gens = []
        for g in self.generators:
            g = np.asarray(g, dtype=np.intp)
            if g.shape != (P,):
                raise ParameterError(
                    f'Generators must be permutation arrays of length {P}'
                )
            gens.append(_frozen(g.copy()))
        object.__setattr__(self, 'dist_num', _frozen(dist.copy()))
        object.__setattr__(self, 'dist_den', int(self.dist_den))
        object.__setattr__(self, 'generators', tuple(gens))
        object.__setattr__(self, 'labels', tuple(self.labels))
        object.__setattr__(self, 'closure_eps', as_fraction(self.closure_eps))
        if self.closure_eps < 0:
            raise ParameterError('closure_eps must be >= 0')
        object.__setattr__(
            self, '_lookup', {label: i for i, label in enumerate(self.labels)}
        )
        if len(self._lookup) != P:
            raise ParameterError('Point labels must be distinct')

    # ------------------------------------------------------------------
    # basic queries
    # ------------------------------------------------------------------

    @property
    def m(self) -> int:
        """Rank of the acting lattice"""
        return len(self.generators)

    @property
    def size(self) -> int:
        """Number of points"""
        return len(self.labels)

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        kind = (self.description or {}).get('builder', 'explicit')
        return f'SampledSystem({kind}, P={self.size}, m={self.m})'

    def index(self, label: Hashable) -> int:
        """Index of the point with a given label"""
        if isinstance(label, list):
            label = tuple(label)
        if label not in self._lookup and isinstance(label, int):
            label = (label,)
        try:
            return self._lookup[label]
        except KeyError:
            raise ParameterError(f'Unknown point label: {label!r}')

    def distance(self, i: int, j: int) -> Fraction:
        return Fraction(int(self.dist_num[i, j]), self.dist_den)

    def distances(self) -> np.ndarray:
        """Metric as a float matrix"""
        return self.dist_num / self.dist_den

    # ------------------------------------------------------------------
    # action
    # ------------------------------------------------------------------

    def _generator_power(self, i: int, k: int) -> np.ndarray:
        key = (i, k)
        if key in self._powers:
            return self._powers[key]
        base = self.generators[i]
        if k < 0:
            inverse = np.empty_like(base)
            inverse[base] = np.arange(self.size)
            base, k = inverse, -k
        out = np.arange(self.size)
        while k:
            if k & 1:
                out = base[out]
            base = base[base]
            k >>= 1
        self._powers[key] = _frozen(out)
        return out

    def permutation(self, v: Vector | int) -> np.ndarray:
        """
        Permutation array of `alpha^v`

        Parameters
        ----------
        v : vector
            Group element of rank `m`

        Returns
        -------
        perm : (P,) array[intp]
            `perm[x]` is the index of `alpha^v(x)`
        """
        v = as_vector(v, self.m)
        perm = self._perms.get(v)
        if perm is not None:
            return perm
        perm = np.arange(self.size)
        for i, k in enumerate(v):
            if k:
                perm = self._generator_power(i, k)[perm]
        if len(self._perms) * self.size > PERMUTATION_CACHE:
            self._perms.clear()
        self._perms[v] = _frozen(perm)
        return perm

    def act(self, v: Vector | int, point: int) -> int:
        """Index of `alpha^v(point)`"""
        if not 0 <= point < self.size:
            raise ParameterError(f'Point index out of range: {point}')
        return int(self.permutation(v)[point])

    # ------------------------------------------------------------------
    # validation
    # ------------------------------------------------------------------

    def validate(self) -> "SampledSystem":
        """
        Check the structural invariants (metric axioms, bijective and
        commuting generators). Raises `ParameterError` on failure.
        """
        D = self.dist_num
        P = self.size
        if not np.array_equal(D, D.T):
            i, j = np.argwhere(D != D.T)[0]
            raise ParameterError(
                'Metric is not symmetric', witness={'pair': [int(i), int(j)]}
            )
        if np.any(np.diag(D) != 0):
            raise ParameterError('Metric has a nonzero diagonal')
        offdiag = D + np.eye(P, dtype=np.int64)
        if np.any(offdiag <= 0):
            i, j = np.argwhere(offdiag <= 0)[0]
            raise ParameterError(
                'Distinct points at distance zero',
                witness={'pair': [int(i), int(j)]},
            )
        if P <= EXHAUSTIVE_TRIANGLE:
            pivots = range(P)
        else:
            rng = np.random.default_rng(0)
            pivots = rng.choice(P, size=64, replace=False)
        for k in pivots:
            bad = D > D[:, k:k+1] + D[k:k+1, :]
            if bad.any():
                i, j = np.argwhere(bad)[0]
                raise ParameterError(
                    'Metric violates the triangle inequality',
                    witness={'pair': [int(i), int(j)], 'via': int(k)},
                )
        for i, g in enumerate(self.generators):
            if not np.array_equal(np.sort(g), np.arange(P)):
                raise ParameterError(f'Generator {i} is not a bijection')
        for i, gi in enumerate(self.generators):
            for j, gj in enumerate(self.generators[:i]):
                if not np.array_equal(gi[gj], gj[gi]):
                    raise ParameterError(
                        f'Generators {j} and {i} do not commute'
                    )
        return self


# ----------------------------------------------------------------------
# freeness
# ----------------------------------------------------------------------


def act(sys: SampledSystem, v: Vector | int, point: int) -> int:
    """Index of `alpha^v(point)`"""
    return sys.act(v, point)


def fixed_point_set(sys: SampledSystem, g: Vector | int) -> PointSet:
    """
    Points fixed by `alpha^g`

    Parameters
    ----------
    sys : SampledSystem
        System
    g : vector
        Nonzero group element

    Returns
    -------
    PointSet
    """
    g = as_vector(g, sys.m)
    if not any(g):
        raise ParameterError('The identity fixes every point; g must be nonzero')
    perm = sys.permutation(g)
    return PointSet(perm == np.arange(sys.size))


@dataclass
class FreenessCertificate:
    """
    Freeness audit at a finite radius.

    `violations` lists every `(g, x)` with `g` in `J_R minus {0}` and
    `alpha^g(x) = x`.
    """

    radius: int
    violations: list[tuple[Vector, int]] = field(default_factory=list)

    @property
    def free(self) -> bool:
        return not self.violations

    def elements(self) -> list[Vector]:
        """Group elements with at least one fixed point"""
        return sorted({g for g, _ in self.violations})

    def to_json(self) -> dict:
        return {
            'radius': self.radius,
            'free': self.free,
            'violations': [
                {'g': list(g), 'point': x} for g, x in self.violations
            ],
        }


def check_free(sys: SampledSystem, R: int) -> FreenessCertificate:
    """
    Audit freeness at radius `R`

    Parameters
    ----------
    sys : SampledSystem
        System
    R : int
        Audit radius (>= 1); every `g` in `J_R minus {0}` is inspected

    Returns
    -------
    FreenessCertificate
    """
    if R < 1:
        raise ParameterError(f'Audit radius must be >= 1, got {R}')
    cert = FreenessCertificate(R)
    identity = np.arange(sys.size)
    for g in BoxWindow('J', R, sys.m):
        if not any(g):
            continue
        fixed = np.flatnonzero(sys.permutation(g) == identity)
        cert.violations.extend((g, int(x)) for x in fixed)
    lg.debug(
        f'freeness at radius {R}: {len(cert.violations)} violation(s)'
    )
    return cert


def required_radius(window: Iterable) -> int:
    """
    Smallest audit radius under which every difference `g - h` of a
    window is a nonzero element of the audited box (or zero)
    """
    window = [as_vector(g) for g in window]
    if not window:
        raise ParameterError('Empty window')
    spread = max(norm_inf(sub(g, h)) for g in window for h in window)
    return spread + 1


@dataclass
class IsometryAudit:
    """Whether every generator preserves the metric"""

    isometric: bool
    generators: list[bool]
    witness: dict | None = None

    def to_json(self) -> dict:
        return {
            'isometric': self.isometric,
            'generators': list(self.generators),
            'witness': self.witness,
        }


def is_isometric(sys: SampledSystem) -> IsometryAudit:
    """Audit `d(g x, g y) = d(x, y)` for each generator `g`"""
    flags = []
    witness = None
    D = sys.dist_num
    for i, g in enumerate(sys.generators):
        bad = D[np.ix_(g, g)] != D
        flags.append(not bad.any())
        if bad.any() and witness is None:
            x, y = np.argwhere(bad)[0]
            witness = {'generator': i, 'pair': [int(x), int(y)]}
    return IsometryAudit(all(flags), flags, witness)


# ----------------------------------------------------------------------
# builders
# ----------------------------------------------------------------------


def make_cyclic(*sizes: int, closure_eps: RationalLike = 0) -> SampledSystem:
    """
    Translation action on `Z/N_1 x ... x Z/N_m`

    Points are enumerated lexicographically and labelled by their
    coordinates. The metric is the normalised sup circle distance
    `max_i min(|x_i - y_i|, N_i - |x_i - y_i|) / N_i`.
    """
    if len(sizes) == 1 and not isinstance(sizes[0], int):
        sizes = tuple(sizes[0])
    if not sizes:
        raise ParameterError('make_cyclic needs at least one size')
    sizes = tuple(int(N) for N in sizes)
    if any(N < 2 for N in sizes):
        raise ParameterError(f'Cyclic sizes must be >= 2, got {sizes}')
    P = math.prod(sizes)
    if P > MAX_POINTS:
        raise ParameterError(f'Sample of {P} points is too large')
    den = reduce(math.lcm, sizes)
    coords = np.indices(sizes).reshape(len(sizes), -1).T
    dist = np.zeros((P, P), dtype=np.int64)
    gens = []
    flat = np.arange(P).reshape(sizes)
    for i, N in enumerate(sizes):
        delta = np.abs(coords[:, None, i] - coords[None, :, i])
        delta = np.minimum(delta, N - delta) * (den // N)
        np.maximum(dist, delta, out=dist)
        gens.append(np.roll(flat, -1, axis=i).reshape(-1))
    labels = tuple(tuple(int(c) for c in row) for row in coords)
    return SampledSystem(
        labels, dist, den, tuple(gens), as_fraction(closure_eps),
        {'builder': 'cyclic', 'sizes': list(sizes)},
    )


def make_odometer(bits: int, closure_eps: RationalLike = 0) -> SampledSystem:
    """
    Binary odometer (+1 with carry) on `{0,1}^bits`

    Point `i` is the integer whose binary digits, least significant
    first, form its label. Two points at lowest differing bit `t` are
    at distance `2^-t`.
    """
    bits = int(bits)
    if bits < 1:
        raise ParameterError(f'Odometer needs bits >= 1, got {bits}')
    P = 2 ** bits
    if P > MAX_POINTS:
        raise ParameterError(f'Sample of {P} points is too large')
    den = 2 ** (bits - 1)
    idx = np.arange(P, dtype=np.int64)
    xor = idx[:, None] ^ idx[None, :]
    low = xor & -xor
    dist = np.where(xor == 0, 0, den // np.maximum(low, 1))
    gen = (idx + 1) % P
    labels = tuple(tuple((i >> b) & 1 for b in range(bits)) for i in range(P))
    return SampledSystem(
        labels, dist, den, (gen,), as_fraction(closure_eps),
        {'builder': 'odometer', 'bits': bits},
    )


def _join_labels(a: Any, b: Any) -> tuple:
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return a + b


def make_product(
    sys1: SampledSystem,
    sys2: SampledSystem,
    closure_eps: RationalLike = 0,
) -> SampledSystem:
    """
    Product system with the max metric; each factor's generators act on
    their own coordinate. Point `(i1, i2)` has index `i1 * P2 + i2`.
    """
    P1, P2 = sys1.size, sys2.size
    if P1 * P2 > MAX_POINTS:
        raise ParameterError(f'Sample of {P1 * P2} points is too large')
    den = math.lcm(sys1.dist_den, sys2.dist_den)
    d1 = np.repeat(np.repeat(sys1.dist_num * (den // sys1.dist_den), P2, 0), P2, 1)
    d2 = np.tile(sys2.dist_num * (den // sys2.dist_den), (P1, P1))
    dist = np.maximum(d1, d2)
    i1, i2 = np.divmod(np.arange(P1 * P2), P2)
    gens = [g[i1] * P2 + i2 for g in sys1.generators]
    gens += [i1 * P2 + g[i2] for g in sys2.generators]
    labels = tuple(_join_labels(a, b) for a in sys1.labels for b in sys2.labels)
    description = None
    if sys1.description and sys2.description:
        description = {
            'builder': 'product',
            'factors': [system_to_json(sys1), system_to_json(sys2)],
        }
    return SampledSystem(
        labels, dist, den, tuple(gens), as_fraction(closure_eps), description
    )


# ----------------------------------------------------------------------
# serialisation
# ----------------------------------------------------------------------


def _label_from_json(x: Any) -> Hashable:
    if isinstance(x, list):
        return tuple(_label_from_json(y) for y in x)
    return x


def _label_to_json(x: Any) -> Any:
    if isinstance(x, tuple):
        return [_label_to_json(y) for y in x]
    return x


def _explicit_system(obj: dict, closure_eps: Fraction) -> SampledSystem:
    labels = [_label_from_json(x) for x in obj['points']]
    P = len(labels)
    rows = obj['metric']
    if len(rows) == P * P and not isinstance(rows[0], list):
        rows = [rows[i * P:(i + 1) * P] for i in range(P)]
    if len(rows) != P or any(len(row) != P for row in rows):
        raise ParameterError(f'Metric must be a {P}x{P} array')
    values = [[as_fraction(x) for x in row] for row in rows]
    den = reduce(math.lcm, (x.denominator for row in values for x in row), 1)
    dist = np.array(
        [[x.numerator * (den // x.denominator) for x in row] for row in values],
        dtype=np.int64,
    )
    gens = tuple(np.asarray(g, dtype=np.intp) for g in obj['generators'])
    sys = SampledSystem(tuple(labels), dist, den, gens, closure_eps, None)
    return sys.validate()


def load_system(obj: dict) -> SampledSystem:
    """
    Build a system from its JSON description

    Accepted forms:

    * `{"builder": "cyclic", "sizes": [N_1, ...]}`
    * `{"builder": "odometer", "bits": k}`
    * `{"builder": "product", "factors": [desc_1, desc_2]}`
    * `{"points": [...], "metric": [[...]], "generators": [[...]]}`

    Every form accepts an optional `"closure_eps"` rational.
    """
    if not isinstance(obj, dict):
        raise ParameterError('A system description must be a JSON object')
    closure_eps = as_fraction(obj.get('closure_eps', 0))
    builder = obj.get('builder')
    try:
        if builder == 'cyclic':
            return make_cyclic(*obj['sizes'], closure_eps=closure_eps)
        if builder == 'odometer':
            return make_odometer(obj['bits'], closure_eps=closure_eps)
        if builder == 'product':
            factors = obj['factors']
            if len(factors) < 2:
                raise ParameterError('A product needs at least two factors')
            systems = [load_system(f) for f in factors]
            out = systems[0]
            for other in systems[1:]:
                out = make_product(out, other)
            return with_closure_eps(out, closure_eps)
        if builder is None:
            return _explicit_system(obj, closure_eps)
    except KeyError as e:
        raise ParameterError(f'System description misses key {e}')
    raise ParameterError(f'Unknown system builder: {builder!r}')


def with_closure_eps(sys: SampledSystem, closure_eps: Fraction) -> SampledSystem:
    """Same system with another closure radius"""
    if sys.closure_eps == closure_eps:
        return sys
    return SampledSystem(
        sys.labels, sys.dist_num, sys.dist_den, sys.generators,
        closure_eps, sys.description,
    )


def system_to_json(sys: SampledSystem) -> dict:
    """JSON description of a system (builder form when available)"""
    if sys.description is not None:
        obj = dict(sys.description)
    else:
        obj = {
            'points': [_label_to_json(x) for x in sys.labels],
            'metric': [
                [fraction_str(Fraction(int(k), sys.dist_den)) for k in row]
                for row in sys.dist_num
            ],
            'generators': [[int(x) for x in g] for g in sys.generators],
        }
    if sys.closure_eps:
        obj['closure_eps'] = fraction_str(sys.closure_eps)
    return obj

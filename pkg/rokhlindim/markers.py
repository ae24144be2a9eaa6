"""
Markers: sets whose translates over a window are disjoint while their
translates over a larger window cover the sample.

Construction
------------
* `extend_marker_step` grows a disjoint set `U` so that a further set
  `V` becomes covered, coloring small balls by the blocks of the
  cover window.
* `build_marker` folds the extension step over a seed cover.
* `build_controlled_marker` produces an `L`-controlled `B_n`-marker
  with `L = 2^m (d+1)`.
* `tiling_marker` is the exact marker of a cyclic system.

Verification
------------
`verify_marker` and `verify_controlled_marker` work on plain Python
sets through `sys.act` and share no code with the constructions.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from logging import getLogger
from typing import Iterable, Sequence

import numpy as np

from rokhlindim.dynsys import SampledSystem, check_free, required_radius
from rokhlindim.errors import (
    ColoringError,
    ParameterError,
    PreconditionError,
    RokhlinError,
    SmallnessBudgetError,
    VerificationError,
)
from rokhlindim.lattice import (
    Vector,
    add,
    as_vector,
    cover_translates,
    difference_box,
    enum_box,
    neg,
    separation_vectors,
    sub,
    zero,
)
from rokhlindim.topo import (
    PointSet,
    _ball_mask,
    closure,
    distance_grid,
    fatten,
    is_disjoint,
    overlap_witness,
    translate_stack,
)
from rokhlindim.utils.ui import as_fraction, fraction_str

lg = getLogger(__name__)

__all__ = [
    'MarkerWitness',
    'ControlledMarkerWitness',
    'MarkerReport',
    'StarAudit',
    'cover_window',
    'difference_corners',
    'verify_marker',
    'verify_controlled_marker',
    'star_condition',
    'extend_marker_step',
    'build_marker',
    'build_controlled_marker',
    'tiling_marker',
]


# ----------------------------------------------------------------------
# witnesses
# ----------------------------------------------------------------------


def _vectors(window: Iterable, m: int) -> list[Vector]:
    return [as_vector(g, m) for g in window]


@dataclass
class MarkerWitness:
    """
    A marker `Z` for the window `F`, covering the sample with the
    translates over `cover_window`.
    """

    Z: PointSet
    F: list[Vector]
    cover_window: list[Vector]

    def to_json(self) -> dict:
        return {
            'Z': self.Z.to_json(),
            'F': [list(g) for g in self.F],
            'cover_window': [list(g) for g in self.cover_window],
        }

    @classmethod
    def from_json(cls, obj: dict, sys: SampledSystem) -> "MarkerWitness":
        return cls(
            PointSet.from_json(obj['Z'], sys.size),
            _vectors(obj['F'], sys.m),
            _vectors(obj['cover_window'], sys.m),
        )


@dataclass
class ControlledMarkerWitness:
    """
    An `L`-controlled `B_n`-marker: the sets `alpha^{v_l + v}(Z)`,
    `v` in `B_n`, `l < L`, cover the sample.
    """

    Z: PointSet
    n: int
    translates: list[Vector]

    @property
    def L(self) -> int:
        return len(self.translates)

    def to_json(self) -> dict:
        return {
            'Z': self.Z.to_json(),
            'n': self.n,
            'L': self.L,
            'translates': [list(v) for v in self.translates],
        }

    @classmethod
    def from_json(
        cls, obj: dict, sys: SampledSystem
    ) -> "ControlledMarkerWitness":
        return cls(
            PointSet.from_json(obj['Z'], sys.size),
            int(obj['n']),
            _vectors(obj['translates'], sys.m),
        )


@dataclass
class MarkerReport:
    """Outcome of a marker verification"""

    disjoint: bool
    covers: bool
    collision: dict | None = None
    uncovered: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.disjoint and self.covers

    def to_json(self) -> dict:
        return {
            'ok': self.ok,
            'disjoint': self.disjoint,
            'collision': self.collision,
            'covers': self.covers,
            'uncovered': list(self.uncovered),
        }


# ----------------------------------------------------------------------
# verifiers (pure Python sets)
# ----------------------------------------------------------------------


def _closure_points(sys: SampledSystem, points: set[int]) -> set[int]:
    eps = sys.closure_eps
    if eps == 0:
        return set(points)
    out = set()
    for y in range(sys.size):
        for x in points:
            if int(sys.dist_num[x, y]) * eps.denominator <= eps.numerator * sys.dist_den:
                out.add(y)
                break
    return out


def _collision(
    sys: SampledSystem, points: set[int], window: Sequence[Vector]
) -> dict | None:
    owner: dict[int, Vector] = {}
    for g in window:
        for x in sorted(points):
            y = sys.act(g, x)
            if y in owner and owner[y] != g:
                return {
                    'translates': [list(owner[y]), list(g)],
                    'point': y,
                }
            owner[y] = g
    return None


def _uncovered(
    sys: SampledSystem, points: set[int], window: Iterable[Vector]
) -> list[int]:
    covered = set()
    for g in window:
        covered.update(sys.act(g, x) for x in points)
    return [x for x in range(sys.size) if x not in covered]


def verify_marker(
    sys: SampledSystem, Z: PointSet, F: Iterable, M: Iterable
) -> MarkerReport:
    """
    Check that `Z` is an `F`-marker covering the sample over `M`

    Parameters
    ----------
    sys : SampledSystem
        System
    Z : PointSet
        Candidate marker
    F : sequence of vectors
        Window whose translates of the closure of `Z` must be disjoint
    M : sequence of vectors
        Window whose translates of `Z` must cover the sample

    Returns
    -------
    MarkerReport
    """
    F = list(dict.fromkeys(_vectors(F, sys.m)))
    M = list(dict.fromkeys(_vectors(M, sys.m)))
    points = set(Z)
    collision = _collision(sys, _closure_points(sys, points), F)
    uncovered = _uncovered(sys, points, M)
    return MarkerReport(
        disjoint=collision is None,
        covers=not uncovered,
        collision=collision,
        uncovered=uncovered,
    )


def verify_controlled_marker(
    sys: SampledSystem, w: ControlledMarkerWitness
) -> MarkerReport:
    """Check the covering by `v_l + B_n` translates and `B_n`-disjointness"""
    box = enum_box('B', w.n, sys.m)
    window = {add(t, v) for t in w.translates for v in box}
    return verify_marker(sys, w.Z, box, sorted(window))


# ----------------------------------------------------------------------
# extension step
# ----------------------------------------------------------------------


def cover_window(
    F: Sequence[Vector], g_list: Sequence[Vector]
) -> tuple[list[Vector], list[list[Vector]]]:
    """
    Blocks `g_l + (F - F)` (with `g_0 = 0`) and their union `M`

    Returns
    -------
    M : list[vector]
        Union of the blocks, deduplicated, in block order
    blocks : list[list[vector]]
    """
    F = list(F)
    m = len(F[0])
    diffs = list(dict.fromkeys(sub(f, h) for h in F for f in F))
    blocks = [
        [add(g, x) for x in diffs]
        for g in [zero(m)] + [as_vector(g, m) for g in g_list]
    ]
    M = list(dict.fromkeys(g for block in blocks for g in block))
    return M, blocks


def difference_corners(n: int, m: int) -> list[Vector]:
    """
    Corners `-(n-1) + w_a` whose `B_n` boxes cover `B_n - B_n`

    Raises
    ------
    VerificationError
        If the boxes miss a difference
    """
    corner = (1 - n,) * m
    corners = [add(corner, w) for w in cover_translates(n, m).vectors]
    box = enum_box('B', n, m)
    covered = {add(c, b) for c in corners for b in box}
    missing = [v for v in difference_box(n, m) if v not in covered]
    if missing:
        raise VerificationError(
            f'Translated boxes miss {len(missing)} differences of B_{n}',
            witness={'missing': [list(v) for v in missing[:8]]},
        )
    return corners


@dataclass
class StarAudit:
    """
    Audit of the smallness condition at radius `delta`: every ball of
    radius `delta` around a point of `R` meets at most `d` translates of
    the closure of `U` over `M`.
    """

    delta: Fraction
    max_count: int
    worst_point: int | None
    d: int

    @property
    def ok(self) -> bool:
        return self.max_count <= self.d

    def to_json(self) -> dict:
        return {
            'delta': fraction_str(self.delta),
            'max_count': self.max_count,
            'worst_point': self.worst_point,
            'd': self.d,
            'ok': self.ok,
        }


def _star_counts(
    sys: SampledSystem, stack: np.ndarray, R: PointSet, delta: Fraction
) -> np.ndarray:
    balls = _ball_mask(sys, R.indices(), delta + sys.closure_eps)
    hits = balls.astype(np.int64) @ stack.T.astype(np.int64)
    return (hits > 0).sum(axis=1)


def star_condition(
    sys: SampledSystem,
    U: PointSet,
    R: PointSet,
    M: Iterable,
    d: int,
    delta,
) -> StarAudit:
    """
    Count, for each `x` in `R`, the elements `g` of `M` such that
    `alpha^g(closure(U))` meets the closed ball of radius `delta` at `x`.
    """
    delta = as_fraction(delta)
    M = list(dict.fromkeys(_vectors(M, sys.m)))
    if not len(R):
        return StarAudit(delta, 0, None, d)
    stack = translate_stack(sys, closure(sys, U), M)
    counts = _star_counts(sys, stack, R, delta)
    worst = int(np.argmax(counts))
    return StarAudit(delta, int(counts[worst]), int(R.indices()[worst]), d)


def _check_blocks(blocks: list[list[Vector]]) -> None:
    seen: dict[Vector, int] = {}
    for l, block in enumerate(blocks):
        for g in block:
            if g in seen and seen[g] != l:
                raise PreconditionError(
                    f'Blocks {seen[g]} and {l} of the cover window overlap',
                    witness={'blocks': [seen[g], l], 'element': list(g)},
                )
            seen[g] = l


def _check_extension_inputs(
    sys: SampledSystem,
    U: PointSet,
    V: PointSet,
    F: list[Vector],
    M: list[Vector],
    d: int,
) -> None:
    Ubar = closure(sys, U)
    if not is_disjoint(sys, Ubar, F, 1):
        raise PreconditionError(
            'F-translates of the closure of U are not disjoint',
            witness=overlap_witness(sys, Ubar, F, 1),
        )
    Minv = [neg(g) for g in M]
    Vbar = closure(sys, V)
    if not is_disjoint(sys, Vbar, Minv, 1):
        raise PreconditionError(
            'Inverse window translates of the closure of V are not disjoint',
            witness=overlap_witness(sys, Vbar, Minv, 1),
        )
    boundary = fatten(sys, U, sys.closure_eps) - U
    if not is_disjoint(sys, boundary, M, d):
        raise PreconditionError(
            f'Boundary of U is not (M, {d})-disjoint',
            witness=overlap_witness(sys, boundary, M, d),
        )


def _verify_extension(
    sys: SampledSystem,
    U: PointSet,
    V: PointSet,
    W: PointSet,
    F: list[Vector],
    M: list[Vector],
) -> dict | None:
    u, v, w = set(U), set(V), set(W)
    if not u <= w:
        return {'failed': 'monotone', 'point': min(u - w)}
    covered = set()
    for g in M:
        covered.update(sys.act(g, x) for x in w)
    if not v <= covered:
        return {'failed': 'covers', 'point': min(v - covered)}
    collision = _collision(sys, _closure_points(sys, w), F)
    if collision is not None:
        return {'failed': 'disjoint', **collision}
    return None


def _grow(
    sys: SampledSystem,
    U: PointSet,
    R: PointSet,
    delta: Fraction,
    stack: np.ndarray,
    offsets: list[Vector],
    blocks: list[list[Vector]],
    block_rows: list[list[int]],
) -> PointSet:
    # greedy cover of R by delta-balls, smallest uncovered index first
    remaining = R.mask.copy()
    W = U.mask.copy()
    radius = delta + sys.closure_eps
    while remaining.any():
        z = int(np.flatnonzero(remaining)[0])
        ball = _ball_mask(sys, np.array([z]), delta)[0]
        closed = _ball_mask(sys, np.array([z]), radius)[0]
        remaining &= ~ball
        hits = (stack[:, closed]).any(axis=1)
        color = None
        for l, rows in enumerate(block_rows):
            if not hits[rows].any():
                color = l
                break
        if color is None:
            raise ColoringError(
                f'No admissible color for the ball of radius {delta} '
                f'at point {z}',
                witness={
                    'center': z,
                    'delta': fraction_str(delta),
                    'blocking': [
                        list(g) for block, rows in zip(blocks, block_rows)
                        for g, r in zip(block, rows) if hits[r]
                    ],
                },
            )
        g = offsets[color]
        perm = sys.permutation(neg(g))
        W[perm[ball]] = True
    return PointSet(W)


def extend_marker_step(
    sys: SampledSystem,
    U: PointSet,
    V: PointSet,
    F: Iterable,
    g_list: Sequence,
    d: int,
    *,
    grid: Sequence[Fraction] | None = None,
) -> PointSet:
    """
    Grow `U` into `W` so that `V` is covered by the `M`-translates of `W`

    Parameters
    ----------
    sys : SampledSystem
        System
    U : PointSet
        Current marker (closure `F`-disjoint)
    V : PointSet
        Set to cover (closure `M^-1`-disjoint)
    F : sequence of vectors
        Marker window
    g_list : sequence of vectors
        Block offsets `g_1, ..., g_d` (`g_0 = 0` is implicit)
    d : int
        Number of extra blocks; the blocks `g_l + (F - F)` must be
        pairwise disjoint

    Other Parameters
    ----------------
    grid : sequence of rationals, optional
        Radii scanned for the balls (default: the distance grid)

    Returns
    -------
    W : PointSet
        `U <= W`, `V` covered by the `M`-translates of `W`, and the
        `F`-translates of the closure of `W` pairwise disjoint
    """
    if d < 0:
        raise ParameterError(f'd must be >= 0, got {d}')
    g_list = _vectors(g_list, sys.m)
    if len(g_list) != d:
        raise ParameterError(
            f'Expected {d} block offsets, got {len(g_list)}'
        )
    F = list(dict.fromkeys(_vectors(F, sys.m)))
    if not F:
        raise ParameterError('Empty marker window')
    M, blocks = cover_window(F, g_list)
    _check_blocks(blocks)
    _check_extension_inputs(sys, U, V, F, M, d)

    Ubar = closure(sys, U)
    covered = PointSet(translate_stack(sys, U, M).any(axis=0))
    R = closure(sys, V) - covered
    if not len(R):
        return U

    grid = distance_grid(sys) if grid is None else sorted(grid)
    Minv = [neg(g) for g in M]

    # largest radius keeping the fattened remainder M^-1-disjoint
    rho = grid[0]
    for delta in grid:
        if not is_disjoint(sys, fatten(sys, R, delta + sys.closure_eps), Minv, 1):
            break
        rho = delta

    stack = translate_stack(sys, Ubar, M)
    index = {g: i for i, g in enumerate(M)}
    block_rows = [[index[g] for g in block] for block in blocks]
    offsets = [zero(sys.m)] + g_list

    candidates = [delta for delta in grid if delta <= rho]
    admissible = []
    worst = None
    for delta in reversed(candidates):
        counts = _star_counts(sys, stack, R, delta)
        if int(counts.max()) <= d:
            admissible.append(delta)
        else:
            i = int(np.argmax(counts))
            worst = {
                'point': int(R.indices()[i]),
                'count': int(counts[i]),
                'delta': fraction_str(delta),
            }
    if not admissible:
        raise SmallnessBudgetError(
            'No radius on the distance grid satisfies the smallness '
            'condition', witness=worst,
        )

    failure = None
    for delta in admissible:
        W = _grow(sys, U, R, delta, stack, offsets, blocks, block_rows)
        failure = _verify_extension(sys, U, V, W, F, M)
        if failure is None:
            lg.debug(
                f'extension step: |R|={len(R)}, delta={delta}, '
                f'|W|={len(W)}'
            )
            return W
        lg.debug(f'extension at delta={delta} failed: {failure}')
    raise VerificationError(
        'Extended marker fails its postconditions at every admissible '
        'radius', witness=failure,
    )


# ----------------------------------------------------------------------
# covering iteration
# ----------------------------------------------------------------------


def build_marker(
    sys: SampledSystem,
    F: Iterable,
    g_list: Sequence,
    d: int,
    seed_cover: Sequence[PointSet] | None = None,
) -> MarkerWitness:
    """
    Fold `extend_marker_step` over a seed cover

    Parameters
    ----------
    sys : SampledSystem
        System
    F : sequence of vectors
        Marker window
    g_list : sequence of vectors
        Block offsets `g_1, ..., g_d`
    d : int
        Number of extra blocks
    seed_cover : sequence of PointSet, optional
        Sets covering the sample, each with disjoint `M^-1`-translates.
        Default: singletons.

    Returns
    -------
    MarkerWitness
    """
    F = list(dict.fromkeys(_vectors(F, sys.m)))
    g_list = _vectors(g_list, sys.m)
    M, _ = cover_window(F, g_list)
    if seed_cover is None:
        seed_cover = [PointSet.from_indices([x], sys.size) for x in range(sys.size)]
    seeds = list(seed_cover)
    union = PointSet.empty(sys.size)
    for seed in seeds:
        union = union | seed
    if len(union) != sys.size:
        missing = [x for x in range(sys.size) if x not in union]
        raise PreconditionError(
            'Seed cover does not cover the sample',
            witness={'uncovered': missing[:16]},
        )

    grid = distance_grid(sys)
    W = PointSet.empty(sys.size)
    target: set[int] = set()
    covered: set[int] = set()
    for k, V in enumerate(seeds):
        try:
            W_next = extend_marker_step(sys, W, V, F, g_list, d, grid=grid)
        except RokhlinError as e:
            e.context['fold'] = k
            raise
        target |= set(V)
        for x in W_next - W:
            covered.update(sys.act(g, x) for g in M)
        if not (W <= W_next and target <= covered):
            raise VerificationError(
                f'Marker fold {k} lost monotonicity or coverage',
                witness={'fold': k},
            )
        W = W_next
        if k % 64 == 0:
            lg.debug(f'marker fold {k}/{len(seeds)}: |W|={len(W)}')

    witness = MarkerWitness(W, F, M)
    report = verify_marker(sys, W, F, M)
    if not report.ok:
        raise VerificationError(
            'Constructed marker fails verification', witness=report.to_json()
        )
    lg.info(f'marker: |Z|={len(W)}, |F|={len(F)}, |M|={len(M)}')
    return witness


def build_controlled_marker(
    sys: SampledSystem,
    n: int,
    d: int,
    seed_cover: Sequence[PointSet] | None = None,
) -> ControlledMarkerWitness:
    """
    Build a `2^m (d+1)`-controlled `B_n`-marker

    Parameters
    ----------
    sys : SampledSystem
        System (free at the radius required by the cover window)
    n : int
        Tower side
    d : int
        Dimension parameter
    seed_cover : sequence of PointSet, optional
        Seed cover passed to `build_marker`

    Returns
    -------
    ControlledMarkerWitness
    """
    m = sys.m
    F = enum_box('B', n, m)
    g_list = separation_vectors(n, d, m)
    M, _ = cover_window(F, g_list)
    R = required_radius(M)
    cert = check_free(sys, R)
    if not cert.free:
        raise PreconditionError(
            f'Action is not free at radius {R}',
            witness={
                'radius': R,
                'elements': [list(g) for g in cert.elements()[:8]],
            },
        )
    marker = build_marker(sys, F, g_list, d, seed_cover)

    corners = difference_corners(n, m)
    offsets = [zero(m)] + g_list
    translates = [add(v, c) for v in offsets for c in corners]
    witness = ControlledMarkerWitness(marker.Z, n, translates)
    report = verify_controlled_marker(sys, witness)
    if not report.ok:
        raise VerificationError(
            'Controlled marker fails verification', witness=report.to_json()
        )
    lg.info(f'controlled marker: n={n}, L={witness.L}, |Z|={len(marker.Z)}')
    return witness


def tiling_marker(sys: SampledSystem, n: int) -> ControlledMarkerWitness:
    """
    Exact marker `{x : x_i = 0 mod n}` of a cyclic system with `n | N_i`

    Its `B_n`-translates tile the sample, so `L = 1`.
    """
    desc = sys.description or {}
    if desc.get('builder') != 'cyclic':
        raise ParameterError('Tiling markers need a cyclic system')
    sizes = desc['sizes']
    if n < 1 or any(N % n for N in sizes):
        raise ParameterError(f'n={n} does not divide the sizes {sizes}')
    Z = PointSet(np.array([
        all(x % n == 0 for x in label) for label in sys.labels
    ]))
    return ControlledMarkerWitness(Z, n, [zero(sys.m)])

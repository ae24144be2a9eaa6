"""
End-to-end defect of the approximation `x ~ sigma o phi_n o psi_n o mu (x)`.

The pipeline compresses a crossed-product element to the window `J_n`,
weighs it by the square-root tent `sqrt(D)`, passes it through an inner
approximation and lifts it back with the tower maps `sigma_p^(l)`.
`pipeline_defect` measures the final defect of every test operator
together with each intermediate quantity of the estimate chain, and
compares them with their budgets.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from logging import getLogger
from typing import Literal, Sequence

import numpy as np
import scipy.sparse as sp

from rokhlindim.cstar.band import (
    BandOperator,
    CompressedOperator,
    DiagonalWeight,
    commutator_sqrtD,
    compress_psi,
    mu as mu_map,
    regular_matrix,
)
from rokhlindim.cstar.maps import (
    IdentityApproximation,
    InnerApproximation,
    order_zero_defect,
    orthogonal_test_pairs,
    phi_n,
    psi_n,
    sigma,
    star_defect,
    tower_index,
)
from rokhlindim.dynsys import SampledSystem
from rokhlindim.errors import BudgetExceededError, ParameterError
from rokhlindim.lattice import BoxWindow, Vector, norm_inf, sub
from rokhlindim.rokhlin import TowerFamily, sqrt_family, verify_tower_relations

lg = getLogger(__name__)

__all__ = [
    'CpPipeline',
    'PipelineReport',
    'make_test_ops',
    'pipeline_defect',
    'TestOpKind',
]

TestOpKind = Literal['unit', 'ramp', 'random', 'sum']

# largest |J_n| * P for which the sparse oracle of mu is assembled
ORACLE_LIMIT = 1 << 16
# largest |J_n| for which order-zero pairs are enumerated
ORDER_ZERO_SLOTS = 64
# numerical slack added to every budget
SLACK = 1e-9


class CpPipeline:
    """
    The maps `mu`, `psi_n`, `phi_n` and `sigma = sum_l sum_p sigma_p^(l)`

    Parameters
    ----------
    sys : SampledSystem
        System
    family : TowerFamily
        Tower family of side `2n`
    n, N : int
        Window parameters (`N <= n`)
    inner : InnerApproximation, default=IdentityApproximation()
        Approximation of the coefficient algebra
    """

    def __init__(
        self,
        sys: SampledSystem,
        family: TowerFamily,
        n: int,
        N: int,
        inner: InnerApproximation | None = None,
    ):
        if n < 1 or N < 1:
            raise ParameterError(f'Window parameters must be >= 1, got n={n}, N={N}')
        if N > n:
            raise ParameterError(f'N must not exceed n, got N={N} > n={n}')
        if family.n != 2 * n or family.m != sys.m:
            raise ParameterError(
                f'Tower family of side {family.n} (rank {family.m}) does not '
                f'match n={n}: side {2 * n}, rank {sys.m} expected'
            )
        if family.values.shape[-1] != sys.size:
            raise ParameterError('Tower family is not defined on this sample')
        self.sys = sys
        self.family = family
        self.root = family if family.provenance == 'sqrt' else sqrt_family(family)
        self.n = n
        self.N = N
        self.inner = inner or IdentityApproximation()
        self.selectors = list(product((0, 1), repeat=sys.m))

    @property
    def m(self) -> int:
        return self.sys.m

    @property
    def levels(self) -> int:
        return self.family.L

    def mu(self, x: BandOperator) -> CompressedOperator:
        return mu_map(self.sys, x, self.n)

    def psi_n(self, X: CompressedOperator) -> CompressedOperator:
        return psi_n(X, self.inner)

    def phi_n(self, Y: CompressedOperator) -> CompressedOperator:
        return phi_n(Y, self.inner, self.sys.size)

    def sigma(self, X: CompressedOperator) -> BandOperator:
        out = BandOperator(self.sys)
        for l in range(self.levels):
            for p in self.selectors:
                out = out + sigma(self.sys, self.root, l, p, X)
        return out

    def __call__(self, x: BandOperator) -> BandOperator:
        return self.sigma(self.phi_n(self.psi_n(self.mu(x))))


# ----------------------------------------------------------------------
# test operators
# ----------------------------------------------------------------------


def make_test_ops(
    sys: SampledSystem,
    N: int,
    kind: TestOpKind = 'unit',
    seed: int = 0,
    seedless: bool = False,
) -> list[tuple[str, BandOperator]]:
    """
    Test operators supported in `J_N`

    * 'unit': `u_v` for every `v` in `J_N`;
    * 'ramp': `a u_v` with `a(x) = exp(2 pi i x / P)`;
    * 'random': `a u_v` with random unimodular `a` (needs a seed);
    * 'sum': the single operator `|J_N|^-1 sum_v a u_v`, `a` the ramp.

    Returns
    -------
    list of (label, BandOperator)
    """
    window = list(BoxWindow('J', N, sys.m))
    P = sys.size
    ramp = np.exp(2j * np.pi * np.arange(P) / P)
    if kind == 'unit':
        return [(f'u{list(v)}', BandOperator.single(sys, 1.0, v)) for v in window]
    if kind == 'ramp':
        return [(f'ramp{list(v)}', BandOperator.single(sys, ramp, v)) for v in window]
    if kind == 'random':
        if seedless:
            raise ParameterError("Test operators 'random' need a seed")
        rng = np.random.default_rng(seed)
        ops = []
        for v in window:
            a = np.exp(2j * np.pi * rng.random(P))
            ops.append((f'random{list(v)}', BandOperator.single(sys, a, v)))
        return ops
    if kind == 'sum':
        scale = 1 / len(window)
        x = BandOperator(sys, {v: scale * ramp for v in window})
        return [('sum', x)]
    raise ParameterError(f'Unknown test operator kind: {kind!r}')


# ----------------------------------------------------------------------
# report
# ----------------------------------------------------------------------


@dataclass
class PipelineReport:
    """
    Measured quantities of the approximation chain and their budgets

    Attributes
    ----------
    eps : float
        Tower tolerance
    eps_terms : dict
        Components of `eps`
    delta : float
        Back-solved `delta`
    delta_terms : dict
        Components of `delta`; `binding` names the largest
    conditions : dict
        Requirements on the window `n` for the given `delta`, recorded
        with `met` flags; unmet ones do not fail the report
    ops : list[dict]
        One record per test operator, with `measured` and `budget`
    tower_identity : dict
        Pointwise tent transport of the tower sums
    order_zero : dict
        Order-zero defects of `sigma_p^(l) o phi_n`
    violations : list[dict]
        Every quantity above its budget
    """

    n: int
    N: int
    m: int
    levels: int
    s: int
    eps: float
    eps_terms: dict
    delta: float
    delta_terms: dict
    binding: str
    inner: dict
    ops: list[dict] = field(default_factory=list)
    conditions: dict = field(default_factory=dict)
    tower_identity: dict = field(default_factory=dict)
    order_zero: dict = field(default_factory=dict)
    violations: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            'n': self.n,
            'N': self.N,
            'm': self.m,
            'levels': self.levels,
            's': self.s,
            'inner': dict(self.inner),
            'measured': {
                'eps': self.eps,
                'eps_terms': dict(self.eps_terms),
                'tower_identity': dict(self.tower_identity),
            },
            'budget': {
                'delta': self.delta,
                'delta_terms': dict(self.delta_terms),
                'binding': self.binding,
            },
            'conditions': dict(self.conditions),
            'order_zero': dict(self.order_zero),
            'ops': list(self.ops),
            'violations': list(self.violations),
            'passed': self.passed,
        }

    def rows(self) -> list[dict]:
        """Flat per-operator table"""
        return [
            {'op': op['label'], **op['measured'], 'passed': op['passed']}
            for op in self.ops
        ]


# ----------------------------------------------------------------------
# pieces of the chain
# ----------------------------------------------------------------------


def _tail_estimate(n: int, N: int, m: int) -> float:
    # (1 - (n - N)/n)^m
    return float((1 - Fraction(n - N, n)) ** m)


def _condition(measured: float, required: float) -> dict:
    return {
        'measured': measured,
        'required': required,
        'met': measured <= required + SLACK,
    }


def _root_gap(root: dict[Vector, float], v: Vector) -> float:
    return max(
        (abs(rw - root[sub(w, v)]) for w, rw in root.items() if sub(w, v) in root),
        default=0.0,
    )


def _weighted_sum(
    pipe: CpPipeline, l: int, tent: dict[Vector, Fraction], keep
) -> np.ndarray:
    # sum_{w, keep(w)} d(w) sum_p f_{s_p(w)}^(l), in float
    family, n = pipe.family, pipe.n
    out = np.zeros(pipe.sys.size)
    for w, dw in tent.items():
        if not dw or not keep(w):
            continue
        for p in pipe.selectors:
            f = family.function(l, tower_index(p, n, w))
            out += float(dw) * np.asarray(f, dtype=np.float64)
    return out


def tower_identity(pipe: CpPipeline) -> dict:
    """
    Check `sum_w f_w = sum_w d(w) sum_p f_{s_p(w)}` pointwise, per level.
    Exact for rational families.
    """
    family, n = pipe.family, pipe.n
    tent = DiagonalWeight(n, pipe.m).exact()
    exact = family.exact
    gap = 0.0
    holds = True
    for l in range(family.L):
        lhs = family.values[l].sum(axis=0)
        rhs = np.zeros(pipe.sys.size, dtype=object if exact else np.float64)
        if exact:
            rhs.fill(Fraction(0))
        for w, dw in tent.items():
            if not dw:
                continue
            for p in pipe.selectors:
                f = family.function(l, tower_index(p, n, w))
                rhs = rhs + (dw if exact else float(dw)) * f
        diff = lhs - rhs
        level_gap = float(max(abs(x) for x in diff)) if len(diff) else 0.0
        gap = max(gap, level_gap)
        if exact:
            holds = holds and all(x == 0 for x in diff)
        else:
            holds = holds and level_gap <= SLACK
    return {'exact': exact, 'holds': holds, 'gap': gap}


def _oracle_gap(pipe: CpPipeline, x: BandOperator) -> float | None:
    sys, n = pipe.sys, pipe.n
    window = BoxWindow('J', n, sys.m)
    P = sys.size
    if len(window) * P > ORACLE_LIMIT:
        return None
    K = n + x.band_width
    outer = BoxWindow('J', K, sys.m)
    slots = np.array([outer.index(w) for w in window])
    index = (slots[:, None] * P + np.arange(P)[None, :]).reshape(-1)
    M = regular_matrix(sys, x, K)[index][:, index]
    root = np.repeat(np.sqrt(DiagonalWeight(n, sys.m).values()), P)
    weighted = sp.diags(root) @ M @ sp.diags(root)
    diff = (weighted - pipe.mu(x).to_sparse()).tocoo()
    return float(np.abs(diff.data).max()) if diff.nnz else 0.0


# ----------------------------------------------------------------------
# main entry point
# ----------------------------------------------------------------------


def _eps(sys: SampledSystem, pipe: CpPipeline) -> dict[str, float]:
    family = pipe.family
    tol = verify_tower_relations(sys, family)
    if family.provenance == 'sqrt':
        root = tol
    else:
        root = verify_tower_relations(sys, pipe.root)
    return {
        'eps1': float(tol.eps1),
        'eps2': float(tol.eps2),
        'eps3': float(tol.eps3),
        'sqrt_eps2': float(root.eps2),
        'sqrt_eps3': float(root.eps3),
    }


class _Budget:
    """
    Collects measured-vs-budget pairs.

    A binding quantity above its budget is a violation. A non-binding one
    is a requirement on the window `n` and is only listed in `unmet`.
    """

    def __init__(self, scope: str):
        self.scope = scope
        self.measured: dict = {}
        self.budget: dict = {}
        self.violations: list[dict] = []
        self.unmet: list[str] = []

    def check(self, name: str, value, budget: float, binding: bool = True) -> None:
        self.measured[name] = value
        self.budget[name] = budget
        if value is None or value <= budget + SLACK:
            return
        if not binding:
            self.unmet.append(name)
            return
        self.violations.append({
            'scope': self.scope,
            'quantity': name,
            'measured': value,
            'budget': budget,
        })


def _measure_op(
    pipe: CpPipeline,
    label: str,
    x: BandOperator,
    delta: float,
    eps: float,
    seedless: bool,
) -> dict:
    sys, n, N, m = pipe.sys, pipe.n, pipe.N, pipe.m
    tent = DiagonalWeight(n, m).exact()
    J_n, J_N = len(tent), (2 * N) ** m
    factor = pipe.levels * (pipe.inner.s + 1)
    budget = _Budget(label)
    for v in x.terms:
        if norm_inf(v) > N or any(c <= -N for c in v):
            raise ParameterError(f'Test operator {label} has a term outside J_{N}: {v}')

    tail = tower_sum = commutator = star = term = 0.0
    for v, a in x.pruned().terms.items():
        size = float(np.abs(a).max())
        for l in range(pipe.levels):
            values = _weighted_sum(pipe, l, tent, lambda w: sub(w, v) not in tent)
            tail = max(tail, float(values.max(initial=0.0)))
        covered = sum(
            _weighted_sum(pipe, l, tent, lambda w: sub(w, v) in tent)
            for l in range(pipe.levels)
        )
        tower_sum = max(tower_sum, float(np.abs(1 - covered).max()))
        if size == 0:
            continue
        estimate = commutator_sqrtD(sys, a, v, n)
        commutator = max(commutator, estimate.estimate / size)
        for (w1, w2), b in compress_psi(sys, BandOperator.single(sys, a, v), n).blocks.items():
            for l in range(pipe.levels):
                for p in pipe.selectors:
                    value = star_defect(
                        sys, pipe.family, l, p, w1, w2, b, root=pipe.root
                    )
                    star = max(star, value / size)
        single = BandOperator.single(sys, a, v)
        term = max(term, (single - pipe(single)).norm(seedless=seedless) / size)

    budget.check('tail', tail, 2 ** m * (delta / J_N + _tail_estimate(n, N, m)))
    budget.check(
        'tower_sum', tower_sum, 2 ** (m + 2) * pipe.levels * delta / J_N,
        binding=False,
    )
    budget.check('commutator', commutator, delta / J_n, binding=False)
    budget.check('star', star, 3 * eps)
    budget.check('term_defect', term, 2 ** (m + 3) * factor * delta)

    residual = x - pipe(x)
    scale = x.norm_upper() or 1.0
    # lower estimate of the norm (window J_K); `defect_upper` bounds it
    # from above
    budget.check(
        'defect', residual.norm(seedless=seedless) / scale,
        2 ** (m + 4) * factor * delta,
    )
    budget.measured['defect_upper'] = residual.norm_upper() / scale
    budget.check('oracle_gap', _oracle_gap(pipe, x), 1e-8)
    budget.measured['inner_tolerance'] = pipe.inner.tolerance(
        pipe.mu(x).blocks.values()
    )
    if not budget.violations:
        lg.debug(f'crossed: {label} within budget')
    else:
        for v in budget.violations:
            lg.warning(
                f"crossed: {label}: {v['quantity']} = {v['measured']:.4g} "
                f"exceeds {v['budget']:.4g}"
            )
    return {
        'label': label,
        'terms': [list(v) for v in sorted(x.terms)],
        'measured': budget.measured,
        'budget': budget.budget,
        'passed': not budget.violations,
        'unmet': budget.unmet,
        'violations': budget.violations,
    }


def _order_zero(pipe: CpPipeline, eps: float) -> dict:
    sys, n, m = pipe.sys, pipe.n, pipe.m
    J_n = (2 * n) ** m
    if J_n > ORDER_ZERO_SLOTS:
        return {'measured': None, 'budget': None, 'skipped': True}
    pairs = orthogonal_test_pairs(pipe.inner.dim(sys.size), n, m)
    worst = 0.0
    for l in range(pipe.levels):
        for p in pipe.selectors:
            def lifted(X, l=l, p=p):
                return sigma(sys, pipe.root, l, p, pipe.phi_n(X))
            worst = max(worst, order_zero_defect(lifted, pairs))
    return {
        'measured': worst,
        'budget': (J_n + 2) * J_n ** 3 * eps,
        'skipped': False,
    }


def pipeline_defect(
    sys: SampledSystem,
    family: TowerFamily,
    n: int,
    N: int,
    test_ops: Sequence[tuple[str, BandOperator]] | None = None,
    *,
    inner: InnerApproximation | None = None,
    delta_floor: float = 0.0,
    jobs: int = 1,
    seedless: bool = False,
    raise_on_failure: bool = False,
) -> PipelineReport:
    """
    Measure `||x - (sigma o phi_n o psi_n o mu)(x)||` for test operators

    Parameters
    ----------
    sys : SampledSystem
        System
    family : TowerFamily
        Tower family of side `2n` (normalized, ideally)
    n : int
        Window parameter of the compression
    N : int
        Support window of the test operators
    test_ops : list of (label, BandOperator), default=unit operators
        Test operators supported in `J_N`
    inner : InnerApproximation, default=IdentityApproximation()
        Approximation of the coefficient algebra

    Other Parameters
    ----------------
    delta_floor : float
        Floor of `delta = max(3 |J_n| |J_N| eps, delta_floor)`
    jobs : int
        Test operators measured concurrently
    seedless : bool
        Deterministic start vectors in norm estimates
    raise_on_failure : bool
        Raise `BudgetExceededError` instead of returning a failed report

    Returns
    -------
    PipelineReport
    """
    pipe = CpPipeline(sys, family, n, N, inner)
    if test_ops is None:
        test_ops = make_test_ops(sys, N, 'unit')
    m = sys.m

    eps_terms = _eps(sys, pipe)
    eps = max(eps_terms.values())
    root = DiagonalWeight(n, m).sqrt()
    J_n, J_N = (2 * n) ** m, (2 * N) ** m
    test_ops = list(test_ops)

    delta_terms = {
        'epsilon': 3 * J_n * J_N * eps,
        'floor': float(delta_floor),
    }
    binding = max(delta_terms, key=delta_terms.get)
    delta = delta_terms[binding]
    lg.info(
        f'crossed: n={n}, N={N}, eps={eps:.4g}, delta={delta:.4g} ({binding})'
    )

    report = PipelineReport(
        n, N, m, pipe.levels, pipe.inner.s, eps, eps_terms,
        delta, delta_terms, binding, pipe.inner.to_json(),
    )
    root_gap = max(_root_gap(root, v) for v in BoxWindow('J', N, m))
    report.conditions = {
        'tail': _condition(_tail_estimate(n, N, m), delta / J_N),
        'commutator': _condition(root_gap, delta / J_n),
    }
    unmet = [k for k, c in report.conditions.items() if not c['met']]
    if unmet:
        lg.info(
            f'crossed: n={n} is too small for delta={delta:.4g} '
            f'({", ".join(unmet)})'
        )
    report.tower_identity = tower_identity(pipe)
    if not report.tower_identity['holds']:
        report.violations.append({
            'scope': 'towers',
            'quantity': 'tower_identity',
            'measured': report.tower_identity['gap'],
            'budget': 0.0,
        })

    def measure(item):
        label, x = item
        return _measure_op(pipe, label, x, delta, eps, seedless)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            report.ops = list(pool.map(measure, test_ops))
    else:
        report.ops = [measure(item) for item in test_ops]
    for op in report.ops:
        report.violations.extend(op['violations'])

    report.order_zero = _order_zero(pipe, eps)
    oz = report.order_zero
    if not oz['skipped'] and oz['measured'] > oz['budget'] + SLACK:
        report.violations.append({
            'scope': 'maps',
            'quantity': 'order_zero',
            'measured': oz['measured'],
            'budget': oz['budget'],
        })

    if report.passed:
        lg.info(f'crossed: {len(report.ops)} test operators within budget')
    elif raise_on_failure:
        raise BudgetExceededError(
            f'{len(report.violations)} quantities exceed their budget',
            witness=report.violations[0],
        )
    return report

"""Capacity on a fixed constellation shape under an average-power budget.

The budget binds either the first moment of the transmitted intensity
(square-law detection) or the second moment of the field (coherent AWGN).
For a scale factor ``l`` the channel is built on ``l * base_support`` and a
Lagrange-tilted Blahut-Arimoto iteration

    p'(x) ∝ p(x) 2**D(p(y|x) || p(y)) 2**(mu c(x))

is run, with ``mu <= 0`` picked every step so the updated law spends exactly
the budget (or ``mu = 0`` when the budget is slack). An outer scan over ``l``
picks the best scaling.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import distributions
from ._numerics import golden_section_max, solve_tilt, tilted_moment
from .blahut_arimoto import (
    LN2,
    BaConfig,
    SolverReport,
    _Kernel,
    check_pmf,
    clean_pmf,
    mutual_information,
)
from .channels import DEFAULT_BINS, TransitionMatrix, check_support, discretize, normalize_law
from .errors import ConfigurationError, ConvergenceError, InfeasibleConstraintError

# Relative slack when deciding that a budget is exactly met.
BUDGET_RTOL = 1e-12
# Uniform mass blended into warm starts so levels dropped at a neighbouring
# scale can regrow without thousands of multiplicative steps.
WARM_MIX = 1e-3


@dataclass(frozen=True)
class MomentConstraint:
    order: int
    p_ave: float

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("moment order must be 1 or 2")
        if not (np.isfinite(self.p_ave) and self.p_ave > 0):
            raise ValueError("p_ave must be positive")

    def cost(self, x):
        x = np.asarray(x, dtype=float)
        return x if self.order == 1 else x**2

    def moment(self, pmf, x):
        return float(np.asarray(pmf) @ self.cost(x))

    def unit_scale(self, base_support):
        """Scale ``l0`` at which the uniform law on ``l0 * base_support`` spends the budget."""
        c = self.cost(base_support).mean()
        return self.p_ave / c if self.order == 1 else float(np.sqrt(self.p_ave / c))


@dataclass(frozen=True)
class ScalingSweep:
    l_min: float
    l_max: float
    dl: float
    anchor: float = None

    def __post_init__(self):
        if not 0 < self.l_min < self.l_max:
            raise ValueError("need 0 < l_min < l_max")
        if not self.dl > 0:
            raise ValueError("dl must be positive")

    @classmethod
    def around(cls, l0, lo=0.2, hi=3.0, points=60):
        return cls(lo * l0, hi * l0, (hi - lo) * l0 / (points - 1), anchor=l0)

    def values(self):
        n = int(round((self.l_max - self.l_min) / self.dl)) + 1
        ls = np.linspace(self.l_min, self.l_min + (n - 1) * self.dl, n)
        if self.anchor is not None and self.l_min <= self.anchor <= self.l_max:
            ls = np.union1d(ls, [self.anchor])
        return ls

    def widened(self, side):
        span = self.l_max - self.l_min
        if side == "low":
            return ScalingSweep(self.l_min / 4.0, self.l_max, self.dl / 2.0, self.anchor)
        return ScalingSweep(self.l_min, self.l_max + 2.0 * span, self.dl * 2.0, self.anchor)


@dataclass(frozen=True, eq=False)
class ApcSolve:
    """Result at one scale factor."""

    l: float
    support: np.ndarray
    pmf: np.ndarray
    mi: float
    mu: float
    moment: float
    report: SolverReport
    dominated: bool = False


@dataclass(frozen=True, eq=False)
class ApcReport:
    capacity: float
    best_l: float
    pmf: np.ndarray
    mu: float
    support: np.ndarray
    per_l_trace: np.ndarray
    constraint: MomentConstraint
    capacity_upper: float = None
    best: ApcSolve = field(default=None, repr=False)

    def __post_init__(self):
        trace = np.asarray(self.per_l_trace, dtype=float)
        if trace.size and np.nanmax(trace[:, 1]) > self.capacity + 1e-9:
            raise ValueError("capacity is below a swept MI value")


def _levels(channel):
    if isinstance(channel, TransitionMatrix):
        return channel.support
    raise TypeError("a TransitionMatrix with its support is required")


def _mu_bits(log_base, cost, p_ave, guess=0.0):
    """Clamped tilt in bits: 0 when the untilted law is within budget."""
    if tilted_moment(log_base, cost, 0.0) <= p_ave * (1 + BUDGET_RTOL):
        return 0.0
    return min(solve_tilt(log_base, cost, p_ave, guess * LN2) / LN2, 0.0)


def tilted_ba_step(pmf, channel, mu, constraint):
    """One update ``p'(x) ∝ p(x) 2**D_x 2**(mu c(x))`` on the channel's own levels."""
    kern = _Kernel(channel)
    p = check_pmf(pmf, kern.w.shape[0])
    if not np.isfinite(mu):
        raise ValueError("mu must be finite")
    c = constraint.cost(_levels(channel))
    with np.errstate(divide="ignore"):
        z = np.log(p) + LN2 * (kern.kl(p) + mu * c)
    z -= np.max(z)
    q = np.exp(z)
    return q / q.sum()


def solve_mu(pmf, channel, constraint):
    """Tilt ``mu`` (bits) making the next tilted update spend exactly ``p_ave``.

    The tilted moment is strictly increasing in ``mu``; the root is bracketed
    and solved by safeguarded Newton in ``_numerics.solve_tilt``. Raises
    :class:`InfeasibleConstraintError` when ``p_ave`` lies outside the range
    of costs on the levels.
    """
    kern = _Kernel(channel)
    p = check_pmf(pmf, kern.w.shape[0])
    c = constraint.cost(_levels(channel))
    with np.errstate(divide="ignore"):
        log_base = np.log(p) + LN2 * kern.kl(p)
    return solve_tilt(log_base, c, constraint.p_ave) / LN2


def _feasible_start(p, cost, p_ave):
    if p @ cost <= p_ave * (1 + BUDGET_RTOL):
        return p
    with np.errstate(divide="ignore"):
        log_p = np.log(p)
    theta = solve_tilt(log_p, cost, p_ave)
    z = log_p + theta * cost
    q = np.exp(z - np.max(z))
    return q / q.sum()


def apc_ba_solve(law, base_support, l, params, constraint, config=None, *, init=None,
                 bins=DEFAULT_BINS, stop_below=None):
    """Budget-constrained BA on the scaled constellation ``l * base_support``.

    Convergence is declared on the Lagrangian bound
    ``max_j [D_j + mu (c_j - p_ave)] - I(p) <= tol_bits``, which is a valid
    capacity upper bound for any ``mu <= 0``. With ``stop_below`` the run also
    ends, flagged ``dominated``, once that bound drops below the given rate.
    """
    config = config or BaConfig()
    law = normalize_law(law)
    base = check_support(base_support)
    if not l > 0:
        raise ValueError("scale factor must be positive")
    x = l * base
    cost = constraint.cost(x)
    p_ave = constraint.p_ave
    if cost.min() > p_ave * (1 + BUDGET_RTOL):
        raise InfeasibleConstraintError(p_ave, float(cost.min()), float(cost.max()))
    channel = discretize(law, x, params, bins=bins)
    kern = _Kernel(channel)
    m = x.size

    if init is None:
        p = np.full(m, 1.0 / m)
    else:
        p = (1.0 - WARM_MIX) * check_pmf(init, m) + WARM_MIX / m
    p = np.maximum(p, config.zero_floor)
    p = _feasible_start(p / p.sum(), cost, p_ave)

    trace = []
    converged = False
    dominated = False
    it = 0
    mu = 0.0
    while True:
        d = kern.kl(p)
        lower = float(p @ d)
        with np.errstate(divide="ignore"):
            log_base = np.log(p) + LN2 * d
        mu = _mu_bits(log_base, cost, p_ave, mu)
        upper = float(np.max(d + mu * (cost - p_ave)))
        trace.append(lower)
        if upper - lower <= config.tol_bits:
            converged = True
            break
        if stop_below is not None and upper < stop_below:
            dominated = True
            break
        if it >= config.max_iters:
            break
        z = log_base + LN2 * mu * cost
        p = np.exp(z - np.max(z))
        p = np.maximum(p / p.sum(), config.zero_floor)
        p /= p.sum()
        it += 1

    out = clean_pmf(p)
    d = kern.kl(out)
    live = out > 0
    lower = float(out[live] @ d[live])
    upper = float(np.max(d + mu * (cost - p_ave)))
    report = SolverReport(
        capacity_lower=lower,
        capacity_upper=max(upper, lower),
        pmf=out,
        iterations=it,
        mi_trace=np.array(trace),
        converged=converged and upper - lower <= config.tol_bits,
        tol_bits=config.tol_bits,
        support=x,
    )
    return ApcSolve(float(l), x, out, lower, float(mu), constraint.moment(out, x), report,
                    dominated and not report.converged)


def default_base_support(m, coherent=False):
    """``0..m-1`` for intensity levels, ``±1, ±3, ...`` for bipolar fields."""
    m = int(m)
    if coherent:
        if m < 2 or m % 2:
            raise ValueError("bipolar PAM needs an even number of levels")
        return np.arange(-(m - 1), m, 2, dtype=float)
    return np.arange(m, dtype=float)


def _scan(evaluate, sweep, refine):
    """Evaluate over the sweep grid with optional golden refinement.

    ``evaluate(l, init)`` returns ``(mi, state)`` or raises
    :class:`InfeasibleConstraintError`. Returns the per-l trace and the best
    ``(l, mi, state)``. Boundary maxima trigger one widened retry.
    """
    for attempt in range(2):
        ls = sweep.values()
        trace, states = [], []
        prev = None
        for l in ls:
            try:
                v, st = evaluate(l, prev)
                prev = st
            except InfeasibleConstraintError:
                v, st = -np.inf, None
            trace.append(v)
            states.append(st)
        vals = np.array(trace)
        if not np.any(np.isfinite(vals)):
            raise ConfigurationError("no scale factor in the sweep meets the power budget")
        k = int(np.argmax(vals))
        at_low = k == 0
        at_high = k == len(ls) - 1
        if not (at_low or at_high):
            break
        side = "low" if at_low else "high"
        if attempt == 0:
            warnings.warn(f"best scale factor at the {side} end of the sweep; widening", stacklevel=3)
            sweep = sweep.widened(side)
        else:
            raise ConvergenceError(
                f"best scale factor stays at the {side} end of the widened sweep "
                f"[{sweep.l_min:.6g}, {sweep.l_max:.6g}]"
            )
    best_l, best_v, best_st = ls[k], vals[k], states[k]
    extra = []
    if refine:
        a = ls[k - 1] if k > 0 and np.isfinite(vals[k - 1]) else ls[k]
        b = ls[k + 1] if k + 1 < len(ls) and np.isfinite(vals[k + 1]) else ls[k]
        cache = {}

        def f(l):
            try:
                v, st = evaluate(l, best_st)
            except InfeasibleConstraintError:
                return -np.inf
            cache[l] = (v, st)
            extra.append((l, v))
            return v

        if b > a:
            l_star, v_star = golden_section_max(f, a, b, tol=sweep.dl / 100.0)
            if v_star > best_v and l_star in cache:
                best_l, best_v, best_st = l_star, v_star, cache[l_star][1]
    rows = sorted(list(zip(ls, vals)) + extra)
    return np.array(rows, dtype=float), (float(best_l), float(best_v), best_st)


def apc_capacity(law, base_support, params, constraint, sweep=None, config=None, *,
                 refine=True, bins=DEFAULT_BINS):
    """Best MI over scalings of ``base_support`` under the moment budget."""
    config = config or BaConfig()
    base = check_support(base_support)
    if sweep is None:
        sweep = ScalingSweep.around(constraint.unit_scale(base))

    floor, _ = uniform_mi(law, base, params, constraint, bins)
    best_so_far = [floor]

    def evaluate(l, prev):
        init = None if prev is None else prev.pmf
        res = apc_ba_solve(law, base, l, params, constraint, config, init=init, bins=bins,
                           stop_below=best_so_far[0])
        if not (res.report.converged or res.dominated):
            raise ConvergenceError(
                f"tilted BA did not converge at l={l:.6g} (gap {res.report.gap:.3g} bits)"
            )
        if res.report.converged:
            best_so_far[0] = max(best_so_far[0], res.mi)
        return res.mi, res

    trace, (best_l, best_v, best) = _scan(evaluate, sweep, refine)
    return ApcReport(
        capacity=best_v,
        best_l=best_l,
        pmf=best.pmf,
        mu=best.mu,
        support=best.support,
        per_l_trace=trace,
        constraint=constraint,
        capacity_upper=best.report.capacity_upper,
        best=best,
    )


@dataclass(frozen=True, eq=False)
class BaselineReport:
    family: str
    mi: float
    best_l: float
    pmf: np.ndarray
    support: np.ndarray
    entropy: float
    per_l_trace: np.ndarray


def baseline_pmf(family, support, constraint):
    """Member of ``family`` on ``support`` spending exactly the budget."""
    p_ave = constraint.p_ave
    if family == "exponential":
        return distributions.discrete_exponential_pmf(support, p_ave)
    if family == "pairwise_exponential":
        x = np.asarray(support, dtype=float)
        return distributions.pairwise_exponential_pmf(x.size, p_ave, levels=x)
    if family == "gaussian":
        return distributions.discrete_gaussian_pmf(support, target_second_moment=p_ave)
    if family == "uniform":
        return distributions.uniform_pmf(len(support), support)
    raise ValueError(f"unknown family {family!r}")


def uniform_mi(law, base_support, params, constraint, bins=DEFAULT_BINS):
    """MI of uniform signalling scaled to spend the budget exactly."""
    base = check_support(base_support)
    l0 = constraint.unit_scale(base)
    ch = discretize(law, l0 * base, params, bins=bins)
    return mutual_information(np.full(base.size, 1.0 / base.size), ch), l0


def best_baseline(family, law, base_support, params, constraint, sweep=None, *,
                  refine=True, bins=DEFAULT_BINS):
    """Baseline MI with its free parameter tuned: scale ``l`` swept, shape set by the budget.

    Uniform signalling has no free shape parameter and is evaluated at ``l0``.
    """
    base = check_support(base_support)
    l0 = constraint.unit_scale(base)
    if family == "uniform":
        mi, _ = uniform_mi(law, base, params, constraint, bins)
        pmf = np.full(base.size, 1.0 / base.size)
        return BaselineReport(family, mi, l0, pmf, l0 * base, float(np.log2(base.size)),
                              np.array([[l0, mi]]))
    if sweep is None:
        sweep = ScalingSweep.around(l0)

    def evaluate(l, prev):
        x = l * base
        if family == "pairwise_exponential":
            lo, hi = distributions.pairwise_mean_range(x)
            if not lo < constraint.p_ave < hi:
                raise InfeasibleConstraintError(constraint.p_ave, lo, hi)
        named = baseline_pmf(family, x, constraint)
        ch = discretize(law, x, params, bins=bins)
        return mutual_information(named.pmf, ch), named

    trace, (best_l, best_v, named) = _scan(evaluate, sweep, refine)
    return BaselineReport(family, best_v, best_l, named.pmf, best_l * base, named.entropy, trace)


def shaping_gain(law, base_support, params, constraint, sweep=None, config=None, *,
                 bins=DEFAULT_BINS):
    """``C - MI(uniform)`` on the same base constellation and budget."""
    rep = apc_capacity(law, base_support, params, constraint, sweep, config, bins=bins)
    u, _ = uniform_mi(law, base_support, params, constraint, bins)
    return rep.capacity - u, rep

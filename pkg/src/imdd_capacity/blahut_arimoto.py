"""Blahut-Arimoto iteration for a fixed discrete input support.

Every solve tracks the capacity sandwich

    I(p) <= C <= max_j D(W_j || p W)

and stops once the gap is below ``tol_bits``.
"""

from dataclasses import dataclass, field

import numpy as np

from .channels import TransitionMatrix

LN2 = np.log(2.0)
REPORT_ZERO = 1e-12
# Slack for floating-point noise when asserting that the MI trace never drops.
TRACE_SLACK = 1e-12


def check_pmf(pmf, size=None):
    p = np.atleast_1d(np.asarray(pmf, dtype=float))
    if p.ndim != 1:
        raise ValueError("a pmf must be one-dimensional")
    if size is not None and p.size != size:
        raise ValueError(f"pmf has {p.size} entries but the channel has {size} inputs")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("pmf entries must be finite and nonnegative")
    if abs(p.sum() - 1.0) > 1e-12 * max(1, p.size):
        raise ValueError(f"pmf must sum to 1, sums to {p.sum()!r}")
    return p


def _rows(channel):
    if isinstance(channel, TransitionMatrix):
        return channel.rows
    w = np.asarray(channel, dtype=float)
    if w.ndim != 2:
        raise ValueError("a channel must be a 2-D row-stochastic matrix")
    return w


class _Kernel:
    """Channel rows with their conditional entropies cached for repeated KL sums."""

    def __init__(self, channel):
        self.w = _rows(channel)
        with np.errstate(divide="ignore", invalid="ignore"):
            wlogw = np.where(self.w > 0, self.w * np.log2(self.w), 0.0)
        self.neg_entropy = wlogw.sum(axis=1)

    def kl(self, p):
        py = p @ self.w
        positive = py > 0
        log_py = np.zeros_like(py)
        log_py[positive] = np.log2(py[positive])
        d = self.neg_entropy - self.w @ log_py
        # Outputs unreachable under p but reachable from some row make its KL infinite.
        dead = ~positive
        if np.any(dead):
            hits = self.w[:, dead].sum(axis=1) > 0
            d = np.where(hits, np.inf, d)
        return d


def kl_rows(pmf, channel):
    """Per-input divergence ``D(p(y|x_j) || p(y))`` in bits."""
    w = _rows(channel)
    p = check_pmf(pmf, w.shape[0])
    return _Kernel(w).kl(p)


def mutual_information(pmf, channel):
    """``I(X;Y)`` in bits; terms with zero input probability contribute nothing."""
    w = _rows(channel)
    p = check_pmf(pmf, w.shape[0])
    d = _Kernel(w).kl(p)
    live = p > 0
    return float(p[live] @ d[live])


def _tilt(p, d, extra=0.0):
    """``p * 2**(d + extra)`` normalized, evaluated in the log domain."""
    with np.errstate(divide="ignore"):
        z = np.log(p) + LN2 * (d + extra)
    z = z - np.max(z)
    q = np.exp(z)
    return q / q.sum()


def ba_step(pmf, channel):
    """One multiplicative update ``p'(x) ∝ p(x) 2**D(p(y|x) || p(y))``."""
    w = _rows(channel)
    p = check_pmf(pmf, w.shape[0])
    return _tilt(p, _Kernel(w).kl(p))


@dataclass(frozen=True)
class BaConfig:
    tol_bits: float = 1e-6
    max_iters: int = 200_000
    zero_floor: float = 1e-300

    def __post_init__(self):
        if not self.tol_bits > 0:
            raise ValueError("tol_bits must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 <= self.zero_floor < 1e-6:
            raise ValueError("zero_floor must lie in [0, 1e-6)")


@dataclass(frozen=True, eq=False)
class SolverReport:
    capacity_lower: float
    capacity_upper: float
    pmf: np.ndarray
    iterations: int
    mi_trace: np.ndarray
    converged: bool
    tol_bits: float
    support: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.capacity_lower > self.capacity_upper + TRACE_SLACK:
            raise ValueError("capacity lower bound exceeds the upper bound")
        trace = np.asarray(self.mi_trace, dtype=float)
        if trace.size > 1 and np.min(np.diff(trace)) < -TRACE_SLACK:
            raise ValueError("mutual information decreased between iterations")
        if self.converged and self.gap > self.tol_bits:
            raise ValueError("report flagged converged with a gap above tolerance")

    @property
    def gap(self):
        return self.capacity_upper - self.capacity_lower

    @property
    def capacity(self):
        return self.capacity_lower


def clean_pmf(p, threshold=REPORT_ZERO):
    """Zero out entries below ``threshold`` and renormalize."""
    p = np.where(p < threshold, 0.0, p)
    return p / p.sum()


def ba_solve(channel, config=None, init=None):
    """Blahut-Arimoto capacity of ``channel`` with lower/upper bound tracking.

    Exhausting ``max_iters`` returns a report with ``converged=False`` and the
    best bounds reached.
    """
    config = config or BaConfig()
    kern = _Kernel(channel)
    m = kern.w.shape[0]
    p = np.full(m, 1.0 / m) if init is None else check_pmf(init, m).copy()
    p = np.maximum(p, config.zero_floor)
    p /= p.sum()

    trace = []
    converged = False
    it = 0
    while True:
        d = kern.kl(p)
        lower = float(p @ d)
        upper = float(np.max(d))
        trace.append(lower)
        if upper - lower <= config.tol_bits:
            converged = True
            break
        if it >= config.max_iters:
            break
        p = np.maximum(_tilt(p, d), config.zero_floor)
        p /= p.sum()
        it += 1

    out = clean_pmf(p)
    d = kern.kl(out)
    live = out > 0
    lower = float(out[live] @ d[live])
    upper = float(np.max(d))
    support = channel.support if isinstance(channel, TransitionMatrix) else None
    return SolverReport(
        capacity_lower=lower,
        capacity_upper=max(upper, lower),
        pmf=out,
        iterations=it,
        mi_trace=np.array(trace),
        converged=converged and upper - lower <= config.tol_bits,
        tol_bits=config.tol_bits,
        support=support,
    )

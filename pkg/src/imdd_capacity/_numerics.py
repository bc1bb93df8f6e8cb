"""Small numerical helpers shared by the solver modules."""

import math

import numpy as np
from scipy.special import ndtr

from .errors import InfeasibleConstraintError

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def gaussian_interval_mass(lo, hi):
    """P(lo < Z <= hi) for standard normal Z, without cancellation in the tails."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    upper_tail = ndtr(-lo) - ndtr(-hi)
    lower_tail = ndtr(hi) - ndtr(lo)
    return np.where(lo > 0.0, upper_tail, lower_tail)


def golden_section_max(f, a, b, tol=1e-9):
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``.

    The best point ever evaluated is returned, including the endpoints, so a
    monotone ``f`` yields the better endpoint.
    """
    a, b = float(min(a, b)), float(max(a, b))
    best_x, best_f = a, f(a)
    fb = f(b)
    if fb > best_f:
        best_x, best_f = b, fb
    h = b - a
    if h <= tol:
        return best_x, best_f
    c = b - INV_PHI * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            h = b - a
            c = b - INV_PHI * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = f(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def tilted_weights(log_base, values, theta):
    """Normalized weights proportional to ``exp(log_base + theta * values)``."""
    z = log_base + theta * values
    w = np.exp(z - np.max(z))
    return w / w.sum()


def tilted_moment(log_base, values, theta):
    return float(tilted_weights(log_base, values, theta) @ values)


def _mean_var(log_base, values, theta):
    w = tilted_weights(log_base, values, theta)
    m = float(w @ values)
    return m, float(w @ (values - m) ** 2)


def solve_tilt(log_base, values, target, guess=0.0):
    """Natural-log tilt ``theta`` whose tilted mean of ``values`` equals ``target``.

    The tilted mean is strictly increasing in ``theta`` (its derivative is the
    tilted variance), so the root is unique whenever
    ``min(values) < target < max(values)`` over entries with finite weight.
    Newton steps from ``guess`` are kept inside a bracket that is grown by
    doubling and shrunk by bisection whenever Newton leaves it.
    """
    log_base = np.asarray(log_base, dtype=float)
    values = np.asarray(values, dtype=float)
    alive = np.isfinite(log_base)
    lo_v, hi_v = float(values[alive].min()), float(values[alive].max())
    scale = max(abs(lo_v), abs(hi_v), 1e-300)
    if hi_v - lo_v <= 1e-14 * scale:
        if abs(target - lo_v) <= 1e-12 * max(scale, abs(target)):
            return 0.0
        raise InfeasibleConstraintError(target, lo_v, hi_v)
    if not lo_v < target < hi_v:
        raise InfeasibleConstraintError(target, lo_v, hi_v)

    ftol = 4.0 * np.finfo(float).eps * max(scale, abs(target))
    lo, hi = -np.inf, np.inf
    theta = float(guess)
    width = 1.0 / (hi_v - lo_v)
    for _ in range(400):
        m, var = _mean_var(log_base, values, theta)
        err = m - target
        if abs(err) <= ftol:
            return theta
        if err < 0:
            lo = theta
        else:
            hi = theta
        nxt = theta - err / var if var > 0 else np.nan
        if not lo < nxt < hi:
            if np.isinf(hi):
                nxt = theta + width
                width *= 2.0
            elif np.isinf(lo):
                nxt = theta - width
                width *= 2.0
            else:
                nxt = 0.5 * (lo + hi)
        if nxt == theta or (np.isfinite(lo) and np.isfinite(hi) and hi - lo <= 4e-16 * max(1.0, abs(theta))):
            return theta
        theta = nxt
    raise InfeasibleConstraintError(target, lo_v, hi_v)

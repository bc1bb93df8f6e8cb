"""Baseline input distributions and closed-form shaping-gain arithmetic."""

from dataclasses import dataclass, field

import numpy as np

from ._numerics import solve_tilt, tilted_weights
from .channels import check_support

FAMILIES = ("uniform", "gaussian", "exponential", "pairwise_exponential")


def entropy_bits(pmf):
    p = np.asarray(pmf, dtype=float)
    p = p[p > 0]
    return float(-(p @ np.log2(p)))


@dataclass(frozen=True, eq=False)
class NamedPmf:
    family: str
    pmf: np.ndarray
    family_params: dict = field(default_factory=dict)
    support: np.ndarray = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        p = np.asarray(self.pmf, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("not a valid pmf")
        object.__setattr__(self, "pmf", p)

    @property
    def entropy(self):
        return entropy_bits(self.pmf)

    def moment(self, order=1):
        if self.support is None:
            raise ValueError("pmf has no attached support")
        return float(self.pmf @ self.support**order)


def uniform_pmf(m, support=None):
    m = int(m)
    if m < 1:
        raise ValueError("a uniform pmf needs at least one point")
    return NamedPmf("uniform", np.full(m, 1.0 / m), {}, support)


def discrete_gaussian_pmf(support, variance_param=None, *, target_second_moment=None):
    """Maxwell-Boltzmann pmf ``p_k ∝ exp(-x_k**2 / (2 * variance_param))``.

    Give either ``variance_param`` directly or ``target_second_moment``, in
    which case the parameter is found by a monotone root search.
    """
    x = check_support(support)
    if (variance_param is None) == (target_second_moment is None):
        raise ValueError("give exactly one of variance_param or target_second_moment")
    x2 = x**2
    if variance_param is None:
        theta = solve_tilt(np.zeros_like(x), x2, target_second_moment)
        variance_param = np.inf if theta == 0 else -1.0 / (2.0 * theta)
    elif not variance_param > 0:
        raise ValueError("variance_param must be positive")
    theta = 0.0 if np.isinf(variance_param) else -1.0 / (2.0 * variance_param)
    p = tilted_weights(np.zeros_like(x), x2, theta)
    return NamedPmf("gaussian", p, {"variance_param": float(variance_param)}, x)


def discrete_exponential_pmf(support, target_mean):
    """Maximum-entropy pmf ``p_k ∝ exp(theta * x_k)`` with mean ``target_mean``."""
    x = check_support(support, nonnegative=True)
    theta = solve_tilt(np.zeros_like(x), x, target_mean)
    p = tilted_weights(np.zeros_like(x), x, theta)
    return NamedPmf("exponential", p, {"theta": theta}, x)


def pairwise_exponential_pmf(m, target_mean, levels=None):
    """Exponential law over symbol pairs, split evenly inside each pair.

    The ``m`` levels (default ``0..m-1``) are grouped as ``(0,1), (2,3), ...``;
    each pair acts as one super-symbol at its midpoint. A discrete exponential
    over the super-symbols meets ``target_mean``; each member then receives
    half of its pair's probability. In a PAS-style mapping the super-symbol
    carries the Gray-labelled shaped bits and the member index one uniform bit.
    """
    m = int(m)
    if m < 2 or m % 2:
        raise ValueError("pairwise shaping needs an even number of levels")
    x = check_support(np.arange(m, dtype=float) if levels is None else levels, nonnegative=True)
    if x.size != m:
        raise ValueError("levels must have m entries")
    mids = 0.5 * (x[0::2] + x[1::2])
    super_pmf = discrete_exponential_pmf(mids, target_mean)
    p = np.repeat(super_pmf.pmf / 2.0, 2)
    return NamedPmf(
        "pairwise_exponential",
        p,
        {"theta": super_pmf.family_params["theta"], "labeling": "gray"},
        x,
    )


def pairwise_mean_range(levels):
    x = np.asarray(levels, dtype=float)
    mids = 0.5 * (x[0::2] + x[1::2])
    return float(mids[0]), float(mids[-1])


def continuous_entropy(family, p_ave):
    """Differential entropy in bits of the max-entropy law with first moment ``p_ave``.

    ``uniform_on_0A``: uniform on ``[0, 2 p_ave]``. ``exponential_mean``:
    exponential with mean ``p_ave``.
    """
    if not p_ave > 0:
        raise ValueError("p_ave must be positive")
    if family == "uniform_on_0A":
        return float(np.log2(2.0 * p_ave))
    if family == "exponential_mean":
        return float(np.log2(np.e * p_ave))
    raise ValueError(f"unknown family {family!r}")


def entropy_gain_to_db(delta_h, constraint_order):
    """Convert an entropy advantage in bits into a power saving in dB.

    Under a first-moment budget the max entropy grows as ``log2(P)``, so one
    bit is worth a factor 2 in power; under a second-moment budget it grows as
    ``0.5 * log2(P)`` and one bit is worth a factor 4.
    """
    if constraint_order == 1:
        return 10.0 * np.log10(2.0) * delta_h
    if constraint_order == 2:
        return 20.0 * np.log10(2.0) * delta_h
    raise ValueError("constraint_order must be 1 or 2")

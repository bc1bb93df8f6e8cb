"""Continuous channel laws and their discretization into transition matrices.

Three conditional laws are supported:

``awgn``
    ``Y = X + Z`` with ``Z ~ N(0, sigma2)``. Used for coherent (bipolar) PAM
    and for peak-limited intensity links without optical amplification.
``chi2``
    ``Y = |sqrt(X) + Z|**2`` with real ``Z ~ N(0, sigma2)``: square-law
    detection of an amplified field. Non-central chi-square with one degree of
    freedom, scaled by ``sigma2``.
``chi2_approx``
    Gaussian with mean ``x`` and variance ``2 * x * sigma2`` (signal-ASE beat
    approximation of the square-law channel).

Signal-to-noise conventions used throughout the package:

* PSNR (peak-limited links) is ``P_peak / sigma2`` with ``P_peak = 1``.
* SNR (average-power links) is ``P_ave / sigma2``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._numerics import gaussian_interval_mass
from .errors import ConfigurationError

LAWS = ("awgn", "chi2", "chi2_approx")

PSNR_CONVENTION = "PSNR = P_peak / sigma^2 with P_peak = 1"
SNR_CONVENTION = "SNR = P_ave / sigma^2"

DEFAULT_BINS = 2048
MAX_LEAKAGE = 1e-6

_LOG_2PI = np.log(2.0 * np.pi)


def normalize_law(law):
    name = str(law).strip().lower().replace("-", "_")
    if name not in LAWS:
        raise ConfigurationError(f"unknown channel law {law!r}; expected one of {LAWS}")
    return name


@dataclass(frozen=True)
class NoiseParams:
    sigma2: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValueError(f"sigma2 must be positive and finite, got {self.sigma2!r}")

    @property
    def sigma(self):
        return float(np.sqrt(self.sigma2))

    @classmethod
    def from_snr_db(cls, snr_db, signal_power=1.0):
        """Noise variance giving ``signal_power / sigma2 = 10**(snr_db / 10)``."""
        return cls(float(signal_power) / 10.0 ** (float(snr_db) / 10.0))


def check_support(points, nonnegative=False):
    """Validate an input constellation and return it as a float array."""
    x = np.atleast_1d(np.asarray(points, dtype=float))
    if x.ndim != 1 or x.size == 0:
        raise ValueError("support must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError("support points must be finite")
    if np.any(np.diff(x) <= 0):
        raise ValueError("support points must be strictly increasing")
    if nonnegative and x[0] < 0:
        raise ValueError("intensity support points must be nonnegative")
    return x


@dataclass(frozen=True, eq=False)
class OutputGrid:
    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 3:
            raise ValueError("an output grid needs at least two bins")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("grid edges must be strictly increasing")
        object.__setattr__(self, "edges", edges)

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def n_bins(self):
        return self.edges.size - 1

    @classmethod
    def uniform(cls, lo, hi, bins=DEFAULT_BINS):
        return cls(np.linspace(lo, hi, int(bins) + 1))


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row ``j``, column ``k`` holds ``P(Y in bin k | X = support[j])``."""

    rows: np.ndarray
    grid: OutputGrid
    support: np.ndarray
    law: str = "awgn"
    params: NoiseParams = None
    leakage: np.ndarray = field(default=None)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.shape != (len(self.support), self.grid.n_bins):
            raise ValueError(
                f"rows have shape {rows.shape}, expected "
                f"{(len(self.support), self.grid.n_bins)}"
            )
        if np.any(rows < 0):
            raise ValueError("transition probabilities must be nonnegative")
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("transition matrix rows must sum to 1")
        object.__setattr__(self, "rows", rows)

    @property
    def shape(self):
        return self.rows.shape


def awgn_density(y, x, params):
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.exp(-((y - x) ** 2) / (2.0 * params.sigma2) - 0.5 * (_LOG_2PI + np.log(params.sigma2)))


def _log_cosh(z):
    z = np.abs(z)
    return z + np.log1p(np.exp(-2.0 * z)) - np.log(2.0)


def chi2_density(y, x, params):
    """Density of ``|sqrt(x) + Z|**2``, ``Z ~ N(0, sigma2)``.

    Uses ``I_{-1/2}(z) = sqrt(2 / (pi z)) cosh(z)`` in the log domain, and the
    central form ``exp(-y / 2 sigma2) / sqrt(2 pi sigma2 y)`` at ``x = 0``.
    The density is infinite at ``y = 0``.
    """
    y, x = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(x, dtype=float))
    if np.any(y < 0) or np.any(x < 0):
        raise ValueError("chi2 law is defined for nonnegative y and x only")
    s2 = params.sigma2
    out = np.empty(y.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        central = x == 0
        yc = y[central]
        out[central] = np.exp(-yc / (2 * s2) - 0.5 * (_LOG_2PI + np.log(s2 * yc)))
        nc = ~central
        yn, xn = y[nc], x[nc]
        z = np.sqrt(xn * yn) / s2
        log_pdf = (
            -np.log(2 * s2)
            - 0.25 * (np.log(yn) - np.log(xn))
            - (yn + xn) / (2 * s2)
            + 0.5 * (np.log(2.0 / np.pi) - np.log(z))
            + _log_cosh(z)
        )
        out[nc] = np.exp(log_pdf)
    out[y == 0] = np.inf
    return out[()] if out.ndim == 0 else out


def chi2_gaussian_approx_density(y, x, params):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("the Gaussian approximation needs x > 0")
    var = 2.0 * x * params.sigma2
    y = np.asarray(y, dtype=float)
    return np.exp(-((y - x) ** 2) / (2.0 * var) - 0.5 * (_LOG_2PI + np.log(var)))


_DENSITIES = {
    "awgn": awgn_density,
    "chi2": chi2_density,
    "chi2_approx": chi2_gaussian_approx_density,
}


def density(law, y, x, params):
    return _DENSITIES[normalize_law(law)](y, x, params)


def interval_masses(law, x, params, lo, hi):
    """``P(lo < Y <= hi | X = x)`` for each input in ``x`` (rows) and interval (columns)."""
    law = normalize_law(law)
    x = np.asarray(x, dtype=float)[:, None]
    lo = np.asarray(lo, dtype=float)[None, :]
    hi = np.asarray(hi, dtype=float)[None, :]
    s = params.sigma
    if law == "awgn":
        return gaussian_interval_mass((lo - x) / s, (hi - x) / s)
    if law == "chi2":
        # Y <= y  <=>  -sqrt(y) <= sqrt(x) + Z <= sqrt(y)
        a = np.sqrt(np.clip(lo, 0.0, None))
        b = np.sqrt(np.clip(hi, 0.0, None))
        r = np.sqrt(x)
        return gaussian_interval_mass((a - r) / s, (b - r) / s) + gaussian_interval_mass(
            (-b - r) / s, (-a - r) / s
        )
    sd = np.sqrt(2.0 * x) * s
    with np.errstate(divide="ignore", invalid="ignore"):
        mass = gaussian_interval_mass((lo - x) / sd, (hi - x) / sd)
    # x = 0 is the zero-variance limit: a point mass at y = 0.
    point = ((lo < 0.0) & (hi >= 0.0)).astype(float)
    return np.where(sd > 0, mass, point)


def default_grid(law, support, params, bins=DEFAULT_BINS, widen=1.0):
    """Uniform output grid covering the bulk of every conditional law.

    ``widen`` scales the noise margins; ``discretize`` raises it until the
    probability leaking outside the grid is negligible.
    """
    law = normalize_law(law)
    x = np.asarray(support, dtype=float)
    s, s2 = params.sigma, params.sigma2
    if law == "awgn":
        lo, hi = x.min() - 8 * widen * s, x.max() + 8 * widen * s
    elif law == "chi2":
        xmax = x.max()
        lo, hi = 0.0, xmax + widen * (8 * np.sqrt(2 * xmax) * s + 8 * s2)
    else:
        sd = np.sqrt(2.0 * x) * s
        lo = min(0.0, float(np.min(x - 8 * widen * sd)))
        hi = float(np.max(x + 8 * widen * sd))
        if hi <= lo:
            hi = lo + 8 * widen * s
    return OutputGrid.uniform(lo, hi, bins)


def _quadrature_masses(law, x, params, edges, subsamples):
    lo, hi = edges[:-1], edges[1:]
    width = hi - lo
    offsets = (np.arange(subsamples) + 0.5) / subsamples
    ys = lo[:, None] + width[:, None] * offsets[None, :]
    rows = []
    for xj in x:
        if law == "chi2_approx" and xj == 0:
            rows.append(interval_masses(law, [xj], params, lo, hi)[0])
            continue
        pdf = density(law, ys, xj, params)
        rows.append(pdf.mean(axis=1) * width)
    return np.array(rows)


def discretize(law, support, params, grid=None, *, bins=DEFAULT_BINS, method="cdf",
               subsamples=16, max_widenings=8):
    """Bin a continuous law into a :class:`TransitionMatrix`.

    ``method="cdf"`` integrates each bin exactly through the Gaussian CDF;
    ``method="quadrature"`` averages ``subsamples`` midpoint density samples per
    bin. Rows are renormalized; the pre-normalization shortfall is kept in
    ``leakage``. With ``grid=None`` the default grid is widened until the
    leakage is below ``MAX_LEAKAGE``.
    """
    law = normalize_law(law)
    x = check_support(support, nonnegative=law != "awgn")
    widen = 1.0
    for attempt in range(max_widenings + 1):
        g = grid if grid is not None else default_grid(law, x, params, bins, widen)
        if method == "cdf":
            raw = interval_masses(law, x, params, g.edges[:-1], g.edges[1:])
        elif method == "quadrature":
            raw = _quadrature_masses(law, x, params, g.edges, subsamples)
        else:
            raise ConfigurationError(f"unknown discretization method {method!r}")
        mass = raw.sum(axis=1)
        leakage = 1.0 - mass
        if grid is not None or np.max(np.abs(leakage)) < MAX_LEAKAGE:
            break
        widen *= 2.0
    else:
        raise ConfigurationError(
            f"output grid leaks {np.max(leakage):.3g} of probability after "
            f"{max_widenings} widenings"
        )
    if np.any(mass <= 0):
        raise ConfigurationError("a conditional law has no mass on the output grid")
    rows = raw / mass[:, None]
    return TransitionMatrix(rows, g, x, law, params, leakage)


def probe_rows(channel, x):
    """Conditional bin masses for arbitrary inputs ``x`` on ``channel``'s grid."""
    edges = channel.grid.edges
    raw = interval_masses(channel.law, np.atleast_1d(x), channel.params, edges[:-1], edges[1:])
    mass = raw.sum(axis=1, keepdims=True)
    return raw / mass


def hard_decision_confusion(law, support, params):
    """Symbol confusion matrix of a nearest-level slicer.

    Decision thresholds sit at midpoints between adjacent levels; the outer
    regions are unbounded (bounded below by 0 for the square-law channel).
    """
    law = normalize_law(law)
    x = check_support(support, nonnegative=law != "awgn")
    if x.size == 1:
        return np.ones((1, 1))
    mids = 0.5 * (x[:-1] + x[1:])
    lo = np.concatenate([[-np.inf], mids])
    hi = np.concatenate([mids, [np.inf]])
    if law == "chi2":
        lo[0] = 0.0
    conf = interval_masses(law, x, params, lo, hi)
    return conf / conf.sum(axis=1, keepdims=True)

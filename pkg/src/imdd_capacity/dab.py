"""Peak-power-limited AWGN intensity channel: fixed-support BA and dynamic assignment.

Inputs live in ``[0, 1]`` (peak power 1) and the PSNR sets ``sigma2 = 1 / PSNR``.
Dynamic-assignment BA (DAB) grows the constellation from ``{0, 1}``: after each
inner BA solve the divergence profile ``x -> D(p(y|x) || p_Y)`` is maximized
over ``[0, 1]``; a profile peak above the achieved rate means the support is
too small or misplaced, so a point is inserted at 0.5, the centre point is
split, or an existing pair is moved.
"""

from dataclasses import dataclass, field

import numpy as np

from ._numerics import gaussian_interval_mass, golden_section_max
from .blahut_arimoto import BaConfig, ba_solve, mutual_information
from .channels import DEFAULT_BINS, NoiseParams, OutputGrid, discretize, interval_masses
from .distributions import entropy_bits
from .errors import ConvergenceError

LOCATION_TOL = 1e-6
SYMMETRY_TOL = 1e-9
SCAN_POINTS = 2001  # on [0, 0.5]; same density as 4001 points on [0, 1]
NEW_POINT_MASS = 1e-3
# Interior points whose probability falls below this are removed.
DEAD_MASS = 1e-10
POLISH_STOP = 1e-11
SLOPE_TOL = 1e-12
# Newton mass solves stop at this rate gap (bits).
MASS_GAP = 1e-13
MASS_MAX_ITERS = 200


def psnr_params(psnr_db):
    """Noise variance for peak power 1."""
    return NoiseParams.from_snr_db(psnr_db, signal_power=1.0)


def dab_grid(params, bins=DEFAULT_BINS):
    s = params.sigma
    return OutputGrid.uniform(-8.0 * s, 1.0 + 8.0 * s, bins)


def symmetrize(p):
    p = 0.5 * (p + p[::-1])
    return p / p.sum()


@dataclass(frozen=True, eq=False)
class DabState:
    support: np.ndarray
    pmf: np.ndarray
    psnr_db: float = None

    def __post_init__(self):
        x = np.asarray(self.support, dtype=float)
        p = np.asarray(self.pmf, dtype=float)
        if x.shape != p.shape:
            raise ValueError("support and pmf lengths differ")
        if np.any(np.diff(x) <= 0):
            raise RuntimeError("support lost its ordering; location tolerance misconfigured")
        if x[0] < 0 or x[-1] > 1:
            raise ValueError("support must lie in [0, 1]")
        if x.size >= 2 and (x[0] != 0.0 or x[-1] != 1.0):
            raise ValueError("support must contain both 0 and 1")
        if np.max(np.abs(x + x[::-1] - 1.0)) > SYMMETRY_TOL:
            raise ValueError("support is not symmetric about 0.5")
        if np.max(np.abs(p - p[::-1])) > 1e-6:
            raise ValueError("pmf is not symmetric")
        object.__setattr__(self, "support", x)
        object.__setattr__(self, "pmf", p)

    @property
    def n_points(self):
        return self.support.size

    @classmethod
    def initial(cls, psnr_db=None):
        return cls(np.array([0.0, 1.0]), np.array([0.5, 0.5]), psnr_db)


class _Profile:
    """Output law of a state on a grid, ready for repeated probe evaluations."""

    def __init__(self, pmf, support, params, grid):
        self.params = params
        self.lo = grid.edges[:-1]
        self.hi = grid.edges[1:]
        ch = discretize("awgn", support, params, grid)
        self.py = np.asarray(pmf, dtype=float) @ ch.rows
        with np.errstate(divide="ignore"):
            self.log_py = np.log2(self.py)

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v = interval_masses("awgn", x, self.params, self.lo, self.hi)
        v = v / v.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(v > 0, v * (np.log2(v) - self.log_py), 0.0)
        return t.sum(axis=1)

    def scalar(self, x):
        return float(self(x)[0])


def _check_probe(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or not np.all(np.isfinite(x)):
        raise ValueError("probe locations must lie in [0, 1]")
    return x


def kl_profile(pmf, support, params, x, grid=None):
    """``D(p(y|x) || p_Y)`` in bits for probe inputs ``x`` in ``[0, 1]``."""
    x = _check_probe(x)
    prof = _Profile(pmf, support, params, grid or dab_grid(params))
    out = prof(x)
    return float(out[0]) if np.ndim(x) == 0 else out


def _scan_max(prof, scan_points=SCAN_POINTS):
    xs = np.linspace(0.0, 0.5, scan_points)
    vals = prof(xs)
    k = int(np.argmax(vals))
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, xs.size - 1)]
    x, v = golden_section_max(prof.scalar, a, b, tol=1e-9)
    if vals[k] >= v:
        x, v = xs[k], float(vals[k])
    return x, v, xs, vals


def find_profile_max(pmf, support, params, grid=None, scan_points=SCAN_POINTS):
    """Global maximizer of the profile; ties with ``1 - x`` resolve into ``[0, 0.5]``."""
    prof = _Profile(pmf, support, params, grid or dab_grid(params))
    x, v, _, _ = _scan_max(prof, scan_points)
    return float(x), float(v)


def _insert_center(x, p):
    n = x.size
    h = n // 2
    return (
        np.concatenate([x[:h], [0.5], x[h:]]),
        np.concatenate([p[:h], [NEW_POINT_MASS], p[h:]]),
        "insert",
    )


def _split_center(x, p, offset):
    c = x.size // 2
    return (
        np.concatenate([x[:c], [0.5 - offset, 0.5 + offset], x[c + 1 :]]),
        np.concatenate([p[:c], [p[c] / 2, p[c] / 2], p[c + 1 :]]),
        "split",
    )


def _update(state, x_max, tol=LOCATION_TOL):
    x, p = state.support.copy(), state.pmf.copy()
    n = x.size
    x_max = float(x_max)
    if x_max > 0.5:
        x_max = 1.0 - x_max
    in_support = np.min(np.abs(x - x_max)) < tol
    if abs(x_max - 0.5) < tol or in_support:
        if n % 2 == 0:
            x, p, kind = _insert_center(x, p)
        else:
            c = n // 2
            x, p, kind = _split_center(x, p, (x[c] - x[c - 1]) / 4.0)
    else:
        j = int(np.searchsorted(x, x_max))
        if x[j] > 0.5:
            j -= 1
        if n % 2 == 1 and j == n // 2:
            x, p, kind = _split_center(x, p, 0.5 - x_max)
        elif j == 0:
            # The end points never move; a peak between 0 and the first
            # symmetric pair can only be served from the centre.
            x, p, kind = _insert_center(x, p) if n % 2 == 0 else _split_center(
                x, p, (x[n // 2] - x[n // 2 - 1]) / 4.0
            )
        else:
            x[j], x[n - 1 - j] = x_max, 1.0 - x_max
            kind = "move"
    return DabState(x, symmetrize(p / p.sum()), state.psnr_db), kind


def dab_update(state, x_max, tol=LOCATION_TOL):
    """One outer DAB move.

    A peak at 0.5 or on an existing point adds a point: at 0.5 for even ``N``,
    otherwise by splitting the centre point into a symmetric pair. Any other
    peak ``x`` replaces the support point bracketing it from above within
    ``[0, 0.5]`` (from below if that point lies past the centre) together with
    its mirror at ``1 - x``; when that point is the centre itself it splits
    into ``(x, 1 - x)``.
    """
    return _update(state, x_max, tol)[0]


def _rows_and_slopes(x, params, edges):
    """Row-normalized AWGN bin masses for inputs ``x`` and their derivatives in ``x``."""
    s = params.sigma
    z = (edges[None, :] - x[:, None]) / s
    w = gaussian_interval_mass(z[:, :-1], z[:, 1:])
    phi = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    dw = (phi[:, :-1] - phi[:, 1:]) / s
    tot = w.sum(axis=1, keepdims=True)
    dtot = (phi[:, :1] - phi[:, -1:]) / s
    w = w / tot
    return w, (dw - w * dtot) / tot


def _fold(v, n):
    """Per-point values to mirror groups: pairs ``(j, n-1-j)`` then the centre for odd ``n``."""
    h = n // 2
    return np.concatenate([v[:h] + v[::-1][:h], v[h:h + n % 2]])


def _unfold(pi, n):
    h = n // 2
    return np.concatenate([pi[:h] / 2, pi[h:], pi[:h][::-1] / 2])


def _log_ratio(rows, py):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(rows > 0, np.log2(rows) - np.log2(py)[None, :], 0.0)


def _optimal_masses(rows, pi, gap_tol=MASS_GAP, max_iter=MASS_MAX_ITERS):
    """Capacity-achieving symmetric masses on fixed support rows by active-set Newton.

    ``pi`` holds group masses (see ``_fold``). The rate is concave in ``pi``
    with Hessian ``-log2(e) sum_y a_g(y) a_h(y) / p_Y(y)``, so Newton steps
    on the simplex converge quadratically even for nearly collinear rows,
    where BA slows to a crawl. A mass that reaches zero leaves the free set
    and is released again only once the free set is optimal and its
    divergence beats the rate. Returns ``(pi, rate, gap)`` with
    ``gap = max_g D_g - rate``.
    """
    n = rows.shape[0]
    h = n // 2
    a = _fold(rows, n)
    a[:h] *= 0.5
    own = rows[:h + n % 2]

    def rate(pi):
        py = pi @ a
        d = (own * _log_ratio(own, py)).sum(axis=1)
        return pi @ d, d, py

    pi = np.asarray(pi, dtype=float).copy()
    r, d, py = rate(pi)
    for _ in range(max_iter):
        if d.max() - r <= gap_tol:
            break
        free = pi > 0
        if d[free].max() - r <= gap_tol:
            g = int(np.argmax(np.where(free, -np.inf, d)))
            pi[g] = 1e-12
            pi /= pi.sum()
            r, d, py = rate(pi)
            free = pi > 0
        af = a[free]
        hess = -np.log2(np.e) * (af / np.where(py > 0, py, np.inf)) @ af.T
        k = af.shape[0]
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = hess
        kkt[:k, k] = kkt[k, :k] = 1.0
        sol = np.linalg.lstsq(kkt, np.concatenate([-d[free], [0.0]]), rcond=1e-15)[0]
        step = np.zeros_like(pi)
        step[free] = sol[:k]
        ratio = np.full_like(pi, np.inf)
        neg = step < 0
        ratio[neg] = pi[neg] / -step[neg]
        alpha = min(1.0, ratio.min())
        block = int(np.argmin(ratio))
        for _ in range(30):
            cand = pi + alpha * step
            if alpha == ratio[block]:
                cand[block] = 0.0
            cand = np.maximum(cand, 0.0)
            cand /= cand.sum()
            cr, cd, cpy = rate(cand)
            if cr >= r - 1e-15:
                break
            alpha *= 0.5
        else:
            # a BA step never lowers the rate
            cand = pi * np.exp2(d - r)
            cand /= cand.sum()
            cr, cd, cpy = rate(cand)
        pi, r, d, py = cand, cr, cd, cpy
    return pi, r, d.max() - r


def _relocate(state, params, grid, tol, max_iter=100, fd_step=1e-7):
    """Move interior pairs until the profile is flat at every support point.

    The masses are eliminated by solving them exactly for each location set,
    which leaves a smooth problem in the interior pair locations whose
    gradient is ``p_j D'(x_j)`` (``D'`` analytic). Newton steps use a
    finite-difference Hessian of that gradient and fall back to gradient
    ascent when it is not negative definite. Steps are capped at a quarter
    of the gap to neighbouring points and halved until the rate does not
    drop. A final BA solve at ``tol`` certifies the result.
    """
    n = state.n_points
    h = n // 2
    centre = [0.5] if n % 2 else []
    edges = grid.edges

    def build(u):
        return np.concatenate([[0.0], u, centre, 1.0 - u[::-1], [1.0]])

    def evaluate(u, pi):
        rows, dw = _rows_and_slopes(build(u), params, edges)
        pi, r, _ = _optimal_masses(rows, pi)
        p = _unfold(pi, n)
        lr = _log_ratio(rows, p @ rows)
        gx = p * (dw * lr).sum(axis=1)
        return r, gx[1:h] - gx[::-1][1:h], pi

    u = state.support[1:h].copy()
    r, g, pi = evaluate(u, _fold(state.pmf, n))
    for _ in range(max_iter if u.size else 0):
        live = np.flatnonzero(pi[1:h] > 0)
        if np.max(np.abs(g[live]), initial=0.0) < SLOPE_TOL:
            break
        x = build(u)
        above = np.where(x[2:h + 1] > 0.5, 2.0 * (0.5 - x[1:h]), x[2:h + 1] - x[1:h])
        room = 0.25 * np.minimum(x[1:h] - x[:h - 1], above)
        jac = np.empty((live.size, live.size))
        for c, k in enumerate(live):
            probe = u.copy()
            probe[k] += fd_step
            jac[:, c] = (evaluate(probe, pi)[1][live] - g[live]) / fd_step
        jac = 0.5 * (jac + jac.T)
        step = np.zeros_like(u)
        if np.all(np.linalg.eigvalsh(jac) < 0):
            step[live] = -np.linalg.solve(jac, g[live])
        else:
            step[live] = g[live] / np.max(np.abs(g[live]) / room[live])
        step /= max(1.0, np.max(np.abs(step) / room))
        for _ in range(40):
            cr, cg, cpi = evaluate(u + step, pi)
            if cr >= r - 1e-14:
                break
            step = 0.5 * step
        else:
            break
        u, r, g, pi = u + step, cr, cg, cpi
        if np.max(np.abs(step)) < POLISH_STOP:
            break
    state = DabState(build(u), symmetrize(_unfold(pi, n)), state.psnr_db)
    return _solve_inner(state, params, grid, tol)


def _respace(state):
    """The support resampled at ``N + 1`` points evenly in index, masses alike."""
    n = state.n_points
    k = np.arange(n + 1) * (n - 1) / n
    x = np.interp(k, np.arange(n), state.support)
    x = 0.5 * (x + 1.0 - x[::-1])
    if n % 2 == 0:
        x[n // 2] = 0.5
    p = np.interp(k, np.arange(n), state.pmf)
    return DabState(x, symmetrize(p / p.sum()), state.psnr_db)


def _prune(state):
    x, p = state.support, state.pmf
    keep = (p >= DEAD_MASS) | (x == 0.0) | (x == 1.0)
    if keep.all():
        return state
    p = p[keep]
    return DabState(x[keep], symmetrize(p / p.sum()), state.psnr_db)


@dataclass(frozen=True, eq=False)
class DabRecord:
    psnr_db: float
    capacity: float
    support: np.ndarray
    pmf: np.ndarray
    entropy: float
    profile_max: float
    outer_iterations: int
    events: tuple = ()

    @property
    def n_points(self):
        return self.support.size

    @property
    def log2_cardinality(self):
        return float(np.log2(self.support.size))


@dataclass(frozen=True, eq=False)
class DabReport:
    records: list = field(default_factory=list)
    eps: float = None

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def cardinality(self):
        return self.column("n_points")

    def cardinality_law_holds(self):
        """Non-decreasing cardinality that grows by exactly one at each change."""
        d = np.diff(self.cardinality)
        return bool(np.all((d == 0) | (d == 1)))


def _solve_inner(state, params, grid, tol):
    """BA on the state's support, warm-started from the state's pmf."""
    ch = discretize("awgn", state.support, params, grid)
    rep = ba_solve(ch, BaConfig(tol_bits=tol), init=state.pmf)
    if not rep.converged:
        raise ConvergenceError(
            f"inner BA did not converge at PSNR {state.psnr_db} dB "
            f"(gap {rep.gap:.3g} bits, N={state.n_points})"
        )
    # Symmetrizing cannot lower MI here: the channel is mirror symmetric and MI is concave.
    p = symmetrize(rep.pmf)
    return DabState(state.support, p, state.psnr_db), mutual_information(p, ch)


def dab_point(state, psnr_db, eps=1e-6, *, bins=DEFAULT_BINS, polish=True,
              scan_points=SCAN_POINTS, max_outer=400):
    """Run the outer loop at one PSNR from ``state``; returns ``(state, record)``."""
    params = psnr_params(psnr_db)
    grid = dab_grid(params, bins)
    state = DabState(state.support, state.pmf, psnr_db)
    inner_tol = eps / 10.0
    events = []
    grown = None
    for outer in range(max_outer):
        if polish and state.n_points > 2:
            state, mi = _relocate(state, params, grid, inner_tol)
            if grown is not None:
                # The centre move alone can leave the new point starved between
                # close neighbours; a respaced start usually reaches the better
                # optimum at the new cardinality.
                alt, alt_mi = _relocate(grown, params, grid, inner_tol)
                if alt_mi > mi:
                    state, mi = alt, alt_mi
                    events.append("respace")
        else:
            state, mi = _solve_inner(state, params, grid, inner_tol)
        grown = None
        pruned = _prune(state)
        if pruned is not state:
            events.append("prune")
            state, mi = _solve_inner(pruned, params, grid, inner_tol)
        prof = _Profile(state.pmf, state.support, params, grid)
        x_max, v_max, _, _ = _scan_max(prof, scan_points)
        if v_max - mi <= eps:
            rec = DabRecord(psnr_db, mi, state.support, state.pmf, entropy_bits(state.pmf),
                            v_max, outer, tuple(events))
            return state, rec
        before = state
        state, kind = _update(state, x_max)
        if kind in ("insert", "split"):
            grown = _respace(before)
        events.append(kind)
    raise ConvergenceError(f"DAB outer loop did not settle at PSNR {psnr_db} dB")


def default_psnr_range(lo=-5.0, hi=33.0, step=0.25):
    n = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(n)


def dab_solve(psnr_db_values=None, config=None, eps=None, *, init=None, bins=DEFAULT_BINS,
              polish=True, scan_points=SCAN_POINTS, progress=None):
    """DAB over an increasing PSNR sweep, warm-starting each point from the last.

    ``eps`` is the allowed profile excess over the achieved rate; it defaults to
    ``config.tol_bits`` and each inner BA runs at ``eps / 10``.
    """
    psnr = default_psnr_range() if psnr_db_values is None else np.asarray(psnr_db_values, float)
    if psnr.size > 1 and np.any(np.diff(psnr) <= 0):
        raise ValueError("PSNR values must be increasing")
    config = config or BaConfig()
    eps = config.tol_bits if eps is None else eps
    state = init or DabState.initial()
    records = []
    for db in psnr:
        state, rec = dab_point(state, float(db), eps, bins=bins, polish=polish,
                               scan_points=scan_points)
        records.append(rec)
        if progress:
            progress(rec)
    return DabReport(records, eps)


@dataclass(frozen=True, eq=False)
class FixedPpcResult:
    psnr_db: float
    support: np.ndarray
    pmf: np.ndarray
    capacity: float
    uniform_mi: float

    @property
    def shaping_gain(self):
        return self.capacity - self.uniform_mi


def ppc_fixed(m, psnr_db, config=None, bins=DEFAULT_BINS):
    """Optimal pmf on equally spaced PAM-``m`` levels spanning ``[0, 1]``."""
    x = np.linspace(0.0, 1.0, int(m))
    params = psnr_params(psnr_db)
    ch = discretize("awgn", x, params, dab_grid(params, bins))
    rep = ba_solve(ch, config or BaConfig())
    if not rep.converged:
        raise ConvergenceError(f"BA did not converge for PAM{m} at PSNR {psnr_db} dB")
    u = mutual_information(np.full(x.size, 1.0 / x.size), ch)
    return FixedPpcResult(float(psnr_db), x, symmetrize(rep.pmf), rep.capacity, u)

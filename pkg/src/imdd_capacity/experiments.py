"""Experiment registry, result tables and their CSV/JSON serialization.

Every experiment is deterministic: the same configuration gives the same rows
whatever the worker count, since independent sweep points are merged in
sweep order.
"""

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .apc import (
    MomentConstraint,
    apc_capacity,
    best_baseline,
    default_base_support,
    uniform_mi,
)
from .blahut_arimoto import REPORT_ZERO, TRACE_SLACK, BaConfig
from .channels import (
    DEFAULT_BINS,
    MAX_LEAKAGE,
    PSNR_CONVENTION,
    SNR_CONVENTION,
    NoiseParams,
    hard_decision_confusion,
    normalize_law,
)
from .dab import LOCATION_TOL, SCAN_POINTS, dab_solve, ppc_fixed
from .distributions import continuous_entropy, entropy_bits, entropy_gain_to_db
from .errors import (
    CapacityError,
    ConfigurationError,
    ConvergenceError,
    InfeasibleConstraintError,
)

CONSTRAINTS = {"peak": 0, "mean": 1, "second-moment": 2}
TYPES = {"float": float, "int": int, "str": str}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    channel: str = None
    constraint: str = None
    format_size: int = None
    snr_min: float = None
    snr_max: float = None
    snr_step: float = None
    tol: float = 1e-6
    bins: int = DEFAULT_BINS
    p_ave: float = 1.0
    out: str = None
    format: str = "csv"
    workers: int = 1

    def resolved(self):
        """Fill unset fields from the experiment's defaults and validate."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(
                f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}"
            )
        spec = EXPERIMENTS[self.experiment]
        cfg = replace(self, **{k: v for k, v in spec.defaults.items() if getattr(self, k) is None})
        cfg._validate(spec)
        return cfg

    def _validate(self, spec):
        if self.channel is not None:
            object.__setattr__(self, "channel", normalize_law(self.channel))
        if spec.channels and self.channel not in spec.channels:
            raise ConfigurationError(
                f"experiment {self.experiment} supports channels {spec.channels}, got {self.channel!r}"
            )
        if spec.constraints and self.constraint not in spec.constraints:
            raise ConfigurationError(
                f"experiment {self.experiment} supports constraints {spec.constraints}, "
                f"got {self.constraint!r}"
            )
        if not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise ConfigurationError("tolerance must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigurationError("format must be csv or json")
        if int(self.workers) < 1:
            raise ConfigurationError("workers must be at least 1")
        if self.bins < 16:
            raise ConfigurationError("need at least 16 output bins")
        if not self.p_ave > 0:
            raise ConfigurationError("p_ave must be positive")
        if spec.sweeps:
            if self.snr_step is None or not self.snr_step > 0:
                raise ConfigurationError("snr step must be positive")
            if self.snr_max < self.snr_min:
                raise ConfigurationError("snr range is empty (max below min)")
        if spec.needs_size:
            m = self.format_size
            if m is None or int(m) != m or m < 2:
                raise ConfigurationError("format size must be an integer >= 2")
            if self.constraint == "second-moment" and m % 2:
                raise ConfigurationError("bipolar PAM needs an even format size")

    def snr_values(self):
        n = int(math.floor((self.snr_max - self.snr_min) / self.snr_step + 1e-9)) + 1
        return np.round(self.snr_min + self.snr_step * np.arange(n), 10)

    def digest(self):
        """Hash of everything that affects the numbers (not output plumbing)."""
        keep = {k: v for k, v in asdict(self).items() if k not in ("out", "format", "workers")}
        blob = json.dumps(keep, sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(eq=False)
class ResultTable:
    schema: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.schema = [tuple(c) for c in self.schema]
        for name, kind in self.schema:
            if kind not in TYPES:
                raise ValueError(f"column {name} has unknown type {kind!r}")
        self.rows = [self._coerce(r) for r in self.rows]

    @property
    def columns(self):
        return [c[0] for c in self.schema]

    def _coerce(self, row):
        if len(row) != len(self.schema):
            raise ValueError(f"row {row!r} does not match schema {self.columns}")
        return tuple(TYPES[kind](v) for v, (_, kind) in zip(row, self.schema))

    def column(self, name):
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows])

    def __eq__(self, other):
        return (
            isinstance(other, ResultTable)
            and self.schema == other.schema
            and self.rows == other.rows
            and self.metadata == other.metadata
        )


def _cell(v):
    return repr(v) if isinstance(v, float) else str(v)


def to_csv(table):
    buf = io.StringIO()
    buf.write("# metadata: " + json.dumps(table.metadata, sort_keys=True) + "\n")
    buf.write("# types: " + ",".join(k for _, k in table.schema) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def to_json(table):
    doc = {
        "schema": [{"name": n, "type": k} for n, k in table.schema],
        "metadata": table.metadata,
        "rows": [list(r) for r in table.rows],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def emit(table, path, fmt="csv"):
    if fmt not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    text = to_csv(table) if fmt == "csv" else to_json(table)
    if path is None or path == "-":
        return text
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return text


def parse(text, fmt="csv"):
    if fmt == "json":
        doc = json.loads(text)
        schema = [(c["name"], c["type"]) for c in doc["schema"]]
        return ResultTable(schema, doc["rows"], doc["metadata"])
    lines = text.splitlines()
    meta = json.loads(lines[0].split(": ", 1)[1])
    types = lines[1].split(": ", 1)[1].split(",")
    reader = csv.reader(lines[2:])
    header = next(reader)
    return ResultTable(list(zip(header, types)), list(reader), meta)


def read_table(path):
    fmt = "json" if str(path).endswith(".json") else "csv"
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), fmt)


# ---------------------------------------------------------------- runners


def _ba(cfg):
    return BaConfig(tol_bits=cfg.tol)


def _apc_setup(cfg):
    coherent = cfg.constraint == "second-moment"
    base = default_base_support(cfg.format_size, coherent=coherent)
    order = 2 if coherent else 1
    return base, MomentConstraint(order, cfg.p_ave)


def _apc_point(cfg, snr):
    base, con = _apc_setup(cfg)
    params = NoiseParams.from_snr_db(snr, cfg.p_ave)
    rep = apc_capacity(cfg.channel, base, params, con, config=_ba(cfg), bins=cfg.bins)
    u, l0 = uniform_mi(cfg.channel, base, params, con, cfg.bins)
    return rep, u, l0


def _fig_air(cfg, snr):
    rep, u, l0 = _apc_point(cfg, snr)
    return [(snr, rep.capacity, u, rep.capacity - u, rep.best_l / l0)]


def _fig_pmf(cfg, snr):
    rep, _, l0 = _apc_point(cfg, snr)
    return [(snr, j, float(x), float(p)) for j, (x, p) in enumerate(zip(rep.support, rep.pmf))]


def _fig13(cfg, snr):
    base, con = _apc_setup(cfg)
    params = NoiseParams.from_snr_db(snr, cfg.p_ave)
    rep, u, _ = _apc_point(cfg, snr)
    exp = best_baseline("exponential", cfg.channel, base, params, con, bins=cfg.bins)
    return [(snr, rep.capacity - u, exp.mi - u)]


def _fig14(cfg, snr):
    base, con = _apc_setup(cfg)
    params = NoiseParams.from_snr_db(snr, cfg.p_ave)
    rep, _, _ = _apc_point(cfg, snr)
    exp = best_baseline("exponential", cfg.channel, base, params, con, bins=cfg.bins)
    return [(snr, rep.capacity, exp.mi, rep.capacity - exp.mi)]


def _fig16(cfg, snr):
    base, con = _apc_setup(cfg)
    params = NoiseParams.from_snr_db(snr, cfg.p_ave)
    rep, u, _ = _apc_point(cfg, snr)
    exp = best_baseline("exponential", cfg.channel, base, params, con, bins=cfg.bins)
    pw = best_baseline("pairwise_exponential", cfg.channel, base, params, con, bins=cfg.bins)
    return [(snr, rep.capacity - u, exp.mi - u, pw.mi - u, entropy_bits(rep.pmf), exp.entropy,
             pw.entropy)]


def _fig15(cfg, snr):
    base, con = _apc_setup(cfg)
    params = NoiseParams.from_snr_db(snr, cfg.p_ave)
    rep, _, _ = _apc_point(cfg, snr)
    exp = best_baseline("exponential", cfg.channel, base, params, con, bins=cfg.bins)
    pw = best_baseline("pairwise_exponential", cfg.channel, base, params, con, bins=cfg.bins)
    return [(snr, j, float(rep.pmf[j]), float(exp.pmf[j]), float(pw.pmf[j]))
            for j in range(base.size)]


def _fig12(cfg, snr):
    base, con = _apc_setup(cfg)
    params = NoiseParams.from_snr_db(snr, cfg.p_ave)
    l0 = con.unit_scale(base)
    conf = hard_decision_confusion(cfg.channel, l0 * base, params)
    return [(snr, j, k, float(conf[j, k])) for j in range(base.size) for k in range(base.size)]


def _fig8(cfg, psnr):
    r = ppc_fixed(cfg.format_size, psnr, _ba(cfg), cfg.bins)
    return [(psnr, r.capacity, r.uniform_mi, r.shaping_gain)]


def _fig9(cfg, psnr):
    r = ppc_fixed(cfg.format_size, psnr, _ba(cfg), cfg.bins)
    return [(psnr, j, float(x), float(p)) for j, (x, p) in enumerate(zip(r.support, r.pmf))]


def _dab_rows(cfg, kind):
    rep = dab_solve(cfg.snr_values(), _ba(cfg), bins=cfg.bins)
    rows = []
    for r in rep.records:
        if kind == "fig7":
            rows.append((r.psnr_db, r.capacity, r.entropy, r.log2_cardinality))
        else:
            rows.extend((r.psnr_db, j, float(x), float(p))
                        for j, (x, p) in enumerate(zip(r.support, r.pmf)))
    return rows


def _closed_forms(cfg):
    dh1 = continuous_entropy("exponential_mean", cfg.p_ave) - continuous_entropy(
        "uniform_on_0A", cfg.p_ave)
    dh2 = 0.5 * math.log2(math.pi * math.e / 6.0)
    return [
        ("delta_h_exponential_vs_uniform_bits", dh1),
        ("gain_first_moment_db", entropy_gain_to_db(dh1, 1)),
        ("delta_h_gaussian_vs_uniform_bits", dh2),
        ("gain_second_moment_db", entropy_gain_to_db(dh2, 2)),
    ]


@dataclass(frozen=True)
class _Spec:
    command: str
    schema: list
    point: object = None  # per-SNR function, parallelizable
    whole: object = None  # whole-table function
    defaults: dict = field(default_factory=dict)
    channels: tuple = ()
    constraints: tuple = ()
    sweeps: bool = True
    needs_size: bool = True
    axis: str = "snr_db"


def _sweep(lo, hi, step):
    return {"snr_min": lo, "snr_max": hi, "snr_step": step}


_COHERENT = dict(channel="awgn", constraint="second-moment", format_size=8)
_CHI2 = dict(channel="chi2", constraint="mean", format_size=8)
_PPC = dict(channel="awgn", constraint="peak")
_PMF = [("snr_db", "float"), ("index", "int"), ("level", "float"), ("probability", "float")]
_AIR = [("snr_db", "float"), ("capacity_bits", "float"), ("uniform_bits", "float"),
        ("gain_bits", "float"), ("scale_over_l0", "float")]

EXPERIMENTS = {
    "fig4": _Spec("solve-coherent", _AIR, _fig_air, defaults={**_COHERENT, **_sweep(0, 25, 1)},
                  channels=("awgn",), constraints=("second-moment",)),
    "fig5": _Spec("solve-coherent", _PMF, _fig_pmf, defaults={**_COHERENT, **_sweep(0, 25, 5)},
                  channels=("awgn",), constraints=("second-moment",)),
    "fig6": _Spec("solve-ppc-dab",
                  [("psnr_db", "float"), ("index", "int"), ("location", "float"),
                   ("probability", "float")],
                  whole=lambda cfg: _dab_rows(cfg, "fig6"),
                  defaults={**_PPC, **_sweep(-5, 33, 0.25)}, channels=("awgn",),
                  constraints=("peak",), needs_size=False, axis="psnr_db"),
    "fig7": _Spec("solve-ppc-dab",
                  [("psnr_db", "float"), ("capacity_bits", "float"), ("entropy_bits", "float"),
                   ("log2_cardinality", "float")],
                  whole=lambda cfg: _dab_rows(cfg, "fig7"),
                  defaults={**_PPC, **_sweep(-5, 33, 0.25)}, channels=("awgn",),
                  constraints=("peak",), needs_size=False, axis="psnr_db"),
    "fig8": _Spec("solve-ppc-fixed",
                  [("psnr_db", "float"), ("capacity_bits", "float"), ("uniform_bits", "float"),
                   ("gain_bits", "float")],
                  _fig8, defaults={**_PPC, "format_size": 4, **_sweep(-5, 30, 1)},
                  channels=("awgn",), constraints=("peak",), axis="psnr_db"),
    "fig9": _Spec("solve-ppc-fixed",
                  [("psnr_db", "float"), ("index", "int"), ("level", "float"),
                   ("probability", "float")],
                  _fig9, defaults={**_PPC, "format_size": 4, **_sweep(-5, 30, 5)},
                  channels=("awgn",), constraints=("peak",), axis="psnr_db"),
    "fig10": _Spec("solve-apc", _AIR, _fig_air, defaults={**_CHI2, **_sweep(10, 30, 1)},
                   channels=("chi2", "chi2_approx"), constraints=("mean",)),
    "fig11": _Spec("solve-apc", _PMF, _fig_pmf, defaults={**_CHI2, **_sweep(20, 20, 1)},
                   channels=("chi2", "chi2_approx"), constraints=("mean",)),
    "fig12": _Spec("confusion",
                   [("snr_db", "float"), ("sent", "int"), ("decided", "int"),
                    ("probability", "float")],
                   _fig12, defaults={**_CHI2, **_sweep(20, 20, 1)},
                   channels=("chi2", "chi2_approx", "awgn"), constraints=("mean",)),
    "fig13": _Spec("solve-apc",
                   [("snr_db", "float"), ("gain_ba_bits", "float"), ("gain_exp_bits", "float")],
                   _fig13, defaults={**_CHI2, **_sweep(10, 30, 1)},
                   channels=("chi2", "chi2_approx"), constraints=("mean",)),
    "fig14": _Spec("solve-apc",
                   [("snr_db", "float"), ("mi_ba_bits", "float"), ("mi_exp_bits", "float"),
                    ("gap_bits", "float")],
                   _fig14, defaults={**_CHI2, **_sweep(10, 30, 1)},
                   channels=("chi2", "chi2_approx"), constraints=("mean",)),
    "fig15": _Spec("baselines",
                   [("snr_db", "float"), ("index", "int"), ("ba_probability", "float"),
                    ("exp_probability", "float"), ("pairwise_probability", "float")],
                   _fig15, defaults={**_CHI2, **_sweep(20, 20, 1)},
                   channels=("chi2", "chi2_approx"), constraints=("mean",)),
    "fig16": _Spec("baselines",
                   [("snr_db", "float"), ("gain_ba_bits", "float"), ("gain_exp_bits", "float"),
                    ("gain_pairwise_bits", "float"), ("entropy_ba_bits", "float"),
                    ("entropy_exp_bits", "float"), ("entropy_pairwise_bits", "float")],
                   _fig16, defaults={**_CHI2, **_sweep(10, 30, 2)},
                   channels=("chi2", "chi2_approx"), constraints=("mean",)),
    "closed-forms": _Spec("closed-forms", [("quantity", "str"), ("value", "float")],
                          whole=_closed_forms, sweeps=False, needs_size=False),
}

COMMANDS = {}
for _name, _spec in EXPERIMENTS.items():
    COMMANDS.setdefault(_spec.command, []).append(_name)


def _metadata(cfg, spec):
    meta = {
        "experiment": cfg.experiment,
        "config_hash": cfg.digest(),
        "package_version": __version__,
        "config": {f.name: getattr(cfg, f.name) for f in fields(cfg)
                   if f.name not in ("out", "format", "workers")},
        "tolerances": {
            "ba_tol_bits": cfg.tol,
            "report_zero": REPORT_ZERO,
            "trace_slack": TRACE_SLACK,
            "grid_leakage_max": MAX_LEAKAGE,
            "output_bins": cfg.bins,
        },
    }
    if spec.axis == "psnr_db":
        meta["snr_convention"] = PSNR_CONVENTION
        meta["tolerances"].update(dab_location_tol=LOCATION_TOL, dab_scan_points=SCAN_POINTS)
    elif spec.sweeps:
        meta["snr_convention"] = SNR_CONVENTION
    return meta


def _run_point(args):
    name, cfg, snr = args
    try:
        return EXPERIMENTS[name].point(cfg, float(snr))
    except (ConfigurationError, InfeasibleConstraintError):
        raise
    except CapacityError as exc:
        raise ConvergenceError(f"{name} failed at {snr} dB: {exc}") from exc


def run_experiment(config):
    """Run one experiment; rows come back in sweep order."""
    cfg = config.resolved()
    spec = EXPERIMENTS[cfg.experiment]
    if spec.whole is not None:
        try:
            rows = spec.whole(cfg)
        except (ConfigurationError, InfeasibleConstraintError):
            raise
        except CapacityError as exc:
            raise ConvergenceError(f"{cfg.experiment} failed: {exc}") from exc
    else:
        jobs = [(cfg.experiment, cfg, snr) for snr in cfg.snr_values()]
        if cfg.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=int(cfg.workers)) as pool:
                parts = list(pool.map(_run_point, jobs))
        else:
            parts = [_run_point(j) for j in jobs]
        rows = [r for part in parts for r in part]
    return ResultTable(spec.schema, rows, _metadata(cfg, spec))

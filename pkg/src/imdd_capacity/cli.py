"""Command-line runner: one subcommand per family of experiments.

Exit codes: 0 success, 2 solver non-convergence, 3 configuration error.
"""

import argparse
import sys
import warnings

from .errors import ConfigurationError, ConvergenceError, InfeasibleConstraintError
from .experiments import COMMANDS, ExperimentConfig, emit, run_experiment

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK = 0
EXIT_NONCONVERGED = 2
EXIT_CONFIG = 3

# Flag name -> ExperimentConfig field.
FLAG_FIELDS = {
    "channel": "channel",
    "constraint": "constraint",
    "format_size": "format_size",
    "snr_min": "snr_min",
    "snr_max": "snr_max",
    "snr_step": "snr_step",
    "tol": "tol",
    "bins": "bins",
    "p_ave": "p_ave",
    "out": "out",
    "format": "format",
    "workers": "workers",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p, command):
    figs = COMMANDS[command]
    p.add_argument("--figure", choices=figs,
                   help=f"which table to produce (default {figs[0]})")
    p.add_argument("--config", help="TOML file; command-line flags override it")
    if command != "closed-forms":
        p.add_argument("--snr-min", type=float, help="first SNR or PSNR in dB")
        p.add_argument("--snr-max", type=float, help="last SNR or PSNR in dB")
        p.add_argument("--snr-step", type=float, help="sweep step in dB")
        p.add_argument("--format-size", type=int, help="constellation size M")
        p.add_argument("--channel", choices=["awgn", "chi2", "chi2-approx"])
        p.add_argument("--constraint", choices=["peak", "mean", "second-moment"])
        p.add_argument("--tol", type=float, help="BA bound gap in bits (default 1e-6)")
        p.add_argument("--bins", type=int, help="output grid bins (default 2048)")
        p.add_argument("--p-ave", type=float, help="average power budget (default 1)")
        p.add_argument("--workers", type=int, help="parallel sweep workers")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], help="output format (default csv)")


def build_parser():
    parser = _Parser(prog="imdd-capacity", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for command in COMMANDS:
        _common(sub.add_parser(command, help=", ".join(COMMANDS[command])), command)
    return parser


def load_config_file(path):
    """Read a TOML config; keys may sit at top level or under ``[experiment]``."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"bad TOML in {path}: {exc}") from exc
    flat = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    out = {}
    for key, value in flat.items():
        name = key.replace("-", "_")
        if name == "figure":
            out["experiment"] = value
        elif name in FLAG_FIELDS:
            out[FLAG_FIELDS[name]] = value
        else:
            raise ConfigurationError(f"unknown config key {key!r}")
    return out


def config_from_args(args):
    """Merge defaults, the config file and flags; flags win over the file."""
    values = {}
    if args.config:
        values.update(load_config_file(args.config))
    if args.figure:
        values["experiment"] = args.figure
    values.setdefault("experiment", COMMANDS[args.command][0])
    if values["experiment"] not in COMMANDS[args.command]:
        raise ConfigurationError(
            f"{args.command} cannot produce {values['experiment']!r}; "
            f"choose from {COMMANDS[args.command]}"
        )
    for flag, name in FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    return ExperimentConfig(**values)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args).resolved()
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            table = run_experiment(cfg)
        text = emit(table, cfg.out, cfg.format)
    except (ConfigurationError, InfeasibleConstraintError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    if cfg.out in (None, "-"):
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

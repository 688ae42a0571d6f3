"""Command-line front end for the Moran operator studies."""

from __future__ import annotations

import argparse
import os
import sys
import warnings

import numpy as np

from . import studies
from .functions import FunctionSpecError, parse_function_spec
from .lattice import KernelVariant, build_transition_matrix
from .report import ConvergenceReport, ReportRow, format_value, write_atomic
from .sim import NonStochasticKernelError, RngPlan

SUBCOMMANDS = ("approx", "kelisky", "voronovskaya", "semigroup", "tightness", "absorption", "matrix-dump")

COLUMNS_HELP = """\
CSV output: '#'-prefixed comment lines (config, kernel variant, seed,
minimum transition-matrix entry), then a header row.  Every file starts
with the columns n,k,error,bound,pass; extra columns by subcommand:

  approx        k=1; lattice_error, min_entry
  kelisky       k = iterate; bound = tol; e1_drift, bernstein_error
  voronovskaya  k=1; error = generator residual; scale
  semigroup     k = floor(scale t); t, bernstein_k, bernstein_error, min_entry
  tightness     k = chain steps per gap; error = pooled moment; gap, m,
                std_error, pairs, exponent
  absorption    k = max steps; error = |p_hat - i/n|; bound = 3 SE;
                p_hat, std_error, unabsorbed, mean_steps
  matrix-dump   one row per nonzero entry (i, j): n, k=i, error=|P[i][j]|;
                j, entry

Exit status: 0 pass, 1 fail, 2 usage or configuration error.
"""

# (needs --f, needs sampling)
REQUIREMENTS = {
    "approx": (True, False),
    "kelisky": (True, False),
    "voronovskaya": (True, False),
    "semigroup": (True, False),
    "tightness": (False, True),
    "absorption": (False, True),
    "matrix-dump": (False, False),
}

DEFAULTS = {
    "variant": "paper",
    "t": 1.0,
    "kmax": 10**6,
    "tol": 1e-8,
    "samples": 10_000,
    "dt": 1e-4,
    "seed": 0,
    "m": 1,
    "workers": 1,
    "streams": 16,
}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moranlab",
        description="Convergence studies for the Moran operator and the Wright-Fisher semigroup.",
        epilog=COLUMNS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="key=value file; command-line flags take precedence")
    parser.add_argument("--n", help="comma-separated lattice sizes, e.g. 10,20,40")
    parser.add_argument("--variant", choices=("paper", "standard"))
    parser.add_argument("--f", dest="function", metavar="SPEC", help="test function: poly:c0,c1,..  abs:c  sin:k  exp:a")
    parser.add_argument("--t", type=float, help="diffusion time (semigroup)")
    parser.add_argument("--kmax", type=int, help="largest iterate (kelisky) or step cap (absorption)")
    parser.add_argument("--tol", type=float, help="convergence tolerance (kelisky)")
    parser.add_argument("--samples", type=int, help="Monte-Carlo replicates")
    parser.add_argument("--dt", type=float, help="SDE time step (reserved for SDE-based runs)")
    parser.add_argument("--seed", type=int, help="master seed of the RNG plan")
    parser.add_argument("--m", type=int, help="moment index for tightness (1, 2 or 3)")
    parser.add_argument("--workers", type=int, help="worker threads; never changes the output")
    parser.add_argument("--streams", type=int, help="RNG streams in the plan")
    parser.add_argument("--out", help="CSV output path")
    parser.add_argument("--emit-plot", action="store_true", default=None, help="also write a gnuplot script next to the CSV")
    return parser


def read_config_file(path: str) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key = key.strip().lstrip("-").replace("-", "_")
            if key == "f":
                key = "function"
            values[key] = value.strip()
    return values


def _coerce(key: str, value):
    if value is None or not isinstance(value, str):
        return value
    try:
        if key in ("t", "tol", "dt"):
            return float(value)
        if key in ("kmax", "samples", "seed", "m", "workers", "streams"):
            return int(float(value)) if "e" in value.lower() else int(value)
        if key == "emit_plot":
            return value.lower() in ("1", "true", "yes", "on")
    except ValueError:
        raise UsageError(f"bad value for {key}: {value!r}") from None
    return value


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < flags and validate the result."""
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            file_values = read_config_file(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        cfg.update({k: _coerce(k, v) for k, v in file_values.items()})
    for key, value in vars(args).items():
        if key != "config" and value is not None:
            cfg[key] = value
    cfg["emit_plot"] = bool(cfg.get("emit_plot"))

    sub = cfg["subcommand"]
    needs_f, _ = REQUIREMENTS[sub]
    missing = [flag for flag, key in (("--n", "n"), ("--out", "out")) if not cfg.get(key)]
    if needs_f and not cfg.get("function"):
        missing.append("--f")
    if missing:
        raise UsageError(f"{sub}: missing required flag(s) {', '.join(missing)}")

    try:
        n_list = [int(tok) for tok in str(cfg["n"]).replace(" ", "").split(",") if tok]
    except ValueError:
        raise UsageError(f"--n must be a comma-separated list of integers, got {cfg['n']!r}") from None
    if not n_list or any(n < 2 for n in n_list):
        raise UsageError(f"--n values must all be >= 2, got {cfg['n']!r}")
    cfg["n_list"] = sorted(n_list)
    try:
        cfg["variant"] = KernelVariant.parse(cfg["variant"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if needs_f:
        try:
            cfg["test_function"] = parse_function_spec(cfg["function"])
        except FunctionSpecError as exc:
            raise UsageError(f"--f: {exc}") from None
    for key in ("t", "tol", "dt"):
        cfg[key] = _coerce(key, cfg[key])
    for key in ("kmax", "samples", "seed", "m", "workers", "streams"):
        cfg[key] = _coerce(key, cfg[key])
    if cfg["samples"] < 2 or cfg["streams"] < 1 or cfg["kmax"] < 1:
        raise UsageError("--samples must be >= 2, --streams >= 1, --kmax >= 1")
    return cfg


def _matrix_dump(cfg) -> ConvergenceReport:
    rows = []
    for n in cfg["n_list"]:
        P = build_transition_matrix(n, cfg["variant"])
        for i, j in zip(*np.nonzero(P.entries)):
            v = float(P.entries[i, j])
            rows.append(ReportRow(n, int(i), abs(v), None, True, {"j": int(j), "entry": v}))
    return ConvergenceReport("matrix-dump", rows, True)


def execute(cfg: dict) -> ConvergenceReport:
    sub = cfg["subcommand"]
    variant, n_list = cfg["variant"], cfg["n_list"]
    plan = RngPlan(cfg["seed"], cfg["streams"])
    if sub == "approx":
        return studies.run_approximation_study(cfg["test_function"], n_list, variant)
    if sub == "kelisky":
        reports = [studies.run_kelisky_rivlin_study(cfg["test_function"], n, variant, cfg["kmax"], cfg["tol"]) for n in n_list]
        merged = ConvergenceReport("kelisky", [r for rep in reports for r in rep.rows], all(rep.verdict for rep in reports))
        for rep in reports:
            merged.notes.extend(rep.notes)
            merged.failures.extend(rep.failures)
        return merged
    if sub == "voronovskaya":
        return studies.run_voronovskaya_study(cfg["test_function"], n_list, variant)
    if sub == "semigroup":
        return studies.run_semigroup_study(cfg["test_function"], cfg["t"], n_list, variant)
    if sub == "tightness":
        return studies.run_tightness_study(n_list, variant, cfg["m"], plan, cfg["samples"], workers=cfg["workers"])
    if sub == "absorption":
        return studies.run_absorption_study(n_list, variant, cfg["samples"], cfg["kmax"], plan, cfg["workers"])
    return _matrix_dump(cfg)


def comment_header(cfg: dict) -> str:
    keys = ("subcommand", "n", "variant", "function", "t", "kmax", "tol", "samples", "dt", "seed", "m", "streams")
    shown = {k: cfg.get(k) for k in keys}
    shown["n"] = ",".join(map(str, cfg["n_list"]))
    shown["variant"] = cfg["variant"].value
    min_entry = min(build_transition_matrix(n, cfg["variant"]).min_entry for n in cfg["n_list"])
    config = " ".join(f"{k}={format_value(v)}" for k, v in shown.items() if v is not None)
    return f"moranlab {config}\nkernel_variant={cfg['variant'].value} seed={cfg['seed']} min_transition_entry={format_value(min_entry)}"


def plot_script(csv_path: str, report: ConvergenceReport) -> str:
    name = os.path.basename(csv_path)
    xcol = 1
    if report.experiment == "tightness":
        xcol = report.columns.index("gap") + 1
    elif report.experiment == "kelisky":
        xcol = 2
    series = f"'{name}' using {xcol}:3 with linespoints title 'error'"
    if any(r.bound is not None for r in report.rows):
        series += f", '' using {xcol}:4 with linespoints title 'bound'"
    return (
        f"# gnuplot script for {name}\n"
        "set datafile separator ','\n"
        "set logscale xy\n"
        f"set title '{report.experiment}'\n"
        f"plot {series}\n"
    )


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"moranlab: error: {exc}", file=sys.stderr)
        return 2

    sub = cfg["subcommand"]
    if REQUIREMENTS[sub][1]:
        P = build_transition_matrix(max(cfg["n_list"]), cfg["variant"])
        if not P.is_stochastic:
            print(
                f"moranlab: error: {sub} samples chain paths, but the {cfg['variant'].value} kernel has negative "
                f"entries (min {P.min_entry:.6g}); use --variant standard",
                file=sys.stderr,
            )
            return 2

    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = execute(cfg)
    except (NonStochasticKernelError, studies.StudyError, ValueError) as exc:
        print(f"moranlab: {sub} failed: {exc}", file=sys.stderr)
        return 1
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    write_atomic(cfg["out"], report.to_csv(comment_header(cfg)))
    if cfg["emit_plot"]:
        base = cfg["out"].rsplit(".", 1)[0] if cfg["out"].endswith(".csv") else cfg["out"]
        write_atomic(base + ".gp", plot_script(cfg["out"], report))
    for failure in report.failures:
        print(f"  {failure}", file=sys.stderr)
    print(report.verdict_line())
    return 0 if report.verdict else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line front end.

Subcommands ``run``, ``validate``, ``oracle`` and ``sweep``. Exit status is
0 on success, 1 on a runtime or numerical failure and 2 on a usage or
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import config as cfgmod
from . import scenarios
from .config import ScenarioConfig
from .engine import TRAJECTORY_COLUMNS
from .errors import ConfigError, DomainError, UESError

log = logging.getLogger("unbiased_es")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

SWEEP_COLUMNS = (
    "value", "status", "final_input_error", "rate", "r_squared", "reweighted_residual",
    "averaged_contraction", "averaged_contraction_numeric", "contracting", "message",
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return "%.17g" % value
    return str(value)


def _atomic_write(path: Path, write) -> None:
    """Write through a temp file in the target directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path: Path, columns, rows) -> None:
    def body(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])

    _atomic_write(path, body)


def write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, lambda fh: fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n"))


def write_trajectory(path: Path, traj) -> None:
    cols = [traj[c] for c in TRAJECTORY_COLUMNS]
    write_table(path, TRAJECTORY_COLUMNS, zip(*cols))


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _load(args) -> ScenarioConfig:
    cfg = cfgmod.load(args.config) if args.config else ScenarioConfig()
    return cfgmod.apply_overrides(cfg, args.set)


def _paths(args, cfg: ScenarioConfig, stem: str) -> tuple[Path, Path]:
    out_dir = Path(args.out_dir) if args.out_dir else Path(".")
    csv_path = Path(cfg.output.csv_path) if cfg.output.csv_path else out_dir / f"{stem}.csv"
    summary = Path(cfg.output.summary_path) if cfg.output.summary_path else out_dir / f"{stem}_summary.json"
    if args.out_dir:
        csv_path = csv_path if csv_path.is_absolute() else out_dir / csv_path.name
        summary = summary if summary.is_absolute() else out_dir / summary.name
    return csv_path, summary


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = _load(args)
    traj, summary = scenarios.run_and_summarize(cfg)
    if args.canonical:
        summary.pop("runtime_s", None)
    summary["config"] = cfgmod.echo(cfg)
    csv_path, summary_path = _paths(args, cfg, cfg.mode)
    write_trajectory(csv_path, traj)
    write_json(summary_path, _json_safe(summary))
    print(f"final |theta - theta*| = {summary['final_input_error']:.3e}")
    fit = summary["decay_fit"]
    if fit.get("rate") is not None:
        print(f"decay rate {fit['rate']:.4f} (r^2 {fit['r_squared']:.4f})")
    print(f"wrote {csv_path} and {summary_path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    report = scenarios.validate(cfg)
    print(report.format())
    return EXIT_OK if report.passed else EXIT_RUNTIME


def cmd_oracle(args) -> int:
    cfg = _load(args)
    table = scenarios.oracle_tables(cfg)
    csv_path, summary_path = _paths(args, cfg, cfg.mode)
    names = list(table)
    write_table(csv_path, names, zip(*(table[n] for n in names)))
    summary = {"mode": cfg.mode, "config": cfgmod.echo(cfg), "rows": len(table["t"])}
    for n in names:
        if n != "t":
            summary[f"final_{n}"] = float(table[n][-1])
    write_json(summary_path, _json_safe(summary))
    print(f"wrote {csv_path} and {summary_path}")
    return EXIT_OK


def _sweep_one(job):
    """Run one sweep point; never raises so the sweep can continue."""
    cfg, value = job
    p = scenarios.averaged_params(cfg)
    row = dict.fromkeys(SWEEP_COLUMNS)
    row["value"] = value
    row["averaged_contraction"] = p.contraction
    row["contracting"] = p.contraction > 0
    try:
        row["averaged_contraction_numeric"] = scenarios.averaged_rate_numeric(cfg)
    except UESError as exc:
        row["message"] = f"averaged: {exc}"
    try:
        _, summary = scenarios.run_and_summarize(cfg)
    except (UESError, ValueError, ArithmeticError) as exc:
        row["status"] = "failed"
        row["message"] = f"{type(exc).__name__}: {exc}"
        return row
    row["status"] = "ok"
    row["final_input_error"] = summary["final_input_error"]
    row["rate"] = summary["decay_fit"].get("rate")
    row["r_squared"] = summary["decay_fit"].get("r_squared")
    row["reweighted_residual"] = summary["reweighted_residual"]
    return row


def _parse_values(text: str) -> list[str]:
    values = [v.strip() for v in (text or "").split(",") if v.strip()]
    if not values:
        raise _UsageError("--values must list at least one value")
    return values


def cmd_sweep(args) -> int:
    base = _load(args)
    if args.param not in cfgmod.KEYS or args.param == "mode":
        raise ConfigError(f"unknown sweep parameter {args.param!r}")
    values = _parse_values(args.values)
    jobs = []
    for raw in values:
        cfg = cfgmod.apply(base, args.param, raw)
        jobs.append((cfg, float(raw)))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]

    out_dir = Path(args.out_dir) if args.out_dir else Path(".")
    stem = f"sweep_{args.param.replace('.', '_')}"
    write_table(out_dir / f"{stem}.csv", SWEEP_COLUMNS, ([r[c] for c in SWEEP_COLUMNS] for r in rows))
    summary = {"param": args.param, "values": [float(v) for v in values], "config": cfgmod.echo(base),
               "failed": sum(r["status"] != "ok" for r in rows)}
    write_json(out_dir / f"{stem}_summary.json", _json_safe(summary))
    for r in rows:
        res = r["reweighted_residual"]
        res_txt = f"{res:.4g}" if res is not None else "-"
        print(f"{args.param}={r['value']:g}  {r['status']:6s}  residual={res_txt}  kH-lambda={r['averaged_contraction']:+.4g}")
    return EXIT_OK if summary["failed"] == 0 else EXIT_RUNTIME


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value scenario file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--out-dir", help="directory for CSV and JSON output")
    common.add_argument("--canonical", action="store_true",
                        help="omit runtime so identical configs give identical files")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="unbiased-es", description="Unbiased extremum seeking with delay or diffusion compensation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="simulate a closed-loop scenario").set_defaults(func=cmd_run)
    sub.add_parser("validate", parents=[common], help="check the design conditions").set_defaults(func=cmd_validate)
    sub.add_parser("oracle", parents=[common], help="write averaged-system reference trajectories").set_defaults(func=cmd_oracle)
    sw = sub.add_parser("sweep", parents=[common], help="repeat a run over values of one parameter")
    sw.add_argument("--param", required=True, help="dotted config key, e.g. dither.omega")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, _UsageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, FileNotFoundError) else EXIT_RUNTIME
    except (DomainError, UESError, ArithmeticError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

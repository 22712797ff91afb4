"""Command-line entry point: ``mlqtt run | study | table``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench

__all__ = ["main", "build_parser"]


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or any(isinstance(v, (dict, list)) for v in data.values()):
        raise ValueError("the config file must be a flat JSON object")
    return data


def _parse_sets(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mlqtt", description="Space-time QTT solvers for nonlinear PDE benchmarks.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scheme", choices=sorted(bench._TIME_ORDER), help="time scheme (benchmark default if omitted)")
        p.add_argument("--config", help="flat JSON file with solver settings")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help=f"override one setting; keys: {', '.join(bench.SolverConfig.keys())}")
        p.add_argument("--out", help="output directory for CSV and summary files")

    run = sub.add_parser("run", help="one method on one grid")
    run.add_argument("--method", choices=bench.METHODS, default="ML")
    run.add_argument("--problem", required=True)
    run.add_argument("--qx", type=int, required=True)
    run.add_argument("--qt", type=int)
    common(run)

    study = sub.add_parser("study", help="convergence study over a grid ladder")
    study.add_argument("--method", default="SL,ML,CT", help="comma-separated subset of SL,ML,CT")
    study.add_argument("--problem", required=True)
    study.add_argument("--qx", type=int, nargs="+", required=True, help="ladder of spatial exponents (>= 3)")
    study.add_argument("--qt", type=int, nargs="+", help="matching temporal exponents")
    common(study)

    table = sub.add_parser("table", help="reproduce a benchmark table")
    table.add_argument("name", choices=sorted(bench.TABLES))
    table.add_argument("--max-q", type=int, default=7)
    table.add_argument("--method", default="SL,ML,CT")
    common(table)
    return ap


def _overrides(args) -> dict:
    cfg = _load_config(args.config)
    cfg.update(_parse_sets(args.set))
    if args.scheme:
        cfg["scheme"] = args.scheme
    return cfg


def _methods(text: str) -> list[str]:
    methods = [m.strip().upper() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in bench.METHODS]
    if bad or not methods:
        raise ValueError(f"unknown methods {bad}; choose from {bench.METHODS}")
    return methods


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        ov = _overrides(args)
        if args.command == "run":
            reports = [bench.run_case(args.method, args.problem, args.qx, args.qt, None, ov)]
            slopes = {}
        elif args.command == "study":
            qts = args.qt or [None] * len(args.qx)
            if len(qts) != len(args.qx):
                raise ValueError("--qt must list as many exponents as --qx")
            res = bench.convergence_study(args.problem, _methods(args.method), list(zip(args.qx, qts)), None, ov,
                                          None if args.out is None else Path(args.out) / "study.csv")
            reports, slopes = res.reports, res.slopes
        else:
            res = bench.reproduce_table(args.name, args.max_q, ov, args.out, _methods(args.method))
            reports, slopes = res.reports, res.slopes
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "run" and args.out:
        bench.write_csv(reports, Path(args.out) / "run.csv")
    print(bench.summary_text(reports))
    for m, s in slopes.items():
        print(f"fitted temporal order {m}: {s:.3f}")
    for r in reports:
        if r.error:
            print(f"{r.method} 2^{r.q_x} x 2^{r.q_t}: {r.error}", file=sys.stderr)
    return 0 if all(r.converged for r in reports) else 1


if __name__ == "__main__":
    raise SystemExit(main())

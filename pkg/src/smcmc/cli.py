"""Command line entry point: ``smcmc run | verify | summarize``."""

from __future__ import annotations

import argparse
import logging
import re
import sys
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, parse_config
from .io import CsvFormatError, Table, emit_report, fmt, read_csv, write_csv
from .runner import SUMMARY_HEAD, execute
from .theory import SUITES

log = logging.getLogger("smcmc")

__all__ = ["main", "summarize_runs"]


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.out is not None:
        cfg.output_dir = str(args.out)
    if args.workers is not None and args.workers < 1:
        raise ConfigError("workers: must be >= 1")
    res = execute(cfg, workers=args.workers)
    paths = emit_report(res.tables, cfg.output_dir, res.manifest, res.timings, res.report)
    summ = res.tables.get("summary")
    if summ is not None:
        for h, v in zip(summ.header, summ.rows[0]):
            print(f"{h}: {fmt(v)}")
    print(f"wrote {len(paths)} files to {cfg.output_dir}")
    return 0 if res.passed else 1


def _cmd_verify(args) -> int:
    raw = {
        "algorithm": "verify",
        "seed": args.seed,
        "verify": {"suite": args.suite, "instances": args.instances},
    }
    if args.out is not None:
        raw["output_dir"] = str(args.out)
    cfg = parse_config(raw)
    if args.suite != "all" and args.suite not in SUITES:
        raise ConfigError(f"verify.suite: unknown suite {args.suite!r}; choose from {sorted(SUITES)} or 'all'")
    res = execute(cfg)
    table = res.tables["verify"]
    for row in table.rows:
        rec = dict(zip(table.header, row))
        status = "PASS" if rec["violations"] == 0 else "FAIL"
        extra = f", {rec['flagged']} flagged" if rec["flagged"] else ""
        print(
            f"{status} {rec['check']}: {rec['instances']} instances, {rec['comparisons']} comparisons, "
            f"{rec['violations']} violations (max {rec['max_violation']:.3g}){extra}"
        )
    if args.out is not None:
        emit_report(res.tables, cfg.output_dir, res.manifest, report=res.report)
    return 0 if res.passed else 1


def summarize_runs(paths) -> Table:
    """Table-style comparison of summary CSVs.

    Rows sharing ``algorithm``, ``model`` and ``batch_size`` are treated as
    replicates and every numeric column is averaged over them.  For the mixture
    the ``mean_<j>`` columns are already sorted within each run, and ``sd`` is
    recomputed as the sample sd of their averages.
    """
    groups: "OrderedDict[tuple, list[dict]]" = OrderedDict()
    for p in paths:
        for row in read_csv(p):
            key = (row.get("algorithm"), row.get("model"), row.get("batch_size"))
            groups.setdefault(key, []).append(row)
    skip = set(SUMMARY_HEAD) | {"sd"}
    value_cols: list[str] = []
    for rows in groups.values():
        for c in rows[0]:
            if c not in skip and c not in value_cols:
                value_cols.append(c)
    head = ["algorithm", "model", "batch_size", "replicates", "iterations"] + value_cols + ["sd"]
    table = Table(head)
    for (alg, model, bs), rows in groups.items():
        avg = {c: float(np.mean([float(r[c]) for r in rows])) for c in rows[0] if c not in skip}
        sorted_means = [avg[c] for c in avg if re.fullmatch(r"mean_\d+", c)]
        sd = float(np.std(sorted_means, ddof=1)) if len(sorted_means) > 1 else None
        iters = float(np.mean([float(r["iterations"]) for r in rows]))
        table.rows.append([alg, model, bs, len(rows), iters] + [avg.get(c) for c in value_cols] + [sd])
    return table


def _cmd_summarize(args) -> int:
    table = summarize_runs(args.csv)
    widths = [max(len(h), 10) for h in table.header]
    print("  ".join(h.rjust(w) for h, w in zip(table.header, widths)))
    for row in table.rows:
        cells = []
        for v, w in zip(row, widths):
            s = f"{v:.3f}" if isinstance(v, (float, np.floating)) else ("" if v is None else str(v))
            cells.append(s.rjust(w))
        print("  ".join(cells))
    if args.out is not None:
        write_csv(args.out, table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smcmc", description="Sequential MCMC runs, baselines and bound verification.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a YAML config or a manifest.json")
    r.add_argument("config", type=Path)
    r.add_argument("--out", type=Path, default=None, help="override output_dir")
    r.add_argument("--workers", type=int, default=None, help="override the worker count")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("verify", help="check the convergence bounds on random finite chains")
    v.add_argument("--suite", default="all", help=f"one of {', '.join(SUITES)} or all")
    v.add_argument("--instances", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", type=Path, default=None, help="write verify.csv, report.json and a manifest here")
    v.set_defaults(func=_cmd_verify)

    s = sub.add_parser("summarize", help="compare summary.csv files from several runs")
    s.add_argument("csv", nargs="+", type=Path)
    s.add_argument("--out", type=Path, default=None, help="also write the table as CSV")
    s.set_defaults(func=_cmd_summarize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CsvFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

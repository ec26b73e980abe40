"""Command-line front end.

    driftlab --config run.json [--out DIR] [--quiet]
    driftlab --suite [--config suite.json] [--out DIR]
    driftlab --list

Exit codes: 0 pass, 1 fail, 2 hypothesis violated, 3 configuration error,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import DEFAULT_CONFIGS, RunConfig, config_from_dict, list_experiments, parse_config
from .errors import ConfigurationError, DriftlabError
from .kernels import BACKEND

EXIT_PASS, EXIT_FAIL, EXIT_HYPOTHESIS, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3, 4
LEDGER_HEADER = ["experiment", "verdict", "checks", "passed", "failed_checks", "config_sha256"]

log = logging.getLogger("driftlab")


def _write_table(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in np.atleast_2d(rows):
            w.writerow(["%.17g" % v for v in row])


def execute(cfg: RunConfig):
    """Run the configured experiment and return its report with the config echoed."""
    rep = cfg.info.runner(**cfg.kwargs())
    rep.config = cfg.to_dict()
    return rep


def write_outputs(rep, cfg: RunConfig, out: Path, elapsed: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    body = rep.to_json()
    (out / "report.json").write_text(body, encoding="utf-8")
    if "series" in rep.tables:
        _write_table(out / "series.csv", *rep.tables["series"])
    elif rep.tables:
        _write_table(out / "series.csv", *next(iter(rep.tables.values())))
    for name, (cols, rows) in rep.tables.items():
        if name != "series":
            _write_table(out / f"{name}.csv", cols, rows)
    digest = hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()
    ledger = out / "ledger.csv"
    new = not ledger.exists()
    with open(ledger, "a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(LEDGER_HEADER)
        w.writerow(rep.summary_row() + [digest])
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with open(out / "run.log", "a", encoding="utf-8") as fh:
        fh.write(f"{stamp} experiment={rep.name} verdict={rep.verdict} "
                 f"exit={rep.exit_code} elapsed={elapsed:.3f}s backend={BACKEND} "
                 f"source={cfg.source}\n")


def run(cfg: RunConfig, out_dir=None, quiet: bool = False) -> int:
    """Execute one config and write its files; returns the exit code."""
    out = Path(out_dir or cfg.output_dir or "driftlab_out")
    t0 = time.perf_counter()
    try:
        rep = execute(cfg)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    try:
        write_outputs(rep, cfg, out, time.perf_counter() - t0)
    except OSError as exc:
        log.error("cannot write outputs to %s: %s", out, exc)
        return EXIT_IO
    if not quiet:
        print(f"{rep.name}: {rep.verdict} ({sum(c.passed for c in rep.checks)}/"
              f"{len(rep.checks)} checks) -> {out / 'report.json'}")
        for name in rep.failed_checks():
            print(f"  failed: {name}")
    return rep.exit_code


def _suite_job(args):
    raw, source, out = args
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = config_from_dict(raw, source)
    except ConfigurationError as exc:
        log.error("%s", exc)
        return raw.get("experiment", "?"), EXIT_CONFIG
    return cfg.experiment, run(cfg, out, quiet=True)


def _suite_configs(path) -> list[tuple[dict, str]]:
    if path is None:
        return [(cfg, f"<default:{name}>") for name, cfg in DEFAULT_CONFIGS.items()]
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}: malformed JSON ({exc.msg})") from exc
    runs = raw.get("runs") if isinstance(raw, dict) else raw
    if not isinstance(runs, list) or not runs:
        raise ConfigurationError(f"{path}: a suite file holds a non-empty list under 'runs'")
    return [(r, f"{path}#runs[{i}]") for i, r in enumerate(runs)]


def _combine(codes) -> int:
    for code in (EXIT_CONFIG, EXIT_IO, EXIT_FAIL, EXIT_HYPOTHESIS):
        if code in codes:
            return code
    return EXIT_PASS


def run_suite(config_path=None, out_dir=None, quiet: bool = False, workers: int | None = None) -> int:
    out = Path(out_dir or "driftlab_out")
    configs = _suite_configs(config_path)
    jobs = [(raw, src, out / f"{i:02d}_{raw.get('experiment', 'run')}")
            for i, (raw, src) in enumerate(configs)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_suite_job, jobs))
    if not quiet:
        for name, code in results:
            print(f"{name}: exit {code}")
    return _combine([c for _, c in results])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="driftlab", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", help="experiment config (JSON); a suite file with --suite")
    p.add_argument("--out", help="output directory")
    p.add_argument("--suite", action="store_true",
                   help="run every experiment concurrently, one output folder each")
    p.add_argument("--list", action="store_true", help="list experiments and exit")
    p.add_argument("--quiet", action="store_true", help="only report through the exit code")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.list:
        print(list_experiments())
        return EXIT_PASS
    try:
        if args.suite:
            return run_suite(args.config, args.out, args.quiet)
        if not args.config:
            log.error("--config is required unless --list or --suite is given")
            return EXIT_CONFIG
        cfg = parse_config(args.config)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_IO
    except DriftlabError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    return run(cfg, args.out, args.quiet)


if __name__ == "__main__":
    sys.exit(main())

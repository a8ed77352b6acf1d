"""Command-line scenario runner.

    measlimits list-scenarios
    measlimits run <scenario> [--config FILE] [--grid.n_points=128 ...]
    measlimits report --format json|csv --out PATH

Exit status: 0 when every checked row passes, 1 when any fails, 2 on a
configuration error.  Results go under ``$MEASLIMITS_OUTPUT`` (default
``./measlimits-output``) unless ``output_dir`` is set.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .plotting import emit_series
from .report import all_passed, emit_report, read_json
from .scenarios import (KEYS, SCENARIOS, ConfigError, build_config, list_scenarios,
                        parse_config_text, run_scenario)

ENV_OUTPUT = "MEASLIMITS_OUTPUT"
DEFAULT_OUTPUT = "measlimits-output"

log = logging.getLogger("measlimits")


def output_root(override: str = "") -> Path:
    return Path(override or os.environ.get(ENV_OUTPUT) or DEFAULT_OUTPUT)


def parse_overrides(extra: list[str]) -> dict:
    """``--key=value`` or ``--key value`` pairs into a dict."""
    out, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or tok == "--":
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
        elif i + 1 < len(extra):
            i += 1
            val = extra[i]
        else:
            raise ConfigError(f"missing value for --{key}")
        out[key] = val
        i += 1
    return out


def cmd_list(_args) -> int:
    for name, desc in list_scenarios():
        print(f"{name:28s} {desc}")
    return 0


def cmd_run(args, extra) -> int:
    settings = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        settings.update(parse_config_text(text))
    settings.update(parse_overrides(extra))
    cfg = build_config(args.scenario, settings)
    log.info("running %s", cfg.scenario)
    result = run_scenario(cfg)
    out = output_root(cfg.output_dir) / cfg.scenario
    meta = {"scenario": cfg.scenario, "seconds": round(result.seconds, 3),
            "config": {k: str(v) for k, v in sorted(settings.items())}}
    emit_report(result.rows, "json", out / "report.json", meta)
    emit_report(result.rows, "csv", out / "report.csv")
    emit_series(result.series, out, figures=not args.no_figures)
    for r in result.rows:
        status = "info" if r.passed is None else ("PASS" if r.passed else "FAIL")
        print(f"{status:4s}  {r.metric:40s} {r.value:.6g}")
    ok = all_passed(result.rows)
    print(f"{cfg.scenario}: {'all pass' if ok else 'FAILURES'} ({result.seconds:.1f} s) -> {out}")
    return 0 if ok else 1


def cmd_report(args) -> int:
    root = output_root(args.root)
    rows = []
    for name in SCENARIOS:
        path = root / name / "report.json"
        if path.exists():
            rows.extend(read_json(path))
    emit_report(rows, args.format, args.out)
    print(f"{len(rows)} rows -> {args.out}")
    return 0 if all_passed(rows) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="measlimits", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list-scenarios", help="registered scenario names")
    r = sub.add_parser("run", help="run one scenario",
                       epilog="config keys: " + ", ".join(KEYS) + ", params.<name>")
    r.add_argument("scenario")
    r.add_argument("--config", help="flat key = value file")
    r.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    rep = sub.add_parser("report", help="aggregate scenario reports")
    rep.add_argument("--format", choices=("json", "csv"), required=True)
    rep.add_argument("--out", required=True)
    rep.add_argument("--root", default="", help="output root to scan")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command != "run" and extra:
            raise ConfigError(f"unexpected arguments {extra}")
        if args.command == "list-scenarios":
            return cmd_list(args)
        if args.command == "run":
            return cmd_run(args, extra)
        return cmd_report(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

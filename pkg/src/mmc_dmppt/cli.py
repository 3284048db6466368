"""Command-line entry point: ``mmc-dmppt {run,presets,oracle-check,plot}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import PRESET_NAMES, preset
from .engine import run_scenario, summarize
from .errors import ConfigurationError, NumericalDivergenceError, ScenarioParseError
from .oracle import oracle_check
from .scenario import dump_scenario, parse_scenario
from .traceio import emit_plots, read_trace_csv, write_trace_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_DIVERGENCE = 5
EXIT_ORACLE_MISMATCH = 6
EXIT_IO = 7

OUTPUT_ENV = "MMC_DMPPT_OUTPUT"

log = logging.getLogger("mmc_dmppt")


def default_output_dir():
    return Path(os.environ.get(OUTPUT_ENV, "out"))


def load_config(source, overrides=(), full_duration=False):
    """``source`` is a preset name or a path to a TOML scenario file."""
    if source in PRESET_NAMES:
        text = f'preset = "{source}"\n'
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ScenarioParseError(f"cannot read {source}: {exc.strerror}") from None
    cfg = parse_scenario(text, overrides)
    if full_duration:
        cfg = cfg.with_full_duration()
    return cfg


def summary_dict(summary):
    return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(summary).items()}


def _print_summary(result, stream=None):
    stream = stream or sys.stdout
    s = result.summary
    print(f"scenario {result.config.name}: {result.ticks} ticks, {result.fallbacks} fallbacks", file=stream)
    print(f"  tracking RMS error (% of amplitude): {np.round(s.tracking_rms_pct, 3).tolist()}", file=stream)
    print(f"  max |i_z| (A): {np.round(s.max_abs_i_z, 3).tolist()}", file=stream)
    print(f"  average SM voltage band: {s.avg_v_min_pct:.2f}% .. {s.avg_v_max_pct:.2f}%", file=stream)
    print(f"  max per-arm SM voltage spread: {s.max_arm_spread:.3f} V", file=stream)
    print(f"  PV energy captured: {s.energy.sum():.1f} J", file=stream)


def cmd_run(args):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.decimation is not None:
        overrides.append(f"decimation={args.decimation}")
    cfg = load_config(args.scenario, overrides, args.full_duration)
    out = Path(args.out) if args.out else default_output_dir() / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.toml").write_text(dump_scenario(cfg))
    try:
        result = run_scenario(cfg)
    except NumericalDivergenceError as exc:
        log.error("%s", exc.result.diagnostic if exc.result else exc)
        if exc.result is not None:
            write_trace_csv(exc.result.trace, out / "trace.csv")
        return EXIT_DIVERGENCE
    write_trace_csv(result.trace, out / "trace.csv")
    (out / "summary.json").write_text(json.dumps(summary_dict(result.summary), indent=2))
    if not args.no_plots:
        emit_plots(result.trace, out, ext=args.format)
    _print_summary(result)
    print(f"  outputs in {out}")
    return EXIT_OK


def cmd_presets(args):
    if args.show:
        sys.stdout.write(dump_scenario(preset(args.show, args.full_duration)))
        return EXIT_OK
    for name in PRESET_NAMES:
        cfg = preset(name, args.full_duration)
        print(f"{name:16s} duration={cfg.duration:g} s, groups="
              f"{[g.match for g in cfg.irradiance.groups]}")
    return EXIT_OK


def cmd_oracle(args):
    report = oracle_check(args.trials, args.seed, spread=args.spread)
    for line in report.lines():
        print(line)
    if not report.ok:
        print(json.dumps(report.first_mismatch, indent=2), file=sys.stderr)
        return EXIT_ORACLE_MISMATCH
    return EXIT_OK


def cmd_plot(args):
    trace = read_trace_csv(args.csv)
    out = Path(args.out) if args.out else Path(args.csv).parent
    for name, path in emit_plots(trace, out, ext=args.format).items():
        print(f"{name}: {path}")
    if args.summary:
        print(json.dumps(summary_dict(summarize(trace)), indent=2))
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="mmc-dmppt", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a preset or scenario file")
    r.add_argument("scenario", help=f"preset name ({', '.join(PRESET_NAMES)}) or TOML file")
    r.add_argument("-o", "--out", help=f"output directory (default ${OUTPUT_ENV}/<name> or out/<name>)")
    r.add_argument("-s", "--set", action="append", metavar="KEY=VALUE",
                   help="override a scenario key, e.g. mmc.n=4 (repeatable)")
    r.add_argument("--full-duration", action="store_true", help="3 s run with events at their original times")
    r.add_argument("--seed", type=int)
    r.add_argument("--decimation", type=int)
    r.add_argument("--format", default="png", help="plot file extension (png, svg, pdf)")
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=cmd_run)

    p = sub.add_parser("presets", help="list built-in case studies")
    p.add_argument("--show", choices=PRESET_NAMES, help="print the preset as a scenario file")
    p.add_argument("--full-duration", action="store_true")
    p.set_defaults(func=cmd_presets)

    o = sub.add_parser("oracle-check", help="compare 4-point selection with exhaustive search")
    o.add_argument("--trials", type=int, default=10_000, help="random states per n")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--spread", type=float, default=0.2,
                   help="relative SM voltage spread around nominal")
    o.set_defaults(func=cmd_oracle)

    pl = sub.add_parser("plot", help="render figures from a trace CSV")
    pl.add_argument("csv")
    pl.add_argument("-o", "--out")
    pl.add_argument("--format", default="png")
    pl.add_argument("--summary", action="store_true", help="also print metrics recomputed from the CSV")
    pl.set_defaults(func=cmd_plot)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioParseError as exc:
        log.error("parse error: %s", exc)
        return EXIT_PARSE
    except ConfigurationError as exc:
        log.error("invalid configuration (%s): %s", exc.field or "?", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

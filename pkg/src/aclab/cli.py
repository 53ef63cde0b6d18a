"""Experiment runner CLI.

Subcommands: ``run`` (one preset or ad-hoc configuration), ``sweep`` (one
parameter axis, one run per value), ``gen-trace`` (write a workload trace),
``compare`` (ordering assertions between two run summaries) and ``report``
(render figures from run outputs). Exit codes: 0 ok, 1 failed assertion,
2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import config_to_text, parse_config_file
from .engine import ConfigError
from .presets import PRESET_NAMES, execute_preset, get_preset
from .runner import RunConfig, run
from .workload import WorkloadConfig, generate, trace_from_csv, trace_to_csv

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2


def _add_config_flags(p: argparse.ArgumentParser, qmax: bool = True) -> None:
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--backend", choices=("sc", "ec", "ac"))
    p.add_argument("--topology")
    p.add_argument("--placement", help="comma-separated node names")
    p.add_argument("--seed", type=int)
    p.add_argument("--rate-us", type=int, dest="rate_us")
    p.add_argument("--requests", type=int)
    p.add_argument("--weights", help="comma-separated per-replica weights")
    p.add_argument("--mode", choices=("fast", "batched"))
    p.add_argument("--adaptation", choices=("threshold", "pid", "fixed"))
    p.add_argument("--initial-cl", type=int, dest="initial_cl")
    if qmax:
        p.add_argument("--qmax", type=int, dest="cl_qs_max",
                       help="queue bound of the most relaxed level")
    p.add_argument("--capacity", type=int)
    p.add_argument("--speed-kms", type=float, dest="speed_kms")
    p.add_argument("--delay-scale", type=float, dest="delay_scale")
    p.add_argument("--horizon-ms", type=int, dest="horizon_ms")
    p.add_argument("--label")
    p.add_argument("--trace-in", help="drive the run from an exported trace CSV")


def _build_config(args: argparse.Namespace) -> RunConfig:
    cfg = parse_config_file(args.config) if args.config else RunConfig()
    for key in ("backend", "topology", "seed", "rate_us", "requests", "mode",
                "adaptation", "initial_cl", "cl_qs_max", "capacity", "speed_kms",
                "delay_scale", "horizon_ms", "label"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "placement", None):
        cfg.placement = [p.strip() for p in args.placement.split(",")]
    if getattr(args, "weights", None):
        cfg.weights = [int(w) for w in args.weights.split(",")]
    env_seed = os.environ.get("ACLAB_SEED")
    if env_seed is not None and getattr(args, "seed", None) is None:
        cfg.seed = int(env_seed)
    return cfg


def _outdir(args: argparse.Namespace) -> Path:
    out = getattr(args, "out", None) or os.environ.get("ACLAB_OUT") or "runs"
    return Path(out)


def cmd_run(args: argparse.Namespace) -> int:
    outdir = _outdir(args)
    if args.preset:
        preset = get_preset(args.preset)
        results = execute_preset(preset, outdir)
        for name, result in results.items():
            print(f"{name}: {outdir / name / 'summary.json'}")
        return EXIT_OK
    cfg = _build_config(args)
    trace = None
    if args.trace_in:
        trace = trace_from_csv(Path(args.trace_in).read_text())
    result = run(cfg, trace=trace)
    summary_path = result.write_outputs(outdir)
    (outdir / "config.txt").write_text(config_to_text(cfg))
    print(summary_path)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    outdir = _outdir(args)
    values = [int(v) for v in args.qmax_values.split(",")]
    trace = None
    for qmax in values:
        sub = replace(cfg, cl_qs_max=qmax, label=f"qmax{qmax}")
        result = run(sub, trace=trace)
        trace = result.trace
        path = result.write_outputs(outdir / f"qmax{qmax}")
        print(path)
    return EXIT_OK


def cmd_gen_trace(args: argparse.Namespace) -> int:
    weights = [int(w) for w in args.weights.split(",")] if args.weights else [1, 1, 2, 1, 5]
    cfg = WorkloadConfig(args.rate_us, args.requests, weights, args.seed)
    trace = generate(cfg)
    text = trace_to_csv(trace)
    if args.out:
        Path(args.out).write_text(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _lookup(summary: dict, path: str):
    cur = summary
    for part in path.split("."):
        if isinstance(cur, dict) and part in cur:
            cur = cur[part]
        else:
            raise KeyError(f"summary has no {path!r} (failed at {part!r})")
    return cur


def _eval_check(check: str, a: dict, b: dict) -> tuple[bool, str]:
    for op in ("<=", ">=", "<", ">"):
        if op in check:
            left_s, right_s = (s.strip() for s in check.split(op, 1))
            break
    else:
        raise ConfigError(f"check {check!r} needs one of < > <= >=")

    def side(expr: str):
        tag, _, path = expr.partition(":")
        if tag == "a":
            return _lookup(a, path)
        if tag == "b":
            return _lookup(b, path)
        return float(expr)

    lv, rv = side(left_s), side(right_s)
    ok = {"<": lv < rv, ">": lv > rv, "<=": lv <= rv, ">=": lv >= rv}[op]
    return ok, f"{check}  [{lv!r} vs {rv!r}]"


def cmd_compare(args: argparse.Namespace) -> int:
    a = json.loads(Path(args.run_a).read_text())
    b = json.loads(Path(args.run_b).read_text())
    sha_a = a.get("extra", {}).get("trace_sha")
    sha_b = b.get("extra", {}).get("trace_sha")
    if sha_a != sha_b:
        print("refusing to compare: runs were driven by different traces",
              file=sys.stderr)
        return EXIT_CONFIG
    failures = 0
    for check in args.check or []:
        ok, detail = _eval_check(check, a, b)
        print(("PASS " if ok else "FAIL ") + detail)
        if not ok:
            failures += 1
    if not args.check:
        for key in ("backend", "distribution_time_us"):
            print(f"a.{key} = {a.get(key)!r}   b.{key} = {b.get(key)!r}")
    return EXIT_ASSERTION if failures else EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    from .report import render_all  # matplotlib import deferred to use

    run_dirs = [Path(d) for d in args.run_dirs]
    for d in run_dirs:
        if not (d / "summary.json").exists():
            print(f"{d} has no summary.json", file=sys.stderr)
            return EXIT_CONFIG
    out = Path(args.out) if args.out else run_dirs[0]
    made = render_all(run_dirs, out)
    for p in made:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aclab",
        description="Replicated data-store laboratory: run, sweep, compare.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one run or a bundled preset")
    p_run.add_argument("--preset", choices=PRESET_NAMES)
    p_run.add_argument("--out")
    _add_config_flags(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a qmax sweep over one trace")
    p_sweep.add_argument("--qmax", dest="qmax_values", required=True,
                         help="comma-separated queue bounds, e.g. 5,10,15")
    p_sweep.add_argument("--out")
    _add_config_flags(p_sweep, qmax=False)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_gen = sub.add_parser("gen-trace", help="generate a workload trace CSV")
    p_gen.add_argument("--rate-us", type=int, dest="rate_us", default=2000)
    p_gen.add_argument("--requests", type=int, default=1000)
    p_gen.add_argument("--weights")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out")
    p_gen.set_defaults(fn=cmd_gen_trace)

    p_cmp = sub.add_parser("compare", help="assert orderings between two runs")
    p_cmp.add_argument("run_a", help="first summary.json")
    p_cmp.add_argument("run_b", help="second summary.json")
    p_cmp.add_argument("--check", action="append",
                       help="e.g. 'a:messages.total_messages < b:messages.total_messages'")
    p_cmp.set_defaults(fn=cmd_compare)

    p_rep = sub.add_parser("report", help="render figures from run outputs")
    p_rep.add_argument("run_dirs", nargs="+")
    p_rep.add_argument("--out")
    p_rep.set_defaults(fn=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

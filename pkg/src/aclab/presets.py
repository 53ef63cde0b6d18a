"""Bundled experiment presets.

Each preset reproduces one desk-scale experiment: a shared seeded trace
drives one or more backend runs so their metrics are directly comparable.
Seeds are pinned so every preset is reproducible byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .runner import RunConfig, RunResult, run

FIG8_PLACEMENT = ["Seattle", "Chicago", "Washington_DC", "Atlanta", "New_York"]


@dataclass
class Preset:
    name: str
    description: str
    runs: list[tuple[str, RunConfig]]


def _fig3() -> Preset:
    base = RunConfig(backend="ac", topology="internet2", rate_us=2000,
                     requests=600, seed=1103, mode="fast")
    return Preset(
        "fig3-adaptation",
        "Consistency-level adaptation traces: threshold vs PID policy.",
        [("ac-threshold", replace(base, adaptation="threshold", label="ac-threshold")),
         ("ac-pid", replace(base, adaptation="pid", label="ac-pid"))])


def _fig4() -> Preset:
    base = RunConfig(topology="fattree", rate_us=2000, requests=500, seed=404)
    return Preset(
        "fig4-fattree-cdf",
        "Inefficiency CDFs on the fat-tree: eventual vs adaptive modes.",
        [("ec", replace(base, backend="ec", label="ec")),
         ("ac-fast", replace(base, backend="ac", mode="fast", label="ac-fast")),
         ("ac-batched", replace(base, backend="ac", mode="batched", label="ac-batched"))])


def _fig6() -> Preset:
    base = RunConfig(topology="internet2", rate_us=2000, requests=1500, seed=606)
    return Preset(
        "fig6-internet2-cdf",
        "Inefficiency CDFs on Internet2: eventual vs adaptive policies.",
        [("ec", replace(base, backend="ec", label="ec")),
         ("ac-threshold", replace(base, backend="ac", adaptation="threshold",
                                  label="ac-threshold")),
         ("ac-pid", replace(base, backend="ac", adaptation="pid", label="ac-pid"))])


def _fig7() -> Preset:
    base = RunConfig(backend="ac", topology="internet2", rate_us=2000,
                     requests=900, seed=707, mode="fast")
    runs = []
    for qmax in (5, 10, 15):
        runs.append((f"qmax{qmax}",
                     replace(base, cl_qs_max=qmax, label=f"qmax{qmax}")))
    return Preset(
        "fig7-qmax",
        "Mean inefficiency sensitivity to the most-relaxed queue bound.",
        runs)


def _fig8() -> Preset:
    base = RunConfig(topology="internet2", placement=list(FIG8_PLACEMENT),
                     rate_us=5000, requests=1000, seed=806)
    return Preset(
        "fig8-commit",
        "Commit-time distributions: adaptive quorums vs serialized log.",
        [("ac", replace(base, backend="ac", mode="fast", label="ac")),
         ("sc", replace(base, backend="sc", label="sc"))])


def _table2() -> Preset:
    # The adaptive rows run pinned at the strictest level: the overhead
    # comparison isolates the distribution mechanics (admission blocking,
    # batching) from level churn.
    base = RunConfig(topology="internet2", rate_us=2000, requests=1000,
                     weights=[1, 1, 1, 1, 1], seed=202)
    ac = replace(base, backend="ac", adaptation="fixed", initial_cl=0)
    return Preset(
        "table2-overhead",
        "Distribution time and message overhead on a uniform trace.",
        [("ec", replace(base, backend="ec", label="ec")),
         ("ac-fast", replace(ac, mode="fast", label="ac-fast")),
         ("ac-batched", replace(ac, mode="batched", label="ac-batched")),
         ("sc", replace(base, backend="sc", label="sc"))])


_BUILDERS = {
    "fig3-adaptation": _fig3,
    "fig4-fattree-cdf": _fig4,
    "fig6-internet2-cdf": _fig6,
    "fig7-qmax": _fig7,
    "fig8-commit": _fig8,
    "table2-overhead": _table2,
}

PRESET_NAMES = tuple(sorted(_BUILDERS))


def get_preset(name: str) -> Preset:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESET_NAMES}") from None


def execute_preset(preset: Preset, outdir: str | Path) -> dict[str, RunResult]:
    """Run every configuration of the preset against one shared trace."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    trace = None
    results: dict[str, RunResult] = {}
    for run_name, cfg in preset.runs:
        result = run(cfg, trace=trace)
        trace = result.trace  # the first run's trace drives all later ones
        result.write_outputs(outdir / run_name)
        results[run_name] = result
    return results

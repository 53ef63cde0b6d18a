"""Figure rendering for run outputs.

Reads the delimited files a run leaves behind and renders the standard
figures next to them: consistency-level adaptation traces, inefficiency
CDFs, commit-time box plots and per-replica message-load bars. The
collectors themselves stay plot-free; this module only consumes their CSVs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _read_csv(path: Path) -> list[dict[str, str]]:
    if not path.exists():
        return []
    with path.open() as fh:
        return list(csv.DictReader(fh))


def _label_of(run_dir: Path) -> str:
    summary = run_dir / "summary.json"
    if summary.exists():
        data = json.loads(summary.read_text())
        return data.get("backend") or run_dir.name
    return run_dir.name


def render_cl_trace(run_dir: Path, out: Path) -> Path | None:
    rows = _read_csv(run_dir / "cl_trace.csv")
    rows = [r for r in rows if r["replica"] == "0"]
    if not rows:
        return None
    fig, ax = plt.subplots(figsize=(7, 3.2))
    states = sorted({r["state"] for r in rows})
    for state in states:
        pts = [(int(r["time_us"]) / 1e6, int(r["level"])) for r in rows
               if r["state"] == state]
        xs, ys = zip(*pts)
        ax.step(xs, ys, where="post", label=state)
    ax.set_xlabel("virtual time [s]")
    ax.set_ylabel("applied consistency level")
    ax.set_title(f"Level adaptation ({_label_of(run_dir)})")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    path = out / f"cl-trace-{run_dir.name}.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def render_ineff_cdf(run_dirs: list[Path], out: Path) -> Path | None:
    fig, ax = plt.subplots(figsize=(6, 3.6))
    plotted = False
    for run_dir in run_dirs:
        rows = _read_csv(run_dir / "inefficiency.csv")
        values = sorted(float(r["phi"]) for r in rows)
        if not values:
            continue
        n = len(values)
        ax.step(values, [(i + 1) / n for i in range(n)], where="post",
                label=_label_of(run_dir))
        plotted = True
    if not plotted:
        plt.close(fig)
        return None
    ax.set_xlabel("inefficiency ratio")
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    path = out / "inefficiency-cdf.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def render_commit_box(run_dirs: list[Path], out: Path) -> Path | None:
    series: dict[str, list[float]] = {}
    for run_dir in run_dirs:
        for r in _read_csv(run_dir / "commits.csv"):
            series.setdefault(r["label"], []).append(int(r["latency_us"]) / 1000.0)
    if not series:
        return None
    labels = sorted(series)
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.boxplot([series[l] for l in labels], tick_labels=labels, whis=(0, 100))
    ax.set_ylabel("commit time [ms]")
    ax.grid(True, axis="y", alpha=0.3)
    fig.autofmt_xdate(rotation=20)
    path = out / "commit-times.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def render_overhead(run_dirs: list[Path], out: Path) -> Path | None:
    rows = []
    for run_dir in run_dirs:
        summary = run_dir / "summary.json"
        if not summary.exists():
            continue
        data = json.loads(summary.read_text())
        span = data.get("distribution_time_us")
        msgs = data.get("messages", {})
        rows.append((_label_of(run_dir),
                     (span or 0) / 1e6,
                     msgs.get("total_messages", 0),
                     msgs.get("mean_size", 0.0)))
    if not rows:
        return None
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.2))
    names = [r[0] for r in rows]
    for ax, (title, idx) in zip(axes, [("distribution time [s]", 1),
                                       ("messages", 2),
                                       ("mean frame size [B]", 3)]):
        ax.bar(names, [r[idx] for r in rows])
        ax.set_title(title, fontsize=9)
        ax.tick_params(axis="x", rotation=25, labelsize=8)
        ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    path = out / "overhead.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def render_all(run_dirs: list[Path], out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    made: list[Path] = []
    for run_dir in run_dirs:
        p = render_cl_trace(run_dir, out)
        if p:
            made.append(p)
    for fn in (render_ineff_cdf, render_commit_box, render_overhead):
        p = fn(run_dirs, out)
        if p:
            made.append(p)
    return made

"""Append-only run collectors and their CSV/JSON export.

Collectors never mutate protocol state and never schedule events, so
enabling or disabling them cannot change a run's event trace. Files are
written with a stable column order and sorted JSON keys so identical runs
produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

COMMITS_COLUMNS = ["label", "origin", "request_id", "latency_us"]
INEFF_COLUMNS = ["time_us", "replica", "state", "phi", "applied_level"]
DECISIONS_COLUMNS = ["request_id", "arrival_us", "origin", "backend", "status",
                     "server", "cost", "view_after"]
CL_COLUMNS = ["time_us", "replica", "state", "level"]
MESSAGES_COLUMNS = ["replica", "messages", "bytes", "mean_size"]
OCCUPANCY_COLUMNS = ["time_us", "replica", "state", "occupancy", "bound"]


def percentile(values: list[float], q: float) -> float:
    """Nearest-rank percentile on a non-empty value list."""
    if not values:
        raise ValueError("no samples")
    ordered = sorted(values)
    rank = max(1, round(q / 100 * len(ordered)))
    return ordered[min(rank, len(ordered)) - 1]


def cdf_points(values: list[float]) -> list[tuple[float, float]]:
    """Empirical CDF as (value, cumulative probability) steps."""
    n = len(values)
    return [(v, (i + 1) / n) for i, v in enumerate(sorted(values))]


class Metrics:
    def __init__(self, backend: str = ""):
        self.backend = backend
        self.commits: list[tuple[str, int, int, int]] = []
        self.ineff: list[tuple[int, int, str, float, int]] = []
        self.decisions: list[tuple[int, int, int, str, str, int, int, str]] = []
        self.cl_changes: list[tuple[int, int, str, int]] = []
        self.occupancy: list[tuple[int, int, str, int, int]] = []
        self.msg_count: dict[int, int] = {}
        self.msg_bytes: dict[int, int] = {}
        self.first_arrival_us: int | None = None
        self.last_full_ack_us: int | None = None
        self.admission_rejections = 0
        self.extra: dict[str, object] = {}

    # -- recorders -----------------------------------------------------------

    def record_commit(self, label: str, origin: int, request_id: int, latency_us: int) -> None:
        self.commits.append((label, origin, request_id, latency_us))

    def record_ineff(self, time_us: int, replica: int, state: str, phi: float,
                     level: int) -> None:
        self.ineff.append((time_us, replica, state, phi, level))

    def record_decision(self, request_id: int, arrival_us: int, origin: int,
                        status: str, server: int | None, cost: int,
                        view_after: tuple[int, ...]) -> None:
        self.decisions.append((request_id, arrival_us, origin, self.backend, status,
                               -1 if server is None else server, cost,
                               "|".join(str(v) for v in view_after)))

    def record_cl_change(self, time_us: int, replica: int, state: str, level: int) -> None:
        self.cl_changes.append((time_us, replica, state, level))

    def record_occupancy(self, time_us: int, replica: int, state: str,
                         occupancy: int, bound: int) -> None:
        self.occupancy.append((time_us, replica, state, occupancy, bound))

    def record_message(self, src: int, size: int) -> None:
        self.msg_count[src] = self.msg_count.get(src, 0) + 1
        self.msg_bytes[src] = self.msg_bytes.get(src, 0) + size

    def note_arrival(self, time_us: int) -> None:
        if self.first_arrival_us is None:
            self.first_arrival_us = time_us

    def note_full_ack(self, time_us: int) -> None:
        if self.last_full_ack_us is None or time_us > self.last_full_ack_us:
            self.last_full_ack_us = time_us

    def note_admission_rejection(self) -> None:
        self.admission_rejections += 1

    # -- summaries --------------------------------------------------------------

    def commit_stats(self) -> dict[str, dict[str, float]]:
        by_label: dict[str, list[int]] = {}
        for label, _, _, latency in self.commits:
            by_label.setdefault(label, []).append(latency)
        out = {}
        for label in sorted(by_label):
            vals = [float(v) for v in by_label[label]]
            out[label] = {
                "count": len(vals),
                "min": min(vals),
                "median": percentile(vals, 50),
                "p95": percentile(vals, 95),
                "max": max(vals),
            }
        return out

    def phi_stats(self) -> dict[str, float | int | bool]:
        vals = [p for _, _, _, p, _ in self.ineff]
        if not vals:
            return {"count": 0}
        return {
            "count": len(vals),
            "mean": sum(vals) / len(vals),
            "max": max(vals),
            "all_one": all(abs(v - 1.0) < 1e-12 for v in vals),
        }

    def occupancy_stats(self) -> dict[str, int]:
        worst = 0
        violations = 0
        for _, _, _, occ, bound in self.occupancy:
            worst = max(worst, occ)
            if bound >= 0 and occ > bound:
                violations += 1
        return {"max": worst, "bound_violations": violations}

    def message_stats(self) -> dict[str, object]:
        total = sum(self.msg_count.values())
        total_bytes = sum(self.msg_bytes.values())
        per_replica = []
        for r in sorted(self.msg_count):
            count, size = self.msg_count[r], self.msg_bytes[r]
            per_replica.append({
                "replica": r, "messages": count, "bytes": size,
                "mean_size": size / count if count else 0.0,
            })
        return {
            "total_messages": total,
            "total_bytes": total_bytes,
            "mean_size": total_bytes / total if total else 0.0,
            "per_replica": per_replica,
        }

    def distribution_time_us(self) -> int | None:
        if self.first_arrival_us is None or self.last_full_ack_us is None:
            return None
        return self.last_full_ack_us - self.first_arrival_us

    def cl_change_count(self, replica: int) -> int:
        last: dict[str, int] = {}
        changes = 0
        for _, rep, state, level in self.cl_changes:
            if rep != replica:
                continue
            if state in last and last[state] != level:
                changes += 1
            last[state] = level
        return changes

    def summary(self, config: dict | None = None) -> dict:
        span = self.distribution_time_us()
        msg = self.message_stats()
        statuses: dict[str, int] = {}
        for row in self.decisions:
            statuses[row[4]] = statuses.get(row[4], 0) + 1
        out = {
            "backend": self.backend,
            "commit_latency_us": self.commit_stats(),
            "phi": self.phi_stats(),
            "occupancy": self.occupancy_stats(),
            "messages": msg,
            "distribution_time_us": span,
            "load_bytes_per_s": (msg["total_bytes"] / (span / 1e6)
                                 if span else None),
            "decision_statuses": dict(sorted(statuses.items())),
            "admission_rejections": self.admission_rejections,
            "cl_changes_owner": self.cl_change_count(0),
        }
        if self.extra:
            out["extra"] = dict(sorted(self.extra.items()))
        if config is not None:
            out["config"] = config
        return out

    # -- export -----------------------------------------------------------------

    def _csv(self, columns: list[str], rows) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(row)
        return buf.getvalue()

    def write_outputs(self, outdir: str | Path, config: dict | None = None) -> Path:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        files = {
            "commits.csv": self._csv(COMMITS_COLUMNS, self.commits),
            "inefficiency.csv": self._csv(
                INEFF_COLUMNS,
                [(t, r, s, repr(p), l) for t, r, s, p, l in self.ineff]),
            "decisions.csv": self._csv(DECISIONS_COLUMNS, self.decisions),
            "cl_trace.csv": self._csv(CL_COLUMNS, self.cl_changes),
            "messages.csv": self._csv(
                MESSAGES_COLUMNS,
                [(r["replica"], r["messages"], r["bytes"], repr(r["mean_size"]))
                 for r in self.message_stats()["per_replica"]]),
            "occupancy.csv": self._csv(OCCUPANCY_COLUMNS, self.occupancy),
        }
        for name, text in files.items():
            (outdir / name).write_text(text)
        summary_path = outdir / "summary.json"
        summary_path.write_text(
            json.dumps(self.summary(config), sort_keys=True, indent=2) + "\n")
        return summary_path

"""Seeded request-trace generation and CSV round-tripping.

Inter-arrival gaps are i.i.d. exponential; each request's origin replica is
drawn categorically from the configured weights; costs are uniform integers.
The trace is fully determined by the seed so the same trace can drive the
strong, eventual and adaptive backends for a fair comparison.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field

from .engine import derive_seed

TRACE_COLUMNS = ["request_id", "arrival_us", "origin", "service_type", "cost"]


@dataclass(frozen=True)
class ServiceRequest:
    request_id: int
    arrival_us: int
    origin: int
    service_type: int
    cost: int


@dataclass
class WorkloadConfig:
    mean_interarrival_us: int = 2000
    total_requests: int = 1000
    weights: list[int] = field(default_factory=lambda: [1, 1, 2, 1, 5])
    seed: int = 0
    cost_min: int = 500
    cost_max: int = 600
    service_types: int = 2

    def validate(self) -> None:
        if self.mean_interarrival_us <= 0:
            raise ValueError("mean inter-arrival must be positive")
        if any(w < 1 for w in self.weights):
            raise ValueError("weights must be at least 1")
        if not self.weights:
            raise ValueError("need one weight per replica")
        if self.cost_min > self.cost_max:
            raise ValueError("empty cost range")


def generate(cfg: WorkloadConfig) -> list[ServiceRequest]:
    cfg.validate()
    rng = random.Random(derive_seed(cfg.seed, "workload"))
    origins = list(range(len(cfg.weights)))
    out: list[ServiceRequest] = []
    t = 0
    for rid in range(cfg.total_requests):
        gap = rng.expovariate(1.0 / cfg.mean_interarrival_us)
        t += max(1, round(gap))
        origin = rng.choices(origins, weights=cfg.weights)[0]
        stype = rng.randrange(cfg.service_types)
        cost = rng.randint(cfg.cost_min, cfg.cost_max)
        out.append(ServiceRequest(rid, t, origin, stype, cost))
    return out


def trace_to_csv(trace: list[ServiceRequest]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for r in trace:
        writer.writerow([r.request_id, r.arrival_us, r.origin, r.service_type, r.cost])
    return buf.getvalue()


def trace_from_csv(text: str) -> list[ServiceRequest]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != TRACE_COLUMNS:
        raise ValueError(f"unexpected trace header {header!r}")
    return [ServiceRequest(int(a), int(b), int(c), int(d), int(e))
            for a, b, c, d, e in reader]

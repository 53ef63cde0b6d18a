"""Run assembly: configuration, backend construction, execution, summary.

One :func:`run` call executes one deterministic simulation: it builds the
delay matrix from the topology, wires up the chosen backend's replicas,
schedules the workload trace (and any failure schedule), drives the event
loop until every request resolved and all queues drained (or a horizon is
reached), and returns the collected metrics.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .adaptation import Oca, PidConfig, ThresholdConfig
from .audit import RaftAuditor
from .distribution import EVENTUAL, FAST, MODES, build_cl_table
from .engine import ConfigError, Simulator
from .metrics import Metrics
from .replica import CrdtReplica
from .sc import ScReplica
from .topology import build_delay_matrix, load_topology
from .wire import Codec
from .workload import ServiceRequest, WorkloadConfig, generate, trace_to_csv

BACKENDS = ("sc", "ec", "ac")
DATA_DIR = Path(__file__).parent / "data"

DEFAULT_WEIGHTS = {5: [1, 1, 2, 1, 5], 4: [1, 2, 2, 5]}


@dataclass
class RunConfig:
    backend: str = "ac"
    topology: str = "internet2"
    placement: list[str] | None = None
    speed_kms: float | None = None
    delay_scale: float = 1.0
    local_loop_us: int = 10
    servers: int = 2
    capacity: int = 10 ** 9
    rate_us: int = 2000
    requests: int = 1000
    weights: list[int] | None = None
    seed: int = 0
    mode: str = "fast"
    adaptation: str = "threshold"
    cl_levels: int = 11
    cl_qs_min: int = 3
    cl_qs_max: int = 15
    cl_to_min_ms: int = 100
    cl_to_max_ms: int = 1000
    initial_cl: int = 3
    oca_owner: int = 0
    commit_ws: list[int] = field(default_factory=lambda: [3, 5])
    pi_window: int = 256
    phi_cap: float = 10.0
    t_upper: float = 3.5
    t_lower: float = 1.5
    adapt_window: int = 5
    p_gain: float = 0.2
    i_gain: float = 0.2
    d_gain: float = 0.1
    pid_target: float = 2.0
    election_min_ms: int = 150
    election_max_ms: int = 300
    sc_retry_ms: int = 500
    horizon_ms: int | None = None
    label: str = ""

    def validate(self) -> None:
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown distribution mode {self.mode!r}")
        if self.adaptation not in ("threshold", "pid", "fixed"):
            raise ConfigError(f"unknown adaptation policy {self.adaptation!r}")
        if not 0 <= self.initial_cl < self.cl_levels:
            raise ConfigError("initial_cl outside the level table")
        if self.servers < 1:
            raise ConfigError("need at least one server")
        if self.rate_us <= 0 or self.requests < 0:
            raise ConfigError("bad workload parameters")
        if self.cl_qs_min < 1 or self.cl_qs_max < self.cl_qs_min:
            raise ConfigError("bad queue-size bounds")
        if any(w < 1 for w in self.commit_ws):
            raise ConfigError("commit_ws entries must be >= 1")

    def states(self) -> list[str]:
        return [f"lb/server-{i}" for i in range(self.servers)]

    def workload(self) -> WorkloadConfig:
        return WorkloadConfig(self.rate_us, self.requests,
                              list(self.weights or []), self.seed)


@dataclass
class RunResult:
    config: RunConfig
    trace: list[ServiceRequest]
    metrics: Metrics | None
    engine: Simulator
    replicas: list
    auditor: RaftAuditor | None

    def summary(self) -> dict:
        if self.metrics is None:
            return {}
        return self.metrics.summary(asdict(self.config))

    def write_outputs(self, outdir: str | Path) -> Path:
        if self.metrics is None:
            raise ValueError("run executed without metrics")
        return self.metrics.write_outputs(outdir, asdict(self.config))


def resolve_topology(name: str):
    path = Path(name)
    if not path.exists():
        path = DATA_DIR / f"{name}.topo"
    if not path.exists():
        raise ConfigError(f"unknown topology {name!r}")
    return load_topology(path)


def run(config: RunConfig,
        trace: list[ServiceRequest] | None = None,
        metrics_enabled: bool = True,
        failure_schedule: list[tuple[int, str, int]] | None = None) -> RunResult:
    config.validate()
    topo = resolve_topology(config.topology)
    if config.placement:
        topo.placement = list(config.placement)
        topo.validate()
    n = len(topo.placement)
    if n < 1:
        raise ConfigError("placement is empty")
    if config.weights is None:
        config.weights = DEFAULT_WEIGHTS.get(n, [1] * n)
    if len(config.weights) != n:
        raise ConfigError(f"{len(config.weights)} weights for {n} replicas")
    if not 0 <= config.oca_owner < n:
        raise ConfigError("oca_owner outside the placement")

    matrix = build_delay_matrix(topo, seed=config.seed,
                                delay_scale=config.delay_scale,
                                local_loop_us=config.local_loop_us,
                                speed_kms=config.speed_kms)
    engine = Simulator(config.seed, config.local_loop_us)
    engine.delay_us = matrix
    states = config.states()
    codec = Codec(states)
    metrics = Metrics(config.label or config.backend) if metrics_enabled else None
    if metrics is not None:
        engine.on_message = lambda src, dst, msg, size: metrics.record_message(src, size)

    if trace is None:
        trace = generate(config.workload())
    completed: set[int] = set()
    capacities = [config.capacity] * config.servers
    auditor: RaftAuditor | None = None

    if config.backend == "sc":
        auditor = RaftAuditor()
        replicas = [
            ScReplica(
                r, engine, codec, states,
                capacities=capacities,
                election_range_us=(config.election_min_ms * 1000,
                                   config.election_max_ms * 1000),
                retry_us=config.sc_retry_ms * 1000,
                pi_window=config.pi_window, phi_cap=config.phi_cap,
                metrics=metrics, audit=auditor.record,
                on_complete=completed.add)
            for r in range(n)
        ]
        for rep in replicas:
            rep.start()
    else:
        mode = EVENTUAL if config.backend == "ec" else config.mode
        cl_table = build_cl_table(config.cl_levels, config.cl_qs_min,
                                  config.cl_qs_max, config.cl_to_min_ms,
                                  config.cl_to_max_ms)
        initial = config.cl_levels - 1 if config.backend == "ec" else config.initial_cl
        replicas = []
        for r in range(n):
            oca = None
            if config.backend == "ac" and r == config.oca_owner:
                oca = Oca(config.adaptation, states, config.cl_levels, initial,
                          ThresholdConfig(config.t_upper, config.t_lower,
                                          config.adapt_window),
                          PidConfig(config.p_gain, config.i_gain, config.d_gain,
                                    config.pid_target, config.adapt_window))
            replicas.append(CrdtReplica(
                r, engine, codec, states, mode, cl_table, initial,
                capacities=capacities, oca=oca, oca_owner=config.oca_owner,
                commit_ws=tuple(w for w in config.commit_ws if 1 < w <= n),
                pi_window=config.pi_window, phi_cap=config.phi_cap,
                metrics=metrics, on_complete=completed.add))

    for req in trace:
        if not 0 <= req.origin < n:
            raise ConfigError(f"trace request {req.request_id} targets "
                              f"unknown replica {req.origin}")
        engine.schedule_at(req.arrival_us, req.origin, "request", req)

    if failure_schedule:
        admin = n
        engine.register(admin, lambda kind, payload: (
            engine.fail(payload) if kind == "fail" else engine.recover(payload)))
        for t, op, rep in failure_schedule:
            if op not in ("fail", "recover"):
                raise ConfigError(f"bad failure op {op!r}")
            engine.schedule_at(t, admin, op, rep)

    total = len(trace)
    if config.backend == "sc":
        def settled() -> bool:
            return len(completed) >= total
    else:
        def settled() -> bool:
            if len(completed) < total:
                return False
            return all(rep.idle() for rep in replicas)

    horizon = config.horizon_ms * 1000 if config.horizon_ms else None
    if failure_schedule and horizon is None:
        raise ConfigError("failure schedules need an explicit horizon")
    engine.run(until_us=horizon, stop_when=None if failure_schedule else settled)

    if metrics is not None:
        trace_csv = trace_to_csv(trace)
        metrics.extra["trace_sha"] = hashlib.sha256(trace_csv.encode()).hexdigest()
        metrics.extra["event_trace_hash"] = engine.trace_hash()
        metrics.extra["completed_requests"] = len(completed)
        finals = {}
        for r, rep in enumerate(replicas):
            if config.backend == "sc":
                finals[str(r)] = {s: rep.counters[s] for s in states}
            else:
                finals[str(r)] = {s: rep.store.query(s) for s in states}
        metrics.extra["final_counters"] = finals
    return RunResult(config, trace, metrics, engine, replicas, auditor)

"""Performance inspection: replay-based inefficiency of past embed decisions.

Whenever a remote update finally arrives, the local replica asks what it
*would* have decided had that update been serialized at its own timestamp:
it rebuilds the utilization view from every logged update older than the
remote one, inserts the remote update there, and re-runs the embed logic for
each of its own later decisions. The actual and recomputed decision histories
are then compared offset by offset through the population standard deviation
of their utilization vectors; the inefficiency ratio is the quotient of the
summed deviations (1 = the replica already decided optimally).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .crdt import UpdateRecord
from .lb import choose_server

DEFAULT_CAP = 10.0  # reported when the optimal history is perfectly balanced
DEFAULT_WINDOW = 256


@dataclass(frozen=True)
class LoggedDecision:
    """A local embed decision tied to the update it produced."""

    key: tuple[int, int, int]  # the update's log-order key
    cost: int
    server: int | None


@dataclass(frozen=True)
class InefficiencyReport:
    state: str
    phi: float
    computed_at: int
    window_span: int


def pstdev(values: Sequence[float]) -> float:
    n = len(values)
    mean = sum(values) / n
    return math.sqrt(sum((v - mean) ** 2 for v in values) / n)


def comp_inefficiency(actual: Sequence[Sequence[int]],
                      optimal: Sequence[Sequence[int]],
                      cap: float = DEFAULT_CAP) -> tuple[float, list[int]]:
    """Ratio of summed per-offset deviations, plus the suboptimality flags.

    Offsets where both histories are perfectly balanced contribute nothing
    and are dropped. If only the optimal history is balanced everywhere, the
    configured cap stands in for the undefined ratio so the "worse than
    optimal" signal survives.
    """
    if len(actual) != len(optimal):
        raise ValueError("histories must cover the same request sequence")
    if not actual:
        raise ValueError("histories must be non-empty")
    sum_u = 0.0
    sum_o = 0.0
    flags: list[int] = []
    for act, opt in zip(actual, optimal):
        su = pstdev(act)
        so = pstdev(opt)
        flags.append(1 if su > so else 0)
        if su == 0.0 and so == 0.0:
            continue
        sum_u += su
        sum_o += so
    if sum_o == 0.0:
        return (1.0 if sum_u == 0.0 else cap), flags
    return sum_u / sum_o, flags


class Inspector:
    """Per-replica PI block for one set of load-balanced server counters."""

    def __init__(self, servers: Sequence[str],
                 capacities: Sequence[int] | None = None,
                 window: int = DEFAULT_WINDOW, cap: float = DEFAULT_CAP):
        self.servers = list(servers)
        self.capacities = list(capacities) if capacities is not None else None
        self.window = window
        self.cap = cap
        self.decisions: list[LoggedDecision] = []

    def record_decision(self, update: UpdateRecord, cost: int,
                        server: int | None) -> None:
        self.decisions.append(LoggedDecision(update.key, cost, server))
        if len(self.decisions) > 4 * self.window:
            del self.decisions[: -2 * self.window]

    def on_remote_update(self, remote: UpdateRecord,
                         logs: dict[str, list[UpdateRecord]],
                         now: int) -> InefficiencyReport:
        """Replay decisions made after the remote update's timestamp."""
        base = [0] * len(self.servers)
        for j, server in enumerate(self.servers):
            for rec in logs.get(server, ()):
                if rec.key < remote.key:
                    base[j] += rec.signed_amount()

        affected = sorted((d for d in self.decisions if d.key > remote.key),
                          key=lambda d: d.key)
        affected = affected[-self.window:]

        remote_idx = self.servers.index(remote.state)
        start = list(base)
        start[remote_idx] += remote.signed_amount()

        optimal_hist: list[list[int]] = [list(start)]
        actual_hist: list[list[int]] = [list(start)]
        opt_view = list(start)
        act_view = list(start)
        for d in affected:
            choice = choose_server(d.cost, opt_view, self.capacities)
            if choice is not None:
                opt_view[choice] += d.cost
            if d.server is not None:
                act_view[d.server] += d.cost
            optimal_hist.append(list(opt_view))
            actual_hist.append(list(act_view))

        phi, _ = comp_inefficiency(actual_hist, optimal_hist, self.cap)
        return InefficiencyReport(remote.state, phi, now, len(affected))

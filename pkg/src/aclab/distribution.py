"""Consistency-level governed admission and distribution of state updates.

Three modes share one controller:

* ``fast`` -- every admitted update triggers an immediate distribution of the
  whole unacknowledged queue (retransmission rides on new admissions),
* ``batched`` -- updates collect until the queue reaches the level's maximum
  size or a per-state timer expires; the timer restarts while the batch is
  unacknowledged, making it the retransmission driver,
* ``eventual`` -- the queue is unbounded and distribution is immediate,
  realizing plain eventual consistency with zero admission control.

Admission is refused (never an error) when the queue already holds the
maximum number of unacknowledged updates allowed by the applied level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from .crdt import UpdateRecord
from .engine import TimerSlot

FAST = "fast"
BATCHED = "batched"
EVENTUAL = "eventual"
MODES = (FAST, BATCHED, EVENTUAL)


@dataclass(frozen=True)
class ConsistencyLevel:
    """One row of the level table: lower level = stricter bounds."""

    level: int
    qs: int
    timeout_us: int


def build_cl_table(levels: int = 11, qs_min: int = 3, qs_max: int = 15,
                   to_min_ms: int = 100, to_max_ms: int = 1000) -> list[ConsistencyLevel]:
    """Linear level -> (queue size, timeout) mapping, strict to relaxed."""
    if levels < 1:
        raise ValueError("need at least one level")
    table = []
    top = max(levels - 1, 1)
    for lvl in range(levels):
        frac = lvl / top
        qs = round(qs_min + (qs_max - qs_min) * frac)
        to_ms = round(to_min_ms + (to_max_ms - to_min_ms) * frac)
        table.append(ConsistencyLevel(lvl, qs, to_ms * 1000))
    return table


class DistributionControl:
    """Per-replica queues, ack tracking and mode logic for one data store.

    Collaborators are injected so the controller stays a pure state machine:
    ``transmit(state, updates)`` serializes and sends one distribution to all
    peers, ``arm_timer(state, delay_us, version)`` schedules a timer event the
    replica routes back into :meth:`on_timer`, and ``active_peers()`` reports
    the peers currently counted toward full acknowledgment.
    """

    def __init__(self, mode: str, cl_table: list[ConsistencyLevel],
                 initial_level: int, states: Iterable[str],
                 transmit: Callable[[str, list[UpdateRecord]], None],
                 arm_timer: Callable[[str, int, int], None],
                 active_peers: Callable[[], list[int]],
                 now: Callable[[], int]):
        if mode not in MODES:
            raise ValueError(f"unknown distribution mode {mode!r}")
        if not 0 <= initial_level < len(cl_table):
            raise ValueError("initial level outside the table")
        self.mode = mode
        self.cl_table = cl_table
        self.applied = {s: initial_level for s in states}
        self.queues: dict[str, list[UpdateRecord]] = {s: [] for s in states}
        self.timers: dict[str, TimerSlot] = {s: TimerSlot() for s in states}
        self.acks: dict[tuple[int, int], set[int]] = {}
        self.ack_times: dict[tuple[int, int], list[int]] = {}
        self.local_apply: dict[tuple[int, int], int] = {}
        self.full_ack_at: dict[tuple[int, int], int] = {}
        self._records: dict[tuple[int, int], UpdateRecord] = {}
        self._transmit = transmit
        self._arm_timer = arm_timer
        self._active_peers = active_peers
        self._now = now
        self.on_peer_ack: Callable[[UpdateRecord, int, int], None] | None = None
        self.on_full_ack: Callable[[UpdateRecord, int], None] | None = None
        self.on_drain: Callable[[], None] | None = None

    # -- admission (Alg. evalAddToDistributionQueue) -----------------------

    def cl_for(self, state: str) -> ConsistencyLevel:
        return self.cl_table[self.applied[state]]

    def occupancy(self, state: str) -> int:
        return len(self.queues[state])

    def eval_add(self, update: UpdateRecord) -> bool:
        state = update.state
        queue = self.queues[state]
        cl = self.cl_for(state)
        if self.mode == EVENTUAL:
            queue.append(update)
            self._admit(update)
            self.distribute(state)
            return True
        if len(queue) >= cl.qs:
            return False
        queue.append(update)
        self._admit(update)
        if self.mode == FAST:
            self.distribute(state)
        else:
            if len(queue) == cl.qs:
                self.timers[state].cancel()
                self.distribute(state)
            if not self.timers[state].armed:
                self._arm(state, cl.timeout_us)
        return True

    def _admit(self, update: UpdateRecord) -> None:
        self._records[update.update_id] = update
        self.acks[update.update_id] = set()
        self.ack_times[update.update_id] = []
        self.local_apply[update.update_id] = self._now()

    def _arm(self, state: str, timeout_us: int) -> None:
        version = self.timers[state].arm()
        self._arm_timer(state, timeout_us, version)

    # -- distribution ------------------------------------------------------

    def distribute(self, state: str) -> None:
        queue = self.queues[state]
        if queue:
            self._transmit(state, list(queue))

    def on_timer(self, state: str, version: int) -> None:
        if not self.timers[state].fires(version):
            return
        if self.queues[state]:
            self.distribute(state)
            if self.mode == BATCHED:
                self._arm(state, self.cl_for(state).timeout_us)

    # -- acknowledgments ----------------------------------------------------

    def on_ack(self, peer: int, state: str, update_ids: Iterable[tuple[int, int]]) -> None:
        drained = False
        for uid in update_ids:
            record = self._records.get(uid)
            if record is None:
                continue  # late duplicate for an already-drained update
            got = self.acks[uid]
            if peer in got:
                continue
            got.add(peer)
            self.ack_times[uid].append(self._now())
            if self.on_peer_ack is not None:
                self.on_peer_ack(record, len(got), self._now())
            if got.issuperset(self._active_peers()):
                queue = self.queues[record.state]
                if record in queue:
                    queue.remove(record)
                    drained = True
                self.full_ack_at[uid] = self._now()
                del self._records[uid]
                if self.on_full_ack is not None:
                    self.on_full_ack(record, self._now())
        if drained and self.on_drain is not None:
            self.on_drain()

    def commit_wait(self, update_id: tuple[int, int], w: int) -> int | None:
        """Virtual time at which w replicas (origin included) held the update.

        w=1 is the local apply; otherwise the (w-1)th peer acknowledgment.
        Returns None when not yet reached.
        """
        if w < 1:
            raise ValueError("w must be at least 1")
        if w == 1:
            return self.local_apply.get(update_id)
        times = self.ack_times.get(update_id, [])
        if len(times) < w - 1:
            return None
        return times[w - 2]

    # -- level changes -------------------------------------------------------

    def apply_cl(self, state: str, level: int) -> None:
        """Switch future admissions to the level's bounds.

        Already-enqueued updates are never evicted; a stricter queue bound
        simply blocks new admissions until acknowledgments drain the queue.
        """
        if not 0 <= level < len(self.cl_table):
            raise ValueError(f"level {level} outside the table")
        self.applied[state] = level
        if self.on_drain is not None:
            self.on_drain()

    def unacked_queue(self, state: str) -> list[UpdateRecord]:
        return list(self.queues[state])

    def redistribute_all(self) -> None:
        """Retransmit every non-empty queue (fail-recovery catch-up)."""
        for state in self.queues:
            if self.queues[state]:
                self.distribute(state)
                if self.mode == BATCHED and not self.timers[state].armed:
                    self._arm(state, self.cl_for(state).timeout_us)

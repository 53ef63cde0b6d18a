"""PN-Counter store with timestamped update logs.

Each replica owns one :class:`Store` holding a PN-Counter per registered
state. Updates are identified by (origin replica, per-origin sequence), which
makes the merge idempotent under at-least-once delivery: re-merging a known
update id changes nothing, so increments and decrements commute and every
replica that has seen the same update set reports the same value.
"""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass
from typing import Callable, Iterable

INCREMENT = 0
DECREMENT = 1


class UnknownStateError(KeyError):
    """Lookup of a counter that was never registered."""


@dataclass(frozen=True)
class UpdateRecord:
    """One increment/decrement to a named counter; the unit of replication."""

    origin: int
    seq: int
    state: str
    op: int
    amount: int
    client: int
    timestamp: int
    request_id: int

    def __post_init__(self) -> None:
        if self.amount < 0:
            raise ValueError("update amount must be non-negative")
        if self.op not in (INCREMENT, DECREMENT):
            raise ValueError(f"unknown operation {self.op}")

    @property
    def update_id(self) -> tuple[int, int]:
        return (self.origin, self.seq)

    @property
    def key(self) -> tuple[int, int, int]:
        """Total order for logs: timestamp, ties by origin then sequence."""
        return (self.timestamp, self.origin, self.seq)

    def signed_amount(self) -> int:
        return self.amount if self.op == INCREMENT else -self.amount


class PNCounter:
    """Convergent increment/decrement counter keyed by update id."""

    __slots__ = ("incr", "decr")

    def __init__(self) -> None:
        self.incr: dict[tuple[int, int], int] = {}
        self.decr: dict[tuple[int, int], int] = {}

    def merge(self, update: UpdateRecord) -> bool:
        """Insert the update's amount; duplicates are a no-op (returns False)."""
        side = self.incr if update.op == INCREMENT else self.decr
        if update.update_id in self.incr or update.update_id in self.decr:
            return False
        side[update.update_id] = update.amount
        return True

    def query(self) -> int:
        return sum(self.incr.values()) - sum(self.decr.values())


class Store:
    """Per-replica counter store plus per-state merge logs.

    The admission decision for client updates is delegated to the staleness
    controller via the ``eval_add`` callable, mirroring the split between
    update semantics and distribution policy.
    """

    def __init__(self, states: Iterable[str]):
        self.counters: dict[str, PNCounter] = {}
        self.logs: dict[str, list[UpdateRecord]] = {}
        for s in states:
            self.register(s)

    def register(self, state: str) -> None:
        if not state:
            raise ValueError("state id must be non-empty")
        self.counters.setdefault(state, PNCounter())
        self.logs.setdefault(state, [])

    def knows(self, state: str) -> bool:
        return state in self.counters

    def merge(self, update: UpdateRecord) -> bool:
        """Merge into counter and log; returns False for duplicates."""
        if not self.counters[update.state].merge(update):
            return False
        insort(self.logs[update.state], update, key=lambda u: u.key)
        return True

    def client_update(self, update: UpdateRecord,
                      eval_add: Callable[[UpdateRecord], bool]) -> bool:
        """Admission path for locally-submitted updates.

        Returns True (update merged, logged and queued for distribution) or
        False (unknown state, or the distribution queue refused admission);
        a refused update leaves counter, log and queue untouched.
        """
        if not self.knows(update.state):
            return False
        if not eval_add(update):
            return False
        merged = self.merge(update)
        assert merged, "local update ids must be fresh"
        return True

    def remote_update(self, update: UpdateRecord) -> tuple[bool, bool]:
        """Merge an update received from a peer.

        Returns (state_known, newly_merged). Duplicate deliveries merge as a
        no-op but still deserve an acknowledgment.
        """
        if not self.knows(update.state):
            return (False, False)
        return (True, self.merge(update))

    def query(self, state: str) -> int:
        try:
            return self.counters[state].query()
        except KeyError:
            raise UnknownStateError(state) from None

    def log(self, state: str) -> list[UpdateRecord]:
        try:
            return self.logs[state]
        except KeyError:
            raise UnknownStateError(state) from None

    def all_records(self) -> list[UpdateRecord]:
        out: list[UpdateRecord] = []
        for state in sorted(self.logs):
            out.extend(self.logs[state])
        return out

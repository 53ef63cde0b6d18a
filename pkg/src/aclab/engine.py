"""Deterministic discrete-event engine with a virtual microsecond clock.

Every run owns one :class:`Simulator`. All protocol state machines are driven
from its single event loop; all randomness flows from the one seed handed to
the constructor. Identical (config, seed) pairs therefore replay identical
event traces, which the engine witnesses with a running trace hash.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from typing import Any, Callable, Iterable


class SimulationError(Exception):
    """Programming fault inside a run (e.g. scheduling into the past)."""


class ConfigError(Exception):
    """Invalid run configuration (unknown replica, bad topology, ...)."""


def derive_seed(seed: int, label: str) -> int:
    """Derive an independent 64-bit stream seed from the run seed."""
    h = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(h[:8], "big")


class Simulator:
    """Virtual-time event loop.

    Events are total-ordered by (fire_at, seq); seq is assigned at enqueue so
    simultaneous events fire in enqueue order. A failed target silently drops
    its events (messages and timers alike) until it recovers, at which point
    its registered recovery hook runs before anything else is delivered.
    """

    def __init__(self, seed: int = 0, local_loop_us: int = 10):
        self.now: int = 0
        self.seed = seed
        self.local_loop_us = local_loop_us
        self.rng = random.Random(derive_seed(seed, "engine"))
        self.delay_us: list[list[int]] | None = None  # replica pair delays
        self._seq = 0
        self._heap: list[tuple[int, int, int, str, Any]] = []
        self._handlers: dict[int, Callable[[str, Any], None]] = {}
        self._recovery_hooks: dict[int, Callable[[], None]] = {}
        self._failed: set[int] = set()
        self._hash = hashlib.sha256()
        self.events_processed = 0
        self.on_message: Callable[[int, int, Any, int], None] | None = None

    # -- wiring ----------------------------------------------------------

    def register(self, target: int, handler: Callable[[str, Any], None],
                 recovery_hook: Callable[[], None] | None = None) -> None:
        self._handlers[target] = handler
        if recovery_hook is not None:
            self._recovery_hooks[target] = recovery_hook

    # -- scheduling ------------------------------------------------------

    def schedule_at(self, fire_at: int, target: int, kind: str, payload: Any) -> None:
        if fire_at < self.now:
            raise SimulationError(
                f"event for t={fire_at} scheduled at t={self.now} (past)")
        self._seq += 1
        heapq.heappush(self._heap, (fire_at, self._seq, target, kind, payload))

    def schedule(self, delay_us: int, target: int, kind: str, payload: Any) -> None:
        self.schedule_at(self.now + delay_us, target, kind, payload)

    def send(self, src: int, dst: int, msg: Any, size: int) -> None:
        """Queue a one-way message delivery after the topology delay.

        A self-send travels the local loop. Delivery to a failed replica is
        dropped at delivery time; reliability is the sender protocol's job.
        """
        if self.delay_us is None:
            raise ConfigError("transport used before a delay matrix was set")
        n = len(self.delay_us)
        if not (0 <= src < n and 0 <= dst < n):
            raise ConfigError(f"unknown replica in send: {src} -> {dst}")
        delay = self.local_loop_us if src == dst else self.delay_us[src][dst]
        if self.on_message is not None and src != dst:
            self.on_message(src, dst, msg, size)
        self.schedule(delay, dst, "msg", (src, msg))

    # -- failure model ---------------------------------------------------

    def fail(self, replica: int) -> None:
        self._failed.add(replica)

    def recover(self, replica: int) -> None:
        self._failed.discard(replica)
        hook = self._recovery_hooks.get(replica)
        if hook is not None:
            hook()

    def is_failed(self, replica: int) -> bool:
        return replica in self._failed

    def active_peers(self, me: int) -> list[int]:
        n = len(self.delay_us) if self.delay_us else 0
        return [r for r in range(n) if r != me and r not in self._failed]

    # -- loop ------------------------------------------------------------

    def step(self) -> bool:
        """Process one event. Returns False when the queue is empty."""
        if not self._heap:
            return False
        fire_at, seq, target, kind, payload = heapq.heappop(self._heap)
        if fire_at < self.now:
            raise SimulationError("clock would move backwards")
        self.now = fire_at
        self.events_processed += 1
        if target in self._failed:
            self._trace(fire_at, seq, target, kind, "dropped")
            return True
        self._trace(fire_at, seq, target, kind, payload)
        handler = self._handlers.get(target)
        if handler is None:
            raise ConfigError(f"event for unregistered target {target}")
        handler(kind, payload)
        return True

    def run(self, until_us: int | None = None,
            stop_when: Callable[[], bool] | None = None,
            max_events: int = 50_000_000) -> None:
        for _ in range(max_events):
            if stop_when is not None and stop_when():
                return
            if until_us is not None and self._heap and self._heap[0][0] > until_us:
                self.now = until_us
                return
            if not self.step():
                return
        raise SimulationError("event budget exhausted; runaway simulation")

    # -- determinism witness ----------------------------------------------

    def _trace(self, fire_at: int, seq: int, target: int, kind: str, payload: Any) -> None:
        self._hash.update(f"{fire_at}|{seq}|{target}|{kind}|{payload!r}\n".encode())

    def trace_hash(self) -> str:
        return self._hash.hexdigest()


class TimerSlot:
    """Cancellable timer: stale firings are ignored via a version counter.

    The owner schedules engine events tagged with the version current at arm
    time; `fires(payload)` is True only for the newest armed version.
    """

    __slots__ = ("version", "armed")

    def __init__(self) -> None:
        self.version = 0
        self.armed = False

    def arm(self) -> int:
        self.version += 1
        self.armed = True
        return self.version

    def cancel(self) -> None:
        self.version += 1
        self.armed = False

    def fires(self, version: int) -> bool:
        if self.armed and version == self.version:
            self.armed = False
            return True
        return False

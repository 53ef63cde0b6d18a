"""CRDT-backed replica: store, distribution control, load balancer and the
inspection/adaptation message plumbing for the eventual and adaptive backends.

One replica handles three event kinds from the engine: workload ``request``
arrivals, ``msg`` deliveries from peers, and ``timer`` callbacks (distribution
timers, level-rebroadcast timers). Admissions refused by a full distribution
queue park the request in a FIFO and retry as soon as acknowledgments drain
the queue or a relaxed level raises the bound.
"""

from __future__ import annotations

from collections import deque
from typing import Callable

from .adaptation import Oca
from .crdt import INCREMENT, Store, UpdateRecord
from .distribution import BATCHED, EVENTUAL, FAST, DistributionControl
from .engine import Simulator, TimerSlot
from .inspection import Inspector
from .lb import embed_decision
from .metrics import Metrics
from .wire import (AckFrame, ClAck, ClUpdate, Codec, DistFrame, IneffReport,
                   MAX_UPDATES_PER_FRAME, SyncRequest, SyncResponse, UpdateFailed)
from .workload import ServiceRequest


class CrdtReplica:
    def __init__(self, me: int, engine: Simulator, codec: Codec,
                 servers: list[str], mode: str, cl_table, initial_level: int, *,
                 capacities: list[int] | None = None,
                 oca: Oca | None = None, oca_owner: int = 0,
                 commit_ws: tuple[int, ...] = (3, 5),
                 pi_window: int = 256, phi_cap: float = 10.0,
                 metrics: Metrics | None = None,
                 on_complete: Callable[[int], None] | None = None):
        self.me = me
        self.engine = engine
        self.codec = codec
        self.servers = servers
        self.mode = mode
        self.capacities = capacities
        self.oca = oca
        self.oca_owner = oca_owner
        self.commit_ws = tuple(commit_ws)
        self.metrics = metrics
        self.on_complete = on_complete
        self.local_label = "EC" if mode == EVENTUAL else "AC-local"
        self.store = Store(servers)
        self.inspector = Inspector(servers, capacities, pi_window, phi_cap)
        self.dist = DistributionControl(
            mode, cl_table, initial_level, servers,
            transmit=self._transmit,
            arm_timer=lambda state, delay, version: engine.schedule(
                delay, me, "timer", ("dist", state, version)),
            active_peers=lambda: engine.active_peers(me),
            now=lambda: engine.now)
        self.dist.on_peer_ack = self._on_peer_ack
        self.dist.on_full_ack = self._on_full_ack
        self.dist.on_drain = self._retry_blocked
        self.blocked: deque[ServiceRequest] = deque()
        self.recovering = False
        self._seq = 0
        # adaptation-owner bookkeeping (only used when oca is not None)
        self._cl_version = 0
        self._cl_pending: dict[str, tuple[int, int, set[int]]] = {}
        self._cl_timer = TimerSlot()
        self._cl_applied_version: dict[str, int] = {}
        engine.register(me, self.handle, recovery_hook=self._on_recovered)

    # -- event dispatch -----------------------------------------------------

    def handle(self, kind: str, payload) -> None:
        if kind == "request":
            self._on_request(payload)
        elif kind == "msg":
            src, msg = payload
            self._on_message(src, msg)
        elif kind == "timer":
            self._on_timer(payload)
        elif kind == "local_ack":
            update_id, request_id, admitted_at = payload
            if self.metrics:
                self.metrics.record_commit(self.local_label, self.me, request_id,
                                           self.engine.now - admitted_at)
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _on_timer(self, token) -> None:
        name = token[0]
        if name == "dist":
            _, state, version = token
            self.dist.on_timer(state, version)
        elif name == "clres":
            _, version = token
            if self._cl_timer.fires(version):
                self._rebroadcast_pending()

    # -- embedding ---------------------------------------------------------

    def _on_request(self, req: ServiceRequest) -> None:
        if self.metrics:
            self.metrics.note_arrival(req.arrival_us)
        if self.recovering or not self._try_embed(req):
            self.blocked.append(req)

    def _try_embed(self, req: ServiceRequest) -> bool:
        """Embed against the local view; False = blocked by a full queue."""
        view = tuple(self.store.query(s) for s in self.servers)
        decision = embed_decision(req.request_id, req.cost, view, self.capacities)
        if decision.rejected:
            if self.metrics:
                self.metrics.record_decision(req.request_id, req.arrival_us,
                                             self.me, "rejected-capacity", None,
                                             req.cost, view)
            self._complete(req)
            return True
        state = self.servers[decision.server]
        self._seq += 1
        update = UpdateRecord(self.me, self._seq, state, INCREMENT, req.cost,
                              self.me, self.engine.now, req.request_id)
        if not self.store.client_update(update, self.dist.eval_add):
            if self.metrics:
                self.metrics.note_admission_rejection()
            return False
        if self.metrics:
            bound = -1 if self.mode == EVENTUAL else self.dist.cl_for(state).qs
            self.metrics.record_occupancy(self.engine.now, self.me, state,
                                          self.dist.occupancy(state), bound)
            self.metrics.record_decision(req.request_id, req.arrival_us, self.me,
                                         "accepted", decision.server, req.cost,
                                         decision.view_after)
        self.inspector.record_decision(update, req.cost, decision.server)
        self.engine.schedule(self.engine.local_loop_us, self.me, "local_ack",
                             (update.update_id, req.request_id, self.engine.now))
        self._complete(req)
        return True

    def _complete(self, req: ServiceRequest) -> None:
        if self.on_complete:
            self.on_complete(req.request_id)

    def _retry_blocked(self) -> None:
        while self.blocked and not self.recovering:
            if not self._try_embed(self.blocked[0]):
                return
            self.blocked.popleft()

    # -- distribution plumbing ------------------------------------------------

    def _transmit(self, state: str, updates: list[UpdateRecord]) -> None:
        chunks = [updates[i:i + MAX_UPDATES_PER_FRAME]
                  for i in range(0, len(updates), MAX_UPDATES_PER_FRAME)]
        for peer in self._peers():
            for chunk in chunks:
                msg = DistFrame(state, tuple(chunk))
                self.engine.send(self.me, peer, msg, self.codec.size(msg))

    def _peers(self) -> list[int]:
        n = len(self.engine.delay_us)
        return [r for r in range(n) if r != self.me]

    def _on_peer_ack(self, record: UpdateRecord, acks: int, now: int) -> None:
        if self.mode == EVENTUAL or not self.metrics:
            return
        for w in self.commit_ws:
            if acks == w - 1:
                self.metrics.record_commit(f"AC-W{w}", self.me, record.request_id,
                                           now - record.timestamp)

    def _on_full_ack(self, record: UpdateRecord, now: int) -> None:
        if self.metrics:
            self.metrics.note_full_ack(now)

    # -- messages ------------------------------------------------------------

    def _on_message(self, src: int, msg) -> None:
        if isinstance(msg, DistFrame):
            self._on_dist_frame(src, msg)
        elif isinstance(msg, AckFrame):
            self.dist.on_ack(src, msg.state, msg.update_ids)
        elif isinstance(msg, IneffReport):
            self._on_report(msg)
        elif isinstance(msg, ClUpdate):
            self._on_cl_update(src, msg)
        elif isinstance(msg, ClAck):
            self._on_cl_ack(src, msg)
        elif isinstance(msg, SyncRequest):
            reply = SyncResponse(tuple(self.store.all_records()))
            self.engine.send(self.me, src, reply, self.codec.size(reply))
        elif isinstance(msg, SyncResponse):
            for rec in msg.records:
                self.store.remote_update(rec)
            self.recovering = False
            self._retry_blocked()
        elif isinstance(msg, UpdateFailed):
            pass  # peer lacks the state; nothing a sender can do here
        else:
            raise TypeError(f"crdt replica got {type(msg).__name__}")

    def _on_dist_frame(self, src: int, frame: DistFrame) -> None:
        if not self.store.knows(frame.state):
            for u in frame.updates:
                msg = UpdateFailed(frame.state, u.update_id)
                self.engine.send(self.me, src, msg, self.codec.size(msg))
            return
        for u in frame.updates:
            _, new = self.store.remote_update(u)
            if new:
                self._inspect(u)
        ack = AckFrame(frame.state, tuple(u.update_id for u in frame.updates))
        self.engine.send(self.me, src, ack, self.codec.size(ack))

    def _inspect(self, update: UpdateRecord) -> None:
        report = self.inspector.on_remote_update(update, self.store.logs,
                                                 self.engine.now)
        if self.metrics:
            self.metrics.record_ineff(self.engine.now, self.me, update.state,
                                      report.phi, self.dist.applied[update.state])
        msg = IneffReport(update.state, self.me, report.window_span, report.phi)
        self.engine.send(self.me, self.oca_owner, msg, self.codec.size(msg))

    # -- consistency-level dissemination --------------------------------------

    def _on_report(self, msg: IneffReport) -> None:
        if self.oca is None:
            return  # not the adaptation owner; stray report
        _, old, new = self.oca.report(msg.state, msg.phi)
        if new != old:
            self._broadcast_cl(msg.state, new)

    def _broadcast_cl(self, state: str, level: int) -> None:
        self._cl_version += 1
        everyone = set(range(len(self.engine.delay_us)))
        self._cl_pending[state] = (self._cl_version, level, everyone)
        update = ClUpdate(state, level, self._cl_version)
        for r in sorted(everyone):
            self.engine.send(self.me, r, update, self.codec.size(update))
        self._arm_cl_timer()

    def _arm_cl_timer(self) -> None:
        self.engine.schedule(100_000, self.me, "timer",
                             ("clres", self._cl_timer.arm()))

    def _rebroadcast_pending(self) -> None:
        if not self._cl_pending:
            return
        for state in sorted(self._cl_pending):
            version, level, waiting = self._cl_pending[state]
            update = ClUpdate(state, level, version)
            for r in sorted(waiting):
                self.engine.send(self.me, r, update, self.codec.size(update))
        self._arm_cl_timer()

    def _on_cl_update(self, src: int, msg: ClUpdate) -> None:
        if msg.version > self._cl_applied_version.get(msg.state, -1):
            self._cl_applied_version[msg.state] = msg.version
            self.dist.apply_cl(msg.state, msg.level)
            if self.metrics:
                self.metrics.record_cl_change(self.engine.now, self.me,
                                              msg.state, msg.level)
        ack = ClAck(msg.state, msg.version)
        self.engine.send(self.me, src, ack, self.codec.size(ack))

    def _on_cl_ack(self, src: int, msg: ClAck) -> None:
        entry = self._cl_pending.get(msg.state)
        if entry is None or entry[0] != msg.version:
            return
        version, level, waiting = entry
        waiting.discard(src)
        if not waiting:
            del self._cl_pending[msg.state]
            if not self._cl_pending:
                self._cl_timer.cancel()

    # -- fail-recovery ----------------------------------------------------------

    def _on_recovered(self) -> None:
        """Resynchronize before serving clients: pull a snapshot, repush queues."""
        peers = self.engine.active_peers(self.me)
        self.dist.redistribute_all()
        if not peers:
            return
        self.recovering = True
        target = peers[0]
        msg = SyncRequest()
        self.engine.send(self.me, target, msg, self.codec.size(msg))

    def idle(self) -> bool:
        """True when nothing is outstanding: run-completion predicate."""
        return (not self.recovering and not self.blocked
                and not self._cl_pending
                and all(not q for q in self.dist.queues.values()))

    # -- convenience for tests ----------------------------------------------------

    def query(self, state: str) -> int:
        return self.store.query(state)

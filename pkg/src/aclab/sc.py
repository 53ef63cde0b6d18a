"""Strongly-consistent replica: RAFT node plus a serializing transaction layer.

Request flow: the origin replica forwards the whole embed request to the
current leader (learned lazily via rejection hints and retried on timeout).
The leader serializes transactions one at a time: it commits one read marker
per server through the log, decides the placement on the values applied at
those log positions, commits the resulting counter update, answers the
origin, and only then starts the next transaction. Reads therefore cost like
writes and every decision sees exactly the committed prefix before its own
update, which is what makes the replay inefficiency identically 1.

Commit-time samples exclude the transaction-queue wait: a sample spans the
write entry's append to its majority commit, plus the origin-to-leader
forwarding leg when the request arrived at a follower.
"""

from __future__ import annotations

import random
from collections import deque
from typing import Callable

from .crdt import INCREMENT, UpdateRecord
from .engine import Simulator, derive_seed
from .inspection import Inspector
from .lb import choose_server
from .metrics import Metrics
from .raft import LEADER, RaftNode
from .wire import (AppendEntries, AppendReply, ClientEnvelope, ClientResponse,
                   Codec, LogEntry, NOT_LEADER, OK, ReadEnvelope, ReadMarker,
                   REJECTED, RequestVote, UNAVAILABLE, VoteReply)

RAFT_MESSAGES = (AppendEntries, AppendReply, RequestVote, VoteReply)
READ_ID_BASE = 1 << 30  # direct read API ids stay clear of workload requests


class ScReplica:
    def __init__(self, me: int, engine: Simulator, codec: Codec,
                 servers: list[str], *,
                 capacities: list[int] | None = None,
                 election_range_us: tuple[int, int] = (150_000, 300_000),
                 heartbeat_us: int | None = None,
                 retry_us: int = 500_000,
                 pi_window: int = 256, phi_cap: float = 10.0,
                 metrics: Metrics | None = None,
                 audit: Callable[..., None] | None = None,
                 on_complete: Callable[[int], None] | None = None):
        self.me = me
        self.engine = engine
        self.codec = codec
        self.servers = servers
        self.capacities = capacities
        self.metrics = metrics
        self.on_complete = on_complete
        self.retry_us = retry_us
        n = len(engine.delay_us)
        self.node = RaftNode(
            me, n,
            send=self._send_raft,
            arm_timer=lambda name, delay, version: engine.schedule(
                delay, me, "timer", ("raft", name, version)),
            now=lambda: engine.now,
            rng=random.Random(derive_seed(engine.seed, f"raft:{me}")),
            apply_entry=self._apply,
            audit=audit,
            election_range_us=election_range_us,
            heartbeat_us=heartbeat_us)
        self.counters: dict[str, int] = {s: 0 for s in servers}
        self.applied_logs: dict[str, list[UpdateRecord]] = {s: [] for s in servers}
        self.inspector = Inspector(servers, capacities, pi_window, phi_cap)
        self.applied_requests: dict[int, tuple[int, int]] = {}  # rid -> (status, server)
        # leader transaction layer
        self.pending: deque = deque()
        self.queued_ids: set[int] = set()
        self.current: dict | None = None
        # origin-side client layer
        self.outstanding: dict[int, object] = {}
        self.retry_version: dict[int, int] = {}
        self.read_callbacks: dict[int, Callable[[str, int | None], None]] = {}
        self._read_seq = 0
        engine.register(me, self.handle, recovery_hook=self._on_recovered)

    def start(self) -> None:
        self.node.start()

    # -- event dispatch ------------------------------------------------------

    def handle(self, kind: str, payload) -> None:
        if kind == "request":
            self._on_request(payload)
        elif kind == "msg":
            src, msg = payload
            self._on_message(src, msg)
        elif kind == "timer":
            self._on_timer(payload)
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _on_timer(self, token) -> None:
        if token[0] == "raft":
            _, name, version = token
            self.node.on_timer(name, version)
            if self.node.role == LEADER:
                self._pump()
        elif token[0] == "retry":
            _, rid, version = token
            if self.retry_version.get(rid) == version and rid in self.outstanding:
                self._send_envelope(rid)
                self._arm_retry(rid)

    def _on_message(self, src: int, msg) -> None:
        if isinstance(msg, RAFT_MESSAGES):
            was_leader = self.node.role == LEADER
            self.node.on_message(src, msg)
            if not was_leader and self.node.role == LEADER:
                self._pump()
            if was_leader and self.node.role != LEADER:
                self._abandon_leadership()
        elif isinstance(msg, ClientEnvelope):
            self._on_envelope(src, msg)
        elif isinstance(msg, ReadEnvelope):
            self._on_read_envelope(src, msg)
        elif isinstance(msg, ClientResponse):
            self._on_response(msg)
        else:
            raise TypeError(f"sc replica got {type(msg).__name__}")

    # -- origin-side client layer ------------------------------------------------

    def _on_request(self, req) -> None:
        if self.metrics:
            self.metrics.note_arrival(req.arrival_us)
        self.outstanding[req.request_id] = req
        self._send_envelope(req.request_id)
        self._arm_retry(req.request_id)

    def read(self, state: str, callback: Callable[[str, int | None], None]) -> None:
        """Linearizable read: the value at a committed log position.

        The callback gets ("ok", value), or ("unavailable", None) when no
        leader is currently known to this replica.
        """
        leader = self.node.leader_hint
        if leader is None:
            callback("unavailable", None)
            return
        self._read_seq += 1
        rid = READ_ID_BASE + (self.me << 20) + self._read_seq
        self.read_callbacks[rid] = callback
        msg = ReadEnvelope(rid, self.me, state)
        self.engine.send(self.me, leader, msg, self.codec.size(msg))

    def _send_envelope(self, rid: int) -> None:
        req = self.outstanding.get(rid)
        if req is None:
            return
        leader = self.node.leader_hint
        if leader is None:
            return  # retry timer fires again later
        env = ClientEnvelope(req.request_id, self.me, self.me, req.service_type,
                             req.cost, req.arrival_us)
        self.engine.send(self.me, leader, env, self.codec.size(env))

    def _arm_retry(self, rid: int) -> None:
        version = self.retry_version.get(rid, 0) + 1
        self.retry_version[rid] = version
        self.engine.schedule(self.retry_us, self.me, "timer", ("retry", rid, version))

    def _on_response(self, msg: ClientResponse) -> None:
        if msg.request_id in self.read_callbacks:
            callback = self.read_callbacks.pop(msg.request_id)
            if msg.status == OK:
                callback("ok", msg.value)
            else:
                callback("unavailable", None)
            return
        req = self.outstanding.get(msg.request_id)
        if req is None:
            return  # duplicate response after completion
        if msg.status == NOT_LEADER:
            if msg.leader_hint >= 0 and msg.leader_hint != self.me:
                env = ClientEnvelope(req.request_id, self.me, self.me,
                                     req.service_type, req.cost, req.arrival_us)
                self.engine.send(self.me, msg.leader_hint, env,
                                 self.codec.size(env))
            return
        del self.outstanding[msg.request_id]
        self.retry_version.pop(msg.request_id, None)
        if self.metrics:
            self.metrics.note_full_ack(self.engine.now)
        if self.on_complete:
            self.on_complete(msg.request_id)

    # -- leader transaction layer ---------------------------------------------

    def _on_envelope(self, src: int, env: ClientEnvelope) -> None:
        if self.node.role != LEADER:
            hint = self.node.leader_hint
            resp = ClientResponse(env.request_id, NOT_LEADER,
                                  -1 if hint is None else hint, -1, 0)
            self.engine.send(self.me, env.origin, resp, self.codec.size(resp))
            return
        if env.request_id in self.applied_requests:
            self._respond_done(env.origin, env.request_id)
            return
        if env.request_id in self.queued_ids:
            return  # duplicate of a queued request
        self.queued_ids.add(env.request_id)
        self.pending.append(("embed", env))
        self._pump()

    def _on_read_envelope(self, src: int, env: ReadEnvelope) -> None:
        if self.node.role != LEADER:
            hint = self.node.leader_hint
            resp = ClientResponse(env.request_id, NOT_LEADER,
                                  -1 if hint is None else hint, -1, 0)
            self.engine.send(self.me, env.origin, resp, self.codec.size(resp))
            return
        self.pending.append(("read", env))
        self._pump()

    def _pump(self) -> None:
        if self.current is not None or not self.pending:
            return
        if self.node.role != LEADER:
            self.pending.clear()
            self.queued_ids.clear()
            return
        kind, env = self.pending.popleft()
        if kind == "embed":
            self.queued_ids.discard(env.request_id)
            if env.request_id in self.applied_requests:
                self._respond_done(env.origin, env.request_id)
                self._pump()
                return
            marks = {}
            for s in self.servers:
                idx = self.node.propose(ReadMarker(s, env.client))
                if idx is None:
                    return
                marks[idx] = s
            self.current = {"kind": kind, "env": env, "marks": marks,
                            "views": {}, "write_index": None, "append_at": None,
                            "server": None}
        else:
            idx = self.node.propose(ReadMarker(env.state, env.origin))
            if idx is None:
                return
            self.current = {"kind": kind, "env": env, "marks": {idx: env.state},
                            "views": {}, "write_index": None, "append_at": None,
                            "server": None}

    def _abandon_leadership(self) -> None:
        self.pending.clear()
        self.queued_ids.clear()
        self.current = None  # origin retries drive re-submission

    # -- replicated state machine ------------------------------------------------

    def _apply(self, entry: LogEntry) -> None:
        cmd = entry.command
        if cmd is None:
            return
        if isinstance(cmd, ReadMarker):
            self._apply_read(entry)
            return
        self._apply_write(entry, cmd)

    def _apply_read(self, entry: LogEntry) -> None:
        cur = self.current
        if cur is None or self.node.role != LEADER or entry.index not in cur["marks"]:
            return
        state = cur["marks"][entry.index]
        cur["views"][state] = self.counters[state]
        if len(cur["views"]) < len(cur["marks"]):
            return
        env = cur["env"]
        if cur["kind"] == "read":
            resp = ClientResponse(env.request_id, OK, self.me, -1,
                                  cur["views"][env.state])
            self.engine.send(self.me, env.origin, resp, self.codec.size(resp))
            self.current = None
            self._pump()
            return
        view = [cur["views"][s] for s in self.servers]
        choice = choose_server(env.cost, view, self.capacities)
        if choice is None:
            self.applied_requests[env.request_id] = (REJECTED, -1)
            if self.metrics:
                self.metrics.record_decision(env.request_id, env.arrival_us,
                                             env.origin, "rejected-capacity",
                                             None, env.cost, tuple(view))
            resp = ClientResponse(env.request_id, REJECTED, self.me, -1, 0)
            self.engine.send(self.me, env.origin, resp, self.codec.size(resp))
            self.current = None
            self._pump()
            return
        index = self.node.last_index() + 1
        record = UpdateRecord(env.origin, env.request_id, self.servers[choice],
                              INCREMENT, env.cost, env.client, index,
                              env.request_id)
        proposed = self.node.propose(record)
        assert proposed == index
        cur["write_index"] = index
        cur["append_at"] = self.engine.now
        cur["server"] = choice

    def _apply_write(self, entry: LogEntry, record: UpdateRecord) -> None:
        rid = record.request_id
        fresh = rid not in self.applied_requests
        if fresh:
            server_idx = self.servers.index(record.state)
            self.applied_requests[rid] = (OK, server_idx)
            self.counters[record.state] += record.signed_amount()
            self.applied_logs[record.state].append(record)
            if record.origin == self.me:
                self.inspector.record_decision(record, record.amount, server_idx)
            else:
                report = self.inspector.on_remote_update(record, self.applied_logs,
                                                         self.engine.now)
                if self.metrics:
                    self.metrics.record_ineff(self.engine.now, self.me,
                                              record.state, report.phi, -1)
        cur = self.current
        if (cur is not None and self.node.role == LEADER
                and cur["write_index"] == entry.index):
            env = cur["env"]
            latency = self.engine.now - cur["append_at"]
            if env.origin != self.me:
                latency += self.engine.delay_us[env.origin][self.me]
            label = "SC-leader" if env.origin == self.me else "SC-follower"
            if self.metrics:
                self.metrics.record_commit(label, env.origin, rid, latency)
                view = tuple(self.counters[s] for s in self.servers)
                self.metrics.record_decision(rid, env.arrival_us, env.origin,
                                             "accepted", cur["server"], env.cost,
                                             view)
            resp = ClientResponse(rid, OK, self.me, cur["server"], 0)
            self.engine.send(self.me, env.origin, resp, self.codec.size(resp))
            self.current = None
            self._pump()

    def _respond_done(self, origin: int, rid: int) -> None:
        status, server = self.applied_requests[rid]
        resp = ClientResponse(rid, status, self.me, server, 0)
        self.engine.send(self.me, origin, resp, self.codec.size(resp))

    # -- plumbing -----------------------------------------------------------------

    def _send_raft(self, dst: int, msg) -> None:
        self.engine.send(self.me, dst, msg, self.codec.size(msg))

    def _on_recovered(self) -> None:
        self.node.on_recover()

    def query_applied(self, state: str) -> int:
        """Local applied value (not linearizable; tests and audits only)."""
        return self.counters[state]

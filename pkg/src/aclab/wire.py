"""Length-prefixed binary wire formats for both replication protocols.

All messages share a 5-byte envelope (u32 payload length + u8 type tag).
The CRDT distribution protocol is deliberately lean: state and client ids are
interned u16 indices and update frames are segmented at a maximum number of
updates per frame. The replicated-log protocol is self-contained instead:
log entries carry full string state ids and 64-bit terms/indices so a log can
be replayed without any side table, which makes its frames markedly larger.

Encoded byte lengths are what the overhead metrics report.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

from .crdt import UpdateRecord

MAX_UPDATES_PER_FRAME = 4  # distribution frames segment above this

_ENVELOPE = struct.Struct("!IB")
_UPDATE = struct.Struct("!HIBIHQI")  # origin seq op amount client timestamp request
_UPDATE_ID = struct.Struct("!HI")

T_DIST = 1
T_ACK = 2
T_UPDATE_FAILED = 3
T_CL_UPDATE = 4
T_CL_ACK = 5
T_INEFF_REPORT = 6
T_SYNC_REQUEST = 7
T_SYNC_RESPONSE = 8
T_CLIENT_ENVELOPE = 10
T_APPEND_ENTRIES = 11
T_APPEND_REPLY = 12
T_REQUEST_VOTE = 13
T_VOTE_REPLY = 14
T_CLIENT_RESPONSE = 15
T_READ_ENVELOPE = 16


# -- CRDT distribution protocol ------------------------------------------

@dataclass(frozen=True)
class DistFrame:
    state: str
    updates: tuple[UpdateRecord, ...]


@dataclass(frozen=True)
class AckFrame:
    state: str
    update_ids: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class UpdateFailed:
    state: str
    update_id: tuple[int, int]


@dataclass(frozen=True)
class ClUpdate:
    state: str
    level: int
    version: int


@dataclass(frozen=True)
class ClAck:
    state: str
    version: int


@dataclass(frozen=True)
class IneffReport:
    state: str
    replica: int
    span: int
    phi: float


@dataclass(frozen=True)
class SyncRequest:
    pass


@dataclass(frozen=True)
class SyncResponse:
    records: tuple[UpdateRecord, ...]


# -- replicated-log protocol ----------------------------------------------

@dataclass(frozen=True)
class ReadMarker:
    state: str
    client: int


@dataclass(frozen=True)
class LogEntry:
    term: int
    index: int
    command: UpdateRecord | ReadMarker | None  # None = leader no-op


@dataclass(frozen=True)
class ClientEnvelope:
    request_id: int
    origin: int
    client: int
    service_type: int
    cost: int
    arrival_us: int


@dataclass(frozen=True)
class ReadEnvelope:
    request_id: int
    origin: int
    state: str


@dataclass(frozen=True)
class AppendEntries:
    term: int
    leader: int
    prev_index: int
    prev_term: int
    leader_commit: int
    entries: tuple[LogEntry, ...]


@dataclass(frozen=True)
class AppendReply:
    term: int
    sender: int
    success: bool
    match_index: int


@dataclass(frozen=True)
class RequestVote:
    term: int
    candidate: int
    last_index: int
    last_term: int


@dataclass(frozen=True)
class VoteReply:
    term: int
    sender: int
    granted: bool


OK = 0
REJECTED = 1
NOT_LEADER = 2
UNAVAILABLE = 3


@dataclass(frozen=True)
class ClientResponse:
    request_id: int
    status: int
    leader_hint: int  # -1 when unknown
    server: int       # chosen server index, -1 when n/a
    value: int        # read result, 0 when n/a


def _pack_str(s: str) -> bytes:
    raw = s.encode()
    return struct.pack("!H", len(raw)) + raw


def _unpack_str(data: bytes, off: int) -> tuple[str, int]:
    (n,) = struct.unpack_from("!H", data, off)
    off += 2
    return data[off:off + n].decode(), off + n


class Codec:
    """Encoder/decoder bound to the run's ordered state registry."""

    def __init__(self, states: Sequence[str]):
        self.states = list(states)
        self.index = {s: i for i, s in enumerate(self.states)}

    # compact update bodies used by the distribution protocol
    def _pack_update(self, u: UpdateRecord) -> bytes:
        return _UPDATE.pack(u.origin, u.seq, u.op, u.amount, u.client,
                            u.timestamp, u.request_id)

    def _unpack_update(self, state: str, data: bytes, off: int) -> tuple[UpdateRecord, int]:
        origin, seq, op, amount, client, ts, rid = _UPDATE.unpack_from(data, off)
        return (UpdateRecord(origin, seq, state, op, amount, client, ts, rid),
                off + _UPDATE.size)

    def encode(self, msg) -> bytes:
        body: bytes
        if isinstance(msg, DistFrame):
            tag = T_DIST
            if any(u.state != msg.state for u in msg.updates):
                raise ValueError("distribution frames carry a single state")
            body = struct.pack("!HH", self.index[msg.state], len(msg.updates))
            body += b"".join(self._pack_update(u) for u in msg.updates)
        elif isinstance(msg, AckFrame):
            tag = T_ACK
            body = struct.pack("!HH", self.index[msg.state], len(msg.update_ids))
            body += b"".join(_UPDATE_ID.pack(*uid) for uid in msg.update_ids)
        elif isinstance(msg, UpdateFailed):
            tag = T_UPDATE_FAILED
            body = struct.pack("!H", self.index.get(msg.state, 0xFFFF))
            body += _UPDATE_ID.pack(*msg.update_id)
        elif isinstance(msg, ClUpdate):
            tag = T_CL_UPDATE
            body = struct.pack("!HBI", self.index[msg.state], msg.level, msg.version)
        elif isinstance(msg, ClAck):
            tag = T_CL_ACK
            body = struct.pack("!HI", self.index[msg.state], msg.version)
        elif isinstance(msg, IneffReport):
            tag = T_INEFF_REPORT
            body = struct.pack("!HHHd", self.index[msg.state], msg.replica,
                               msg.span, msg.phi)
        elif isinstance(msg, SyncRequest):
            tag = T_SYNC_REQUEST
            body = b""
        elif isinstance(msg, SyncResponse):
            tag = T_SYNC_RESPONSE
            body = struct.pack("!I", len(msg.records))
            body += b"".join(struct.pack("!H", self.index[u.state]) + self._pack_update(u)
                             for u in msg.records)
        elif isinstance(msg, ClientEnvelope):
            tag = T_CLIENT_ENVELOPE
            body = struct.pack("!IHHBIQ", msg.request_id, msg.origin, msg.client,
                               msg.service_type, msg.cost, msg.arrival_us)
        elif isinstance(msg, ReadEnvelope):
            tag = T_READ_ENVELOPE
            body = struct.pack("!IH", msg.request_id, msg.origin) + _pack_str(msg.state)
        elif isinstance(msg, AppendEntries):
            tag = T_APPEND_ENTRIES
            body = struct.pack("!QHQQQH", msg.term, msg.leader, msg.prev_index,
                               msg.prev_term, msg.leader_commit, len(msg.entries))
            body += b"".join(self._pack_entry(e) for e in msg.entries)
        elif isinstance(msg, AppendReply):
            tag = T_APPEND_REPLY
            body = struct.pack("!QHBQ", msg.term, msg.sender, int(msg.success),
                               msg.match_index)
        elif isinstance(msg, RequestVote):
            tag = T_REQUEST_VOTE
            body = struct.pack("!QHQQ", msg.term, msg.candidate, msg.last_index,
                               msg.last_term)
        elif isinstance(msg, VoteReply):
            tag = T_VOTE_REPLY
            body = struct.pack("!QHB", msg.term, msg.sender, int(msg.granted))
        elif isinstance(msg, ClientResponse):
            tag = T_CLIENT_RESPONSE
            body = struct.pack("!IBhhq", msg.request_id, msg.status,
                               msg.leader_hint, msg.server, msg.value)
        else:
            raise TypeError(f"cannot encode {type(msg).__name__}")
        return _ENVELOPE.pack(len(body) + 1, tag) + body

    def _pack_entry(self, e: LogEntry) -> bytes:
        head = struct.pack("!QQ", e.term, e.index)
        cmd = e.command
        if cmd is None:
            return head + b"\x00"
        if isinstance(cmd, ReadMarker):
            return head + b"\x01" + _pack_str(cmd.state) + struct.pack("!H", cmd.client)
        return (head + b"\x02" + _pack_str(cmd.state)
                + struct.pack("!HQBQHQQ", cmd.origin, cmd.seq, cmd.op, cmd.amount,
                              cmd.client, cmd.timestamp, cmd.request_id))

    def _unpack_entry(self, data: bytes, off: int) -> tuple[LogEntry, int]:
        term, index = struct.unpack_from("!QQ", data, off)
        off += 16
        kind = data[off]
        off += 1
        if kind == 0:
            return LogEntry(term, index, None), off
        if kind == 1:
            state, off = _unpack_str(data, off)
            (client,) = struct.unpack_from("!H", data, off)
            return LogEntry(term, index, ReadMarker(state, client)), off + 2
        state, off = _unpack_str(data, off)
        origin, seq, op, amount, client, ts, rid = struct.unpack_from("!HQBQHQQ", data, off)
        rec = UpdateRecord(origin, seq, state, op, amount, client, ts, rid)
        return LogEntry(term, index, rec), off + 37

    def decode(self, data: bytes):
        length, tag = _ENVELOPE.unpack_from(data, 0)
        if length + 4 != len(data):
            raise ValueError("length prefix does not match payload")
        off = _ENVELOPE.size
        if tag == T_DIST:
            idx, n = struct.unpack_from("!HH", data, off)
            off += 4
            state = self.states[idx]
            updates = []
            for _ in range(n):
                u, off = self._unpack_update(state, data, off)
                updates.append(u)
            return DistFrame(state, tuple(updates))
        if tag == T_ACK:
            idx, n = struct.unpack_from("!HH", data, off)
            off += 4
            ids = []
            for _ in range(n):
                ids.append(_UPDATE_ID.unpack_from(data, off))
                off += _UPDATE_ID.size
            return AckFrame(self.states[idx], tuple(ids))
        if tag == T_UPDATE_FAILED:
            (idx,) = struct.unpack_from("!H", data, off)
            uid = _UPDATE_ID.unpack_from(data, off + 2)
            state = self.states[idx] if idx != 0xFFFF else ""
            return UpdateFailed(state, uid)
        if tag == T_CL_UPDATE:
            idx, level, version = struct.unpack_from("!HBI", data, off)
            return ClUpdate(self.states[idx], level, version)
        if tag == T_CL_ACK:
            idx, version = struct.unpack_from("!HI", data, off)
            return ClAck(self.states[idx], version)
        if tag == T_INEFF_REPORT:
            idx, replica, span, phi = struct.unpack_from("!HHHd", data, off)
            return IneffReport(self.states[idx], replica, span, phi)
        if tag == T_SYNC_REQUEST:
            return SyncRequest()
        if tag == T_SYNC_RESPONSE:
            (n,) = struct.unpack_from("!I", data, off)
            off += 4
            records = []
            for _ in range(n):
                (idx,) = struct.unpack_from("!H", data, off)
                off += 2
                u, off = self._unpack_update(self.states[idx], data, off)
                records.append(u)
            return SyncResponse(tuple(records))
        if tag == T_CLIENT_ENVELOPE:
            rid, origin, client, stype, cost, arrival = struct.unpack_from("!IHHBIQ", data, off)
            return ClientEnvelope(rid, origin, client, stype, cost, arrival)
        if tag == T_READ_ENVELOPE:
            rid, origin = struct.unpack_from("!IH", data, off)
            state, _ = _unpack_str(data, off + 6)
            return ReadEnvelope(rid, origin, state)
        if tag == T_APPEND_ENTRIES:
            term, leader, prev_i, prev_t, commit, n = struct.unpack_from("!QHQQQH", data, off)
            off += 36
            entries = []
            for _ in range(n):
                e, off = self._unpack_entry(data, off)
                entries.append(e)
            return AppendEntries(term, leader, prev_i, prev_t, commit, tuple(entries))
        if tag == T_APPEND_REPLY:
            term, sender, success, match = struct.unpack_from("!QHBQ", data, off)
            return AppendReply(term, sender, bool(success), match)
        if tag == T_REQUEST_VOTE:
            term, cand, last_i, last_t = struct.unpack_from("!QHQQ", data, off)
            return RequestVote(term, cand, last_i, last_t)
        if tag == T_VOTE_REPLY:
            term, sender, granted = struct.unpack_from("!QHB", data, off)
            return VoteReply(term, sender, bool(granted))
        if tag == T_CLIENT_RESPONSE:
            rid, status, hint, server, value = struct.unpack_from("!IBhhq", data, off)
            return ClientResponse(rid, status, hint, server, value)
        raise ValueError(f"unknown message tag {tag}")

    def size(self, msg) -> int:
        return len(self.encode(msg))

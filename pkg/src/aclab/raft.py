"""Minimal RAFT node: leader election, log replication, majority commit.

One node per replica, driven entirely by the event loop via injected
callbacks. Durable state (term, vote, log) survives fail/recover; the
recovery hook merely re-arms timers. Log compaction, snapshots and
membership changes are out of scope.
"""

from __future__ import annotations

from typing import Any, Callable

from .engine import TimerSlot
from .wire import AppendEntries, AppendReply, LogEntry, RequestVote, VoteReply

FOLLOWER = "follower"
CANDIDATE = "candidate"
LEADER = "leader"

MAX_ENTRIES_PER_AE = 8


def command_key(command) -> tuple:
    """Stable identity of a log command for auditing."""
    if command is None:
        return ("noop",)
    if hasattr(command, "update_id"):
        return ("write", *command.update_id)
    return ("read", command.state, command.client)


class RaftNode:
    def __init__(self, me: int, cluster_size: int, *,
                 send: Callable[[int, Any], None],
                 arm_timer: Callable[[str, int, int], None],
                 now: Callable[[], int],
                 rng,
                 apply_entry: Callable[[LogEntry], None],
                 audit: Callable[..., None] | None = None,
                 election_range_us: tuple[int, int] = (150_000, 300_000),
                 heartbeat_us: int | None = None):
        self.me = me
        self.n = cluster_size
        self.majority = cluster_size // 2 + 1
        self.role = FOLLOWER
        self.current_term = 0
        self.voted_for: int | None = None
        self.log: list[LogEntry] = []
        self.commit_index = 0
        self.last_applied = 0
        self.leader_hint: int | None = None
        self.next_index: dict[int, int] = {}
        self.match_index: dict[int, int] = {}
        self._votes: set[int] = set()
        self._send = send
        self._arm_timer = arm_timer
        self._now = now
        self._rng = rng
        self._apply = apply_entry
        self._audit = audit or (lambda *a: None)
        self.election_range_us = election_range_us
        self.heartbeat_us = heartbeat_us or election_range_us[0] // 3
        self._election = TimerSlot()
        self._heartbeat = TimerSlot()
        self._last_ae: dict[int, int] = {}

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self._arm_election()

    def on_recover(self) -> None:
        """Fail-recovery resynchronization: timers restart, state persists."""
        self._arm_election()
        if self.role == LEADER:
            self._arm_heartbeat()

    def peers(self) -> list[int]:
        return [p for p in range(self.n) if p != self.me]

    def last_index(self) -> int:
        return len(self.log)

    def term_at(self, index: int) -> int:
        return self.log[index - 1].term if index >= 1 and index <= len(self.log) else 0

    # -- timers --------------------------------------------------------------

    def _arm_election(self) -> None:
        delay = self._rng.randint(*self.election_range_us)
        self._arm_timer("election", delay, self._election.arm())

    def _arm_heartbeat(self) -> None:
        self._arm_timer("heartbeat", self.heartbeat_us, self._heartbeat.arm())

    def on_timer(self, name: str, version: int) -> None:
        if name == "election":
            if self._election.fires(version) and self.role != LEADER:
                self._start_election()
        elif name == "heartbeat":
            if self._heartbeat.fires(version) and self.role == LEADER:
                for p in self.peers():
                    if self._now() - self._last_ae.get(p, -1 << 60) >= self.heartbeat_us:
                        self._send_append(p)
                self._arm_heartbeat()

    def _start_election(self) -> None:
        self.role = CANDIDATE
        self.current_term += 1
        self.voted_for = self.me
        self.leader_hint = None
        self._votes = {self.me}
        msg = RequestVote(self.current_term, self.me, self.last_index(),
                          self.term_at(self.last_index()))
        for p in self.peers():
            self._send(p, msg)
        self._arm_election()
        self._maybe_win()

    # -- message handling ------------------------------------------------------

    def _observe_term(self, term: int) -> None:
        if term > self.current_term:
            self.current_term = term
            self.voted_for = None
            if self.role != FOLLOWER:
                self.role = FOLLOWER
            self.leader_hint = None

    def on_message(self, src: int, msg) -> None:
        if isinstance(msg, RequestVote):
            self._on_request_vote(src, msg)
        elif isinstance(msg, VoteReply):
            self._on_vote_reply(src, msg)
        elif isinstance(msg, AppendEntries):
            self._on_append_entries(src, msg)
        elif isinstance(msg, AppendReply):
            self._on_append_reply(src, msg)
        else:
            raise TypeError(f"raft node got {type(msg).__name__}")

    def _on_request_vote(self, src: int, msg: RequestVote) -> None:
        self._observe_term(msg.term)
        granted = False
        if msg.term == self.current_term and self.voted_for in (None, msg.candidate):
            mine = (self.term_at(self.last_index()), self.last_index())
            theirs = (msg.last_term, msg.last_index)
            if theirs >= mine:
                granted = True
                self.voted_for = msg.candidate
                self._arm_election()
        self._send(src, VoteReply(self.current_term, self.me, granted))

    def _on_vote_reply(self, src: int, msg: VoteReply) -> None:
        self._observe_term(msg.term)
        if self.role != CANDIDATE or msg.term != self.current_term or not msg.granted:
            return
        self._votes.add(src)
        self._maybe_win()

    def _maybe_win(self) -> None:
        if self.role == CANDIDATE and len(self._votes) >= self.majority:
            self.role = LEADER
            self.leader_hint = self.me
            nxt = self.last_index() + 1
            self.next_index = {p: nxt for p in self.peers()}
            self.match_index = {p: 0 for p in self.peers()}
            self._audit("leader", self._now(), self.current_term, self.me,
                        tuple((e.index, e.term) for e in self.log))
            self.propose(None)  # no-op commits the leader's prior-term prefix
            self._arm_heartbeat()

    def _on_append_entries(self, src: int, msg: AppendEntries) -> None:
        if msg.term < self.current_term:
            self._send(src, AppendReply(self.current_term, self.me, False, 0))
            return
        self._observe_term(msg.term)
        self.role = FOLLOWER
        self.leader_hint = msg.leader
        self._arm_election()
        if msg.prev_index > 0 and self.term_at(msg.prev_index) != msg.prev_term:
            # rejection carries the log length so the leader can jump back
            self._send(src, AppendReply(self.current_term, self.me, False,
                                        min(len(self.log), msg.prev_index - 1)))
            return
        for e in msg.entries:
            if e.index <= len(self.log):
                if self.log[e.index - 1].term != e.term:
                    del self.log[e.index - 1:]
                    self.log.append(e)
            else:
                self.log.append(e)
        new_match = msg.prev_index + len(msg.entries)
        if msg.leader_commit > self.commit_index:
            self.commit_index = min(msg.leader_commit, new_match)
            self._apply_committed()
        self._send(src, AppendReply(self.current_term, self.me, True, new_match))

    def _on_append_reply(self, src: int, msg: AppendReply) -> None:
        self._observe_term(msg.term)
        if self.role != LEADER or msg.term != self.current_term:
            return
        if msg.success:
            # Stale replies from the pipeline carry no new progress; reacting
            # to them re-sends suffixes in a feedback storm, so gate on match.
            if msg.match_index > self.match_index[src]:
                self.match_index[src] = msg.match_index
                self.next_index[src] = msg.match_index + 1
                self._advance_commit()
                if self.next_index[src] <= self.last_index():
                    self._send_append(src)
        elif msg.match_index >= self.match_index[src]:
            # match_index of a rejection hints at the follower's log length;
            # rejections behind the confirmed match are stale and ignored.
            hint = max(1, min(self.next_index[src] - 1, msg.match_index + 1))
            if hint < self.next_index[src]:
                self.next_index[src] = hint
                self._send_append(src)

    # -- leader duties ------------------------------------------------------------

    def propose(self, command) -> int | None:
        """Append a command; returns its log index, or None if not leader."""
        if self.role != LEADER:
            return None
        entry = LogEntry(self.current_term, self.last_index() + 1, command)
        self.log.append(entry)
        for p in self.peers():
            self._send_append(p)
        return entry.index

    def _send_append(self, peer: int) -> None:
        nxt = self.next_index[peer]
        prev = nxt - 1
        entries = tuple(self.log[prev:prev + MAX_ENTRIES_PER_AE])
        msg = AppendEntries(self.current_term, self.me, prev, self.term_at(prev),
                            self.commit_index, entries)
        self._last_ae[peer] = self._now()
        self._send(peer, msg)

    def _advance_commit(self) -> None:
        for n in range(self.last_index(), self.commit_index, -1):
            if self.term_at(n) != self.current_term:
                break
            held = 1 + sum(1 for p in self.peers() if self.match_index[p] >= n)
            if held >= self.majority:
                self.commit_index = n
                self._apply_committed()
                break

    def _apply_committed(self) -> None:
        while self.last_applied < self.commit_index:
            self.last_applied += 1
            entry = self.log[self.last_applied - 1]
            self._audit("apply", self._now(), self.me, entry.index, entry.term,
                        command_key(entry.command))
            self._apply(entry)

"""Trace auditor for the replicated-log safety properties.

Collects events emitted live by the nodes (leader elections with a log
snapshot, applied entries) and, given the final logs, verifies:

* Election Safety -- at most one leader per term,
* Log Matching -- logs sharing an (index, term) agree on that entry and on
  everything before it,
* Leader Completeness -- every entry applied anywhere before an election is
  present in the new leader's log,
* State-Machine Safety -- no two replicas apply different entries at the
  same index.

``check`` returns a list of human-readable violations; empty means safe.
"""

from __future__ import annotations

from .raft import command_key
from .wire import LogEntry


class RaftAuditor:
    def __init__(self) -> None:
        self.leaders: list[tuple[int, int, int, tuple]] = []  # time, term, who, log ids
        self.applies: list[tuple[int, int, int, int, tuple]] = []  # time, who, idx, term, key

    def record(self, kind: str, *fields) -> None:
        if kind == "leader":
            time, term, who, log_ids = fields
            self.leaders.append((time, term, who, log_ids))
        elif kind == "apply":
            time, who, index, term, key = fields
            self.applies.append((time, who, index, term, key))

    def check(self, final_logs: dict[int, list[LogEntry]]) -> list[str]:
        problems: list[str] = []
        problems += self._election_safety()
        problems += self._log_matching(final_logs)
        problems += self._leader_completeness()
        problems += self._state_machine_safety()
        return problems

    def _election_safety(self) -> list[str]:
        seen: dict[int, int] = {}
        out = []
        for _, term, who, _ in self.leaders:
            if term in seen and seen[term] != who:
                out.append(f"two leaders in term {term}: {seen[term]} and {who}")
            seen[term] = who
        return out

    def _log_matching(self, logs: dict[int, list[LogEntry]]) -> list[str]:
        out = []
        replicas = sorted(logs)
        for i, a in enumerate(replicas):
            for b in replicas[i + 1:]:
                la, lb = logs[a], logs[b]
                upto = 0
                for idx in range(min(len(la), len(lb)), 0, -1):
                    if la[idx - 1].term == lb[idx - 1].term:
                        upto = idx
                        break
                for idx in range(1, upto + 1):
                    ea, eb = la[idx - 1], lb[idx - 1]
                    if ea.term != eb.term or command_key(ea.command) != command_key(eb.command):
                        out.append(
                            f"logs of {a} and {b} diverge at index {idx} despite "
                            f"matching entry at index {upto}")
                        break
        return out

    def _leader_completeness(self) -> list[str]:
        out = []
        for elected_at, term, who, log_ids in self.leaders:
            have = set(log_ids)
            for t, _, index, e_term, key in self.applies:
                if t < elected_at and (index, e_term) not in have:
                    out.append(
                        f"leader {who} of term {term} misses committed entry "
                        f"(index={index}, term={e_term}, cmd={key})")
                    break
        return out

    def _state_machine_safety(self) -> list[str]:
        by_index: dict[int, tuple[int, tuple]] = {}
        out = []
        for _, who, index, term, key in self.applies:
            prior = by_index.get(index)
            if prior is not None and prior != (term, key):
                out.append(
                    f"replica {who} applied (term={term}, cmd={key}) at index "
                    f"{index} where {prior} was applied before")
            by_index.setdefault(index, (term, key))
        return out

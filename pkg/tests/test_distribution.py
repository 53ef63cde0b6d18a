import pytest

from aclab.crdt import INCREMENT, UpdateRecord
from aclab.distribution import (BATCHED, EVENTUAL, FAST, ConsistencyLevel,
                                DistributionControl, build_cl_table)


class Harness:
    """Drives a controller without an engine: manual clock and timer list."""

    def __init__(self, mode, qs=3, timeout_us=100_000, peers=(1, 2, 3, 4),
                 states=("s",), levels=None):
        self.now = 0
        self.sent: list[tuple[str, list]] = []
        self.timers: list[tuple[str, int, int]] = []
        self.peers = list(peers)
        table = levels or [ConsistencyLevel(0, qs, timeout_us)]
        self.ctrl = DistributionControl(
            mode, table, 0, states,
            transmit=lambda state, ups: self.sent.append((state, ups)),
            arm_timer=lambda state, delay, version: self.timers.append(
                (state, self.now + delay, version)),
            active_peers=lambda: self.peers,
            now=lambda: self.now)
        self._seq = 0

    def update(self, state="s", amount=5):
        self._seq += 1
        return UpdateRecord(0, self._seq, state, INCREMENT, amount, 0, self.now, self._seq)

    def fire_due_timers(self):
        due = [t for t in self.timers if t[1] <= self.now]
        self.timers = [t for t in self.timers if t[1] > self.now]
        for state, _, version in due:
            self.ctrl.on_timer(state, version)


def test_fast_mode_distributes_whole_queue_on_each_admission():
    h = Harness(FAST, qs=3)
    u1, u2, u3 = h.update(), h.update(), h.update()
    assert h.ctrl.eval_add(u1)
    assert h.ctrl.eval_add(u2)
    assert h.ctrl.eval_add(u3)
    assert [len(ups) for _, ups in h.sent] == [1, 2, 3]
    assert h.sent[-1][1] == [u1, u2, u3]  # FIFO order preserved


def test_fast_mode_refuses_above_queue_bound():
    h = Harness(FAST, qs=3)
    for _ in range(3):
        assert h.ctrl.eval_add(h.update())
    assert h.ctrl.eval_add(h.update()) is False
    assert h.ctrl.occupancy("s") == 3


def test_batched_mode_third_admission_fills_queue_and_flushes():
    h = Harness(BATCHED, qs=3)
    assert h.ctrl.eval_add(h.update())
    assert h.ctrl.eval_add(h.update())
    assert h.sent == []          # collecting
    assert len(h.timers) == 1    # one pending flush timer
    assert h.ctrl.eval_add(h.update())
    assert [len(ups) for _, ups in h.sent] == [3]


def test_batched_mode_timer_flushes_partial_batch():
    h = Harness(BATCHED, qs=3, timeout_us=100_000)
    h.ctrl.eval_add(h.update())
    assert h.sent == []
    h.now = 100_000
    h.fire_due_timers()
    assert [len(ups) for _, ups in h.sent] == [1]


def test_batched_timer_on_empty_queue_sends_nothing():
    h = Harness(BATCHED, qs=3)
    h.ctrl.eval_add(h.update())
    h.ctrl.on_ack(1, "s", [(0, 1)])
    h.ctrl.on_ack(2, "s", [(0, 1)])
    h.ctrl.on_ack(3, "s", [(0, 1)])
    h.ctrl.on_ack(4, "s", [(0, 1)])
    assert h.ctrl.occupancy("s") == 0
    h.now = 200_000
    h.fire_due_timers()
    assert h.sent == []


def test_eventual_mode_is_unbounded_and_immediate():
    h = Harness(EVENTUAL, qs=3)
    for i in range(50):
        assert h.ctrl.eval_add(h.update())
    assert h.ctrl.occupancy("s") == 50
    assert len(h.sent) == 50


def test_ack_removes_only_fully_acknowledged_updates():
    h = Harness(FAST, qs=5)
    u = h.update()
    h.ctrl.eval_add(u)
    for peer in (1, 2, 3):
        h.ctrl.on_ack(peer, "s", [u.update_id])
        assert h.ctrl.occupancy("s") == 1  # 3 of 4 peers: retained
    h.ctrl.on_ack(4, "s", [u.update_id])
    assert h.ctrl.occupancy("s") == 0


def test_duplicate_and_unknown_acks_are_ignored():
    h = Harness(FAST, qs=5)
    u = h.update()
    h.ctrl.eval_add(u)
    h.ctrl.on_ack(1, "s", [u.update_id])
    h.ctrl.on_ack(1, "s", [u.update_id])          # duplicate
    h.ctrl.on_ack(2, "s", [(9, 99)])              # unknown id
    assert len(h.ctrl.acks[u.update_id]) == 1
    for peer in (2, 3, 4):
        h.ctrl.on_ack(peer, "s", [u.update_id])
    h.ctrl.on_ack(4, "s", [u.update_id])          # after removal: no-op
    assert h.ctrl.occupancy("s") == 0


def test_commit_wait_counts_origin_plus_peer_acks():
    h = Harness(FAST, qs=5)
    u = h.update()
    h.now = 100
    h.ctrl.eval_add(u)
    for t, peer in ((500, 3), (900, 1), (1400, 4), (2000, 2)):
        h.now = t
        h.ctrl.on_ack(peer, "s", [u.update_id])
    assert h.ctrl.commit_wait(u.update_id, 1) == 100   # local apply
    assert h.ctrl.commit_wait(u.update_id, 3) == 900   # two peer acks in
    assert h.ctrl.commit_wait(u.update_id, 5) == 2000  # all peers
    with pytest.raises(ValueError):
        h.ctrl.commit_wait(u.update_id, 0)


def test_apply_cl_relaxation_grows_bound_and_strictness_never_evicts():
    table = build_cl_table()
    h = Harness(FAST, levels=table, peers=(1,))
    h.ctrl.apply_cl("s", 10)
    assert h.ctrl.cl_for("s").qs == 15
    admitted = [h.update() for _ in range(10)]
    for u in admitted:
        assert h.ctrl.eval_add(u)
    h.ctrl.apply_cl("s", 0)  # strictest: qs=3 < occupancy
    assert h.ctrl.occupancy("s") == 10  # no eviction
    assert h.ctrl.eval_add(h.update()) is False  # blocked
    occupancies = [h.ctrl.occupancy("s")]
    for u in admitted:
        h.ctrl.on_ack(1, "s", [u.update_id])
        occupancies.append(h.ctrl.occupancy("s"))
    assert occupancies == sorted(occupancies, reverse=True)  # monotone drain
    assert h.ctrl.eval_add(h.update())  # room again


def test_reapplying_same_level_is_noop():
    table = build_cl_table()
    h = Harness(FAST, levels=table)
    before = h.ctrl.cl_for("s")
    h.ctrl.apply_cl("s", 0)
    assert h.ctrl.cl_for("s") == before


def test_cl_table_is_monotone_in_level():
    table = build_cl_table()
    assert table[0].qs == 3 and table[0].timeout_us == 100_000
    assert table[10].qs == 15 and table[10].timeout_us == 1_000_000
    for a, b in zip(table, table[1:]):
        assert a.qs <= b.qs and a.timeout_us <= b.timeout_us


def test_batched_timer_restarts_for_unacknowledged_batches():
    h = Harness(BATCHED, qs=3, timeout_us=50_000)
    h.ctrl.eval_add(h.update())
    h.now = 50_000
    h.fire_due_timers()
    assert len(h.sent) == 1
    assert len(h.timers) == 1  # retransmission driver restarted
    h.now = 100_000
    h.fire_due_timers()
    assert len(h.sent) == 2  # same unacked batch again

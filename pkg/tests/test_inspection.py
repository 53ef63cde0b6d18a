import random

import pytest

from aclab.crdt import DECREMENT, INCREMENT, UpdateRecord
from aclab.inspection import Inspector, LoggedDecision, comp_inefficiency, pstdev
from oracle_ineff import oracle_phi


def test_population_stdev_matches_hand_values():
    assert pstdev([300, 500]) == 100.0
    assert pstdev([550, 500]) == 25.0
    assert pstdev([800, 250]) == 275.0
    assert pstdev([500, 500]) == 0.0


def test_identical_histories_are_optimal():
    hist = [[300, 500], [550, 500]]
    phi, flags = comp_inefficiency(hist, hist)
    assert phi == 1.0
    assert flags == [0, 0]


def test_hand_worked_ratio_is_three():
    optimal = [[300, 500], [550, 500]]
    actual = [[300, 500], [800, 250]]
    phi, flags = comp_inefficiency(actual, optimal)
    assert phi == 3.0
    assert flags == [0, 1]


def test_degenerate_balanced_optimal_reports_cap():
    optimal = [[500, 500], [500, 500]]
    actual = [[1000, 0], [500, 500]]
    phi, _ = comp_inefficiency(actual, optimal, cap=10.0)
    assert phi == 10.0
    both_zero = [[500, 500]]
    phi, _ = comp_inefficiency(both_zero, both_zero)
    assert phi == 1.0


def test_balanced_pairs_are_dropped_from_both_sums():
    optimal = [[500, 500], [300, 500]]
    actual = [[500, 500], [500, 300]]
    phi, _ = comp_inefficiency(actual, optimal)
    assert phi == 1.0  # only the second offset counts; equal deviations


def test_scale_invariance():
    rng = random.Random(3)
    optimal = [[rng.randint(0, 50) * 10 for _ in range(3)] for _ in range(6)]
    actual = [[rng.randint(0, 50) * 10 for _ in range(3)] for _ in range(6)]
    phi1, _ = comp_inefficiency(actual, optimal)
    phi2, _ = comp_inefficiency([[7 * v for v in row] for row in actual],
                                [[7 * v for v in row] for row in optimal])
    assert phi2 == pytest.approx(phi1, rel=1e-12)


def test_no_suboptimal_offsets_implies_ratio_at_most_one():
    optimal = [[600, 0], [600, 500]]
    actual = [[300, 300], [550, 550]]
    phi, flags = comp_inefficiency(actual, optimal)
    assert all(f == 0 for f in flags)
    assert phi <= 1.0


def test_mismatched_history_lengths_rejected():
    with pytest.raises(ValueError):
        comp_inefficiency([[1, 2]], [[1, 2], [3, 4]])


def rec(origin, seq, state, amount, ts, op=INCREMENT):
    return UpdateRecord(origin, seq, state, op, amount, origin, ts, seq)


def test_remote_before_any_local_decision_is_optimal():
    servers = ["a", "b"]
    insp = Inspector(servers)
    remote = rec(1, 1, "a", 500, ts=100)
    logs = {"a": [remote], "b": []}
    report = insp.on_remote_update(remote, logs, now=500)
    assert report.phi == 1.0
    assert report.window_span == 0


def test_stale_local_decisions_are_replayed_against_serialized_order():
    # Remote cost-500 landed on server a first; the local replica, unaware,
    # stacked two more cost-500 requests onto a.
    servers = ["a", "b"]
    insp = Inspector(servers)
    remote = rec(1, 1, "a", 500, ts=100)
    l1 = rec(0, 1, "a", 500, ts=200)
    l2 = rec(0, 2, "a", 500, ts=300)
    insp.record_decision(l1, 500, 0)
    insp.record_decision(l2, 500, 0)
    logs = {"a": [remote, l1, l2], "b": []}
    report = insp.on_remote_update(remote, logs, now=400)
    # actual: (500,0) -> (1000,0) -> (1500,0); optimal: (500,0) -> (500,500) -> (1000,500)
    expected = oracle_phi(servers, remote, logs,
                          [(l1.key, 500, 0), (l2.key, 500, 0)])
    assert report.phi == pytest.approx(expected, rel=1e-12)
    assert report.phi > 1.0


def test_matches_brute_force_oracle_on_random_scenarios():
    rng = random.Random(99)
    for case in range(120):
        servers = ["a", "b"]
        insp = Inspector(servers, window=64)
        logs = {"a": [], "b": []}
        decisions = []
        seq = {0: 0, 1: 0, 2: 0}
        for i in range(rng.randint(0, 20)):
            ts = rng.randint(0, 1000)
            cost = rng.randint(500, 600)
            origin = rng.choice([0, 1, 2])
            seq[origin] += 1
            op = INCREMENT if rng.random() < 0.9 else DECREMENT
            state = rng.choice(servers)
            u = rec(origin, seq[origin], state, cost, ts, op)
            logs[state].append(u)
            if origin == 0 and op == INCREMENT:
                server = rng.randrange(2) if rng.random() < 0.5 else servers.index(state)
                insp.record_decision(u, cost, server)
                decisions.append((u.key, cost, server))
        seq[1] += 1
        remote = rec(1, seq[1], rng.choice(servers), rng.randint(500, 600),
                     rng.randint(0, 1000))
        logs[remote.state].append(remote)
        got = insp.on_remote_update(remote, logs, now=2000)
        want = oracle_phi(servers, remote, logs, decisions, window=64)
        assert got.phi == pytest.approx(want, rel=1e-9), f"case {case}"

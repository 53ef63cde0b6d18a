import itertools
import random

import pytest

from aclab.crdt import (DECREMENT, INCREMENT, PNCounter, Store, UnknownStateError,
                        UpdateRecord)


def rec(origin, seq, op=INCREMENT, amount=5, state="s", ts=None):
    return UpdateRecord(origin, seq, state, op, amount, origin, ts or seq, seq)


def test_increment_then_decrement():
    c = PNCounter()
    assert c.merge(rec(0, 1, INCREMENT, 5))
    assert c.merge(rec(0, 2, DECREMENT, 2))
    assert c.query() == 3


def test_merge_is_idempotent():
    c = PNCounter()
    r = rec(1, 1, INCREMENT, 7)
    assert c.merge(r)
    assert not c.merge(r)
    assert c.query() == 7


def test_fresh_counter_reads_zero_and_sums_sides():
    c = PNCounter()
    assert c.query() == 0
    for amt in (5, 7):
        c.merge(rec(0, amt, INCREMENT, amt))
    c.merge(rec(1, 1, DECREMENT, 2))
    assert c.query() == 10


def test_all_delivery_orders_converge():
    updates = [rec(0, 1, INCREMENT, 5), rec(1, 1, DECREMENT, 3),
               rec(2, 1, INCREMENT, 11), rec(0, 2, DECREMENT, 1)]
    expected = 5 - 3 + 11 - 1
    for perm in itertools.permutations(updates):
        c = PNCounter()
        for u in perm:
            c.merge(u)
        assert c.query() == expected


def test_amounts_must_be_non_negative():
    with pytest.raises(ValueError):
        rec(0, 1, INCREMENT, -5)
    with pytest.raises(ValueError):
        UpdateRecord(0, 1, "s", 9, 5, 0, 0, 0)


def test_store_query_unknown_state_raises():
    store = Store(["a"])
    with pytest.raises(UnknownStateError):
        store.query("ghost")


def test_client_update_unknown_state_fails_without_side_effects():
    store = Store(["a"])
    bad = rec(0, 1, state="ghost")
    assert store.client_update(bad, eval_add=lambda u: True) is False
    assert store.query("a") == 0


def test_rejected_admission_leaves_counter_and_log_untouched():
    store = Store(["a"])
    r = rec(0, 1, state="a")
    assert store.client_update(r, eval_add=lambda u: False) is False
    assert store.query("a") == 0
    assert store.log("a") == []


def test_accepted_admission_merges_and_logs():
    store = Store(["a"])
    r = rec(0, 1, state="a", amount=5)
    assert store.client_update(r, eval_add=lambda u: True)
    assert store.query("a") == 5
    assert store.log("a") == [r]


def test_remote_update_duplicate_is_ack_worthy_noop():
    store = Store(["a"])
    r = rec(3, 9, state="a", amount=4)
    assert store.remote_update(r) == (True, True)
    assert store.remote_update(r) == (True, False)
    assert store.query("a") == 4
    assert len(store.log("a")) == 1


def test_remote_update_unknown_state_reports_failure():
    store = Store(["a"])
    assert store.remote_update(rec(0, 1, state="ghost")) == (False, False)


def test_log_sorted_by_timestamp_then_origin_then_seq():
    store = Store(["a"])
    records = [rec(2, 1, state="a", ts=50), rec(0, 7, state="a", ts=50),
               rec(1, 3, state="a", ts=10), rec(0, 8, state="a", ts=90)]
    for r in records:
        store.remote_update(r)
    keys = [u.key for u in store.log("a")]
    assert keys == sorted(keys)
    assert len(store.log("a")) == 4


def test_convergence_under_random_duplication_and_reordering():
    rng = random.Random(42)
    for _ in range(200):
        n_replicas = rng.randint(2, 5)
        updates = []
        for origin in range(n_replicas):
            for seq in range(rng.randint(0, 6)):
                updates.append(rec(origin, seq + 1, rng.choice([INCREMENT, DECREMENT]),
                                   rng.randint(0, 600), state="s", ts=rng.randint(0, 999)))
        expected = sum(u.signed_amount() for u in updates)
        finals = []
        for _ in range(n_replicas):
            deliveries = updates * rng.randint(1, 2) + rng.choices(updates, k=3) if updates else []
            rng.shuffle(deliveries)
            c = PNCounter()
            for u in deliveries:
                c.merge(u)
            finals.append(c.query())
        assert all(v == expected for v in finals)

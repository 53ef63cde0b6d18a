import random

import pytest

from aclab.crdt import DECREMENT, INCREMENT, UpdateRecord
from aclab import wire
from aclab.wire import (AckFrame, AppendEntries, AppendReply, ClAck, ClientEnvelope,
                        ClientResponse, ClUpdate, Codec, DistFrame, IneffReport,
                        LogEntry, ReadEnvelope, ReadMarker, RequestVote, SyncRequest,
                        SyncResponse, UpdateFailed, VoteReply)

STATES = ["lb/server-0", "lb/server-1"]


def some_update(seed=0, state="lb/server-0"):
    rng = random.Random(seed)
    return UpdateRecord(rng.randrange(5), rng.randrange(1, 1000), state,
                        rng.choice([INCREMENT, DECREMENT]), rng.randint(500, 600),
                        rng.randrange(5), rng.randrange(10 ** 9), rng.randrange(10 ** 6))


MESSAGES = [
    DistFrame("lb/server-1", (some_update(1, "lb/server-1"), some_update(2, "lb/server-1"))),
    AckFrame("lb/server-0", ((0, 17), (3, 99))),
    UpdateFailed("lb/server-0", (1, 4)),
    ClUpdate("lb/server-1", 7, 12),
    ClAck("lb/server-1", 12),
    IneffReport("lb/server-0", 3, 14, 2.515),
    SyncRequest(),
    SyncResponse((some_update(3), some_update(4, "lb/server-1"))),
    ClientEnvelope(42, 1, 1, 0, 555, 123456),
    ReadEnvelope(43, 2, "lb/server-0"),
    AppendEntries(3, 2, 10, 2, 9, (
        LogEntry(3, 11, None),
        LogEntry(3, 12, ReadMarker("lb/server-0", 4)),
        LogEntry(3, 13, some_update(5)),
    )),
    AppendReply(3, 4, True, 13),
    RequestVote(4, 1, 13, 3),
    VoteReply(4, 0, False),
    ClientResponse(42, wire.OK, 2, 1, 1100),
]


@pytest.mark.parametrize("msg", MESSAGES, ids=lambda m: type(m).__name__)
def test_roundtrip(msg):
    codec = Codec(STATES)
    data = codec.encode(msg)
    assert codec.decode(data) == msg


def test_length_prefix_covers_payload():
    codec = Codec(STATES)
    for msg in MESSAGES:
        data = codec.encode(msg)
        length = int.from_bytes(data[:4], "big")
        assert length + 4 == len(data)


def test_dist_frames_grow_with_update_count():
    codec = Codec(STATES)
    one = codec.size(DistFrame("lb/server-0", (some_update(1),)))
    four = codec.size(DistFrame("lb/server-0", tuple(some_update(i) for i in range(4))))
    assert four == one + 3 * 25  # compact fixed-width update bodies


def test_log_frames_are_larger_than_distribution_frames():
    """The replicated-log envelope is self-contained and verbose; the
    distribution protocol interns ids. A single-update log append must beat a
    single-update distribution frame by a wide margin."""
    codec = Codec(STATES)
    u = some_update(8)
    dist = codec.size(DistFrame(u.state, (u,)))
    append = codec.size(AppendEntries(1, 0, 5, 1, 5, (LogEntry(1, 6, u),)))
    assert append > 2 * dist


def test_truncated_payload_is_rejected():
    codec = Codec(STATES)
    data = codec.encode(MESSAGES[0])
    with pytest.raises(ValueError):
        codec.decode(data[:-1])

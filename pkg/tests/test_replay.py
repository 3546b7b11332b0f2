import io

import numpy as np
import pytest

from conftest import random_transition
from ctrl.errors import EmptyBufferError, RejectedInputError
from ctrl.numerics import RngStream
from ctrl.replay import ReplayBuffer, Transition


def _episode(episode_id, length, g, terminal_end=True):
    out = []
    for t in range(length):
        last = terminal_end and t == length - 1
        out.append(random_transition(g, d=1.0 if last else 0.0, episode_id=episode_id, step_in_episode=t))
    return out


def _fill(buf, items):
    for t in items:
        buf.push(t)
    return buf


def _same(a: Transition, b: Transition) -> bool:
    return (
        np.array_equal(a.s, b.s)
        and np.array_equal(a.a, b.a)
        and a.r == b.r
        and np.array_equal(a.s_next, b.s_next)
        and a.d == b.d
        and a.timeout == b.timeout
        and a.episode_id == b.episode_id
        and a.step_in_episode == b.step_in_episode
    )


def test_push_and_roundtrip(np_rng):
    buf = ReplayBuffer(3, 1, 10)
    t = random_transition(np_rng)
    buf.push(t)
    assert len(buf) == 1
    assert _same(buf.get(0), t)


def test_fifo_eviction(np_rng):
    items = _episode(0, 6, np_rng, terminal_end=False)
    buf = _fill(ReplayBuffer(3, 1, 5), items)
    assert len(buf) == 5
    stored = [buf.get(i) for i in range(5)]
    assert not any(_same(s, items[0]) for s in stored)
    assert all(any(_same(s, it) for s in stored) for it in items[1:])


def test_rejects_invalid_transitions(np_rng):
    buf = ReplayBuffer(3, 1, 5)
    with pytest.raises(RejectedInputError):
        buf.push(random_transition(np_rng, d=0.5))
    with pytest.raises(RejectedInputError):
        buf.push(random_transition(np_rng, d=0.0, timeout=True))
    with pytest.raises(RejectedInputError):
        buf.push(Transition(np.array([np.inf, 0, 0]), np.zeros(1), 0.0, np.zeros(3), 0.0))
    with pytest.raises(RejectedInputError):
        buf.push(random_transition(np_rng, obs_dim=4))
    assert len(buf) == 0


def test_empty_buffer_errors():
    buf = ReplayBuffer(3, 1, 5)
    with pytest.raises(EmptyBufferError):
        buf.sample(4, RngStream(0))
    with pytest.raises(EmptyBufferError):
        buf.sample_pairs(4, RngStream(0))


def test_single_episode_pairs(np_rng):
    items = _episode(0, 10, np_rng)
    buf = _fill(ReplayBuffer(3, 1, 100), items)
    pairs = buf.sample_pairs(2000, RngStream(1, "pairs"))
    for i in range(len(pairs)):
        a, b = pairs.first.row(i), pairs.second.row(i)
        t = a.step_in_episode
        assert _same(a, items[t])
        assert _same(b, items[t + 1] if t < 9 else items[9])
    assert set(pairs.first.step_in_episode) == set(range(10))


def test_pairs_never_cross_episodes(np_rng):
    # A ends by time limit, B starts right after: storage-adjacent but unrelated
    a = _episode(0, 20, np_rng, terminal_end=False)
    a[-1] = Transition(a[-1].s, a[-1].a, a[-1].r, a[-1].s_next, 1.0, True, 0, 19)
    b = _episode(1, 20, np_rng)
    buf = _fill(ReplayBuffer(3, 1, 100), a + b)
    pairs = buf.sample_pairs(10_000, RngStream(2, "pairs"))
    assert np.array_equal(pairs.first.episode_id, pairs.second.episode_id)
    offset = pairs.second.step_in_episode - pairs.first.step_in_episode
    assert set(np.unique(offset)) <= {0, 1}
    # a terminal anchor always self-pairs
    last = pairs.first.d == 1.0
    assert np.array_equal(pairs.first.s[last], pairs.second.s[last])


def test_episode_without_done_flag_still_breaks(np_rng):
    # truncated episode that never got its done: episode id change alone must break the link
    a = _episode(0, 5, np_rng, terminal_end=False)
    b = _episode(1, 5, np_rng)
    buf = _fill(ReplayBuffer(3, 1, 100), a + b)
    succ = buf.successor_slots()
    assert succ[4] == 4


def test_single_transition_self_pairs(np_rng):
    buf = _fill(ReplayBuffer(3, 1, 4), [random_transition(np_rng)])
    pairs = buf.sample_pairs(50, RngStream(0))
    assert np.array_equal(pairs.first.s, pairs.second.s)


def test_eviction_does_not_leave_dangling_pairs(np_rng):
    items = _episode(0, 12, np_rng, terminal_end=False)
    buf = _fill(ReplayBuffer(3, 1, 5), items)  # holds steps 7..11
    pairs = buf.sample_pairs(5000, RngStream(3))
    offset = pairs.second.step_in_episode - pairs.first.step_in_episode
    assert set(np.unique(offset)) <= {0, 1}
    # step 11's successor is not stored yet: self-pair
    newest = pairs.first.step_in_episode == 11
    assert (offset[newest] == 0).all()
    # wraparound: once the anchor's successor overwrites an old slot, link holds
    assert (offset[pairs.first.step_in_episode < 11] == 1).all()


def test_relink_after_overwrite(np_rng):
    # slot j linked to slot j+1 must unlink when slot j+1 is overwritten by another episode
    buf = ReplayBuffer(3, 1, 3)
    ep = _episode(0, 3, np_rng, terminal_end=False)
    _fill(buf, ep)
    buf.push(random_transition(np_rng, episode_id=5, step_in_episode=0))  # overwrites slot 0
    succ = buf.successor_slots()
    # slot 2 (step 2) now precedes slot 0 (episode 5): no link
    assert succ[2] == 2
    assert succ[1] == 2


def test_sample_uniformity(np_rng):
    buf = _fill(ReplayBuffer(3, 1, 10), _episode(0, 10, np_rng))
    batch = buf.sample(100_000, RngStream(4, "uniform"))
    freq = np.bincount(batch.step_in_episode, minlength=10) / 100_000
    assert np.all(np.abs(freq - 0.1) < 0.01)


def test_sample_values_come_from_buffer(np_rng):
    items = _episode(0, 10, np_rng)
    buf = _fill(ReplayBuffer(3, 1, 10), items)
    batch = buf.sample(10, RngStream(5))
    for i in range(10):
        row = batch.row(i)
        assert _same(row, items[row.step_in_episode])


def test_pairs_consume_stream_like_sample(np_rng):
    buf = _fill(ReplayBuffer(3, 1, 50), _episode(0, 30, np_rng))
    s1, s2 = RngStream(6), RngStream(6)
    plain = buf.sample(64, s1)
    pairs = buf.sample_pairs(64, s2)
    assert np.array_equal(plain.s, pairs.first.s)
    assert s1.get_state() == s2.get_state()


def test_exclude_terminal_anchors(np_rng):
    buf = _fill(ReplayBuffer(3, 1, 50), _episode(0, 10, np_rng))
    pairs = buf.sample_pairs(2000, RngStream(7), exclude_terminal_anchors=True)
    assert (pairs.second.step_in_episode == pairs.first.step_in_episode + 1).all()


def test_random_pairs_ignore_episodes(np_rng):
    buf = _fill(ReplayBuffer(3, 1, 50), _episode(0, 10, np_rng) + _episode(1, 10, np_rng))
    pairs = buf.sample_random_pairs(2000, RngStream(8))
    assert (pairs.first.episode_id != pairs.second.episode_id).any()


def test_dump_load_roundtrip(tmp_path, np_rng):
    buf = _fill(ReplayBuffer(3, 1, 7), _episode(0, 5, np_rng) + _episode(1, 5, np_rng))
    path = tmp_path / "buf.bin"
    buf.dump(path)
    back = ReplayBuffer.load(path)
    assert (back.size, back.cursor, back.capacity) == (buf.size, buf.cursor, buf.capacity)
    for i in range(buf.size):
        assert _same(back.get(i), buf.get(i))
    assert np.array_equal(back.successor_slots(), buf.successor_slots())
    raw = path.read_bytes()
    assert raw[:4] == b"CTRB"


def test_load_rejects_garbage():
    with pytest.raises(RejectedInputError):
        ReplayBuffer.read(io.BytesIO(b"NOPE" + bytes(40)))

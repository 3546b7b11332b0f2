import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import random_transition
from ctrl import mixup
from ctrl.errors import RejectedInputError
from ctrl.numerics import RngStream
from ctrl.replay import PairBatch, Transition, TransitionBatch

FIELDS = ("s", "a", "r", "s_next", "d", "terminal")

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def transitions(draw, obs_dim=3, act_dim=2):
    vec = lambda n: np.array(draw(st.lists(finite, min_size=n, max_size=n)))  # noqa: E731
    d = draw(st.sampled_from([0.0, 1.0]))
    timeout = d == 1.0 and draw(st.booleans())
    return Transition(vec(obs_dim), vec(act_dim), draw(finite), vec(obs_dim), d, timeout)


def _field(t, name):
    return np.asarray(getattr(t, name), dtype=np.float64)


def test_worked_reward_example():
    g = np.random.default_rng(0)
    t0 = random_transition(g)
    t1 = random_transition(g)
    t0 = Transition(t0.s, t0.a, 0.0, t0.s_next, 0.0)
    t1 = Transition(t1.s, t1.a, 4.0, t1.s_next, 0.0)
    assert mixup.mix(t0, t1, 0.25).r == 3.0


@settings(max_examples=300, deadline=None)
@given(transitions(), transitions(), st.floats(0, 1))
def test_endpoints_symmetry_convexity(a, b, eps):
    for name in FIELDS:
        assert np.array_equal(_field(mixup.mix(a, b, 1.0), name), _field(a, name))
        assert np.array_equal(_field(mixup.mix(a, b, 0.0), name), _field(b, name))
    ab = mixup.mix(a, b, eps)
    ba = mixup.mix(b, a, 1.0 - eps)
    for name in FIELDS:
        x, y, m = _field(a, name), _field(b, name), _field(ab, name)
        assert np.all(np.minimum(x, y) <= m) and np.all(m <= np.maximum(x, y))
        scale = np.maximum(np.abs(x), np.abs(y)) + 1e-300
        assert np.all(np.abs(m - _field(ba, name)) <= 4 * np.finfo(float).eps * scale)
    assert 0.0 <= ab.d <= 1.0


@settings(max_examples=200, deadline=None)
@given(transitions(), st.floats(0, 1))
def test_self_pair_is_fixed(t, eps):
    m = mixup.mix(t, t, eps)
    for name in FIELDS:
        assert np.array_equal(_field(m, name), _field(t, name))


def test_fractional_done_only_when_exactly_one_source_terminal():
    g = np.random.default_rng(1)
    live = random_transition(g, d=0.0)
    dead = random_transition(g, d=1.0)
    assert mixup.mix(live, dead, 0.3).d == pytest.approx(0.7)
    assert mixup.mix(live, live, 0.3).d == 0.0
    assert mixup.mix(dead, dead, 0.3).d == 1.0


def test_timeout_mixes_as_non_terminal():
    g = np.random.default_rng(2)
    live = random_transition(g, d=0.0)
    cut = random_transition(g, d=1.0, timeout=True)
    m = mixup.mix(live, cut, 0.4)
    assert m.d == pytest.approx(0.6) and m.terminal == 0.0


@pytest.mark.parametrize("eps", [-0.1, 1.1, float("nan")])
def test_mix_rejects_bad_ratio(eps):
    g = np.random.default_rng(3)
    with pytest.raises(RejectedInputError):
        mixup.mix(random_transition(g), random_transition(g), eps)


def test_mix_rejects_dimension_mismatch():
    g = np.random.default_rng(4)
    with pytest.raises(RejectedInputError):
        mixup.mix(random_transition(g, obs_dim=3), random_transition(g, obs_dim=4), 0.5)


def _pairs(n, seed, same=False):
    g = np.random.default_rng(seed)
    first = TransitionBatch.from_transitions(random_transition(g) for _ in range(n))
    second = first if same else TransitionBatch.from_transitions(random_transition(g) for _ in range(n))
    return PairBatch(first, second)


def test_batch_matches_single_mixes():
    pairs = _pairs(50, 5)
    batch = mixup.make_batch(pairs, 0.5, RngStream(0, "mix"))
    for i in range(50):
        single = mixup.mix(pairs.first.row(i), pairs.second.row(i), batch.eps[i])
        for name in FIELDS:
            assert np.array_equal(np.asarray(getattr(batch, name)[i]), _field(single, name))


def test_tiny_beta_stays_near_endpoints():
    pairs = _pairs(10_000, 6)
    batch = mixup.make_batch(pairs, 1e-3, RngStream(1, "mix"))
    x = np.concatenate([batch.s, batch.a, batch.r[:, None], batch.s_next], axis=1)
    first = np.concatenate([pairs.first.s, pairs.first.a, pairs.first.r[:, None], pairs.first.s_next], axis=1)
    second = np.concatenate([pairs.second.s, pairs.second.a, pairs.second.r[:, None], pairs.second.s_next], axis=1)
    near = np.minimum(np.abs(x - first).max(axis=1), np.abs(x - second).max(axis=1)) < 1e-2
    assert near.mean() >= 0.95


def test_self_pairs_pass_through_any_beta():
    pairs = _pairs(100, 7, same=True)
    for beta in (1e-3, 0.5, 1.0):
        batch = mixup.make_batch(pairs, beta, RngStream(2, "mix"))
        assert np.array_equal(batch.s, pairs.first.s)
        assert np.array_equal(batch.r, pairs.first.r)


def test_beta_one_ratios_are_uniform():
    eps = mixup.sample_ratios(RngStream(3, "mix"), 20_000, 1.0)
    assert stats.kstest(eps, "uniform").pvalue > 0.01


def test_one_ratio_per_pair():
    eps = mixup.make_batch(_pairs(64, 8), 1.0, RngStream(4)).eps
    assert len(np.unique(eps)) == 64


def test_uniform_mode_and_bad_mode():
    eps = mixup.sample_ratios(RngStream(5), 1000, 0.01, "uniform")
    assert 0.45 < eps.mean() < 0.55
    with pytest.raises(RejectedInputError):
        mixup.sample_ratios(RngStream(5), 10, 0.5, "triangular")
    with pytest.raises(RejectedInputError):
        mixup.make_batch(_pairs(4, 9), 0.0, RngStream(5))


def test_as_mixed_is_identity():
    pairs = _pairs(10, 10)
    m = mixup.as_mixed(pairs.first)
    assert np.array_equal(m.s, pairs.first.s) and np.array_equal(m.eps, np.ones(10))

import numpy as np
import pytest

from conftest import central_difference, linear_buffer, random_transition, relative_error
from ctrl import mixup
from ctrl.discriminator import Discriminator
from ctrl.errors import RejectedInputError
from ctrl.numerics import Mlp, RngStream, forward
from ctrl.replay import Transition, TransitionBatch


def _disc(seed=0, hidden=(16, 16), **kw):
    return Discriminator(3, 1, RngStream(seed, "disc"), hidden=hidden, **kw)


def _zero_disc():
    dims = (4, 5, 5)
    params = tuple(np.zeros(s) for s in ((4, 5), (5,), (5, 5), (5,)))
    return Discriminator(3, 1, RngStream(0), net=Mlp(dims, params))


def _y(t):
    return np.concatenate([t.s_next, [t.r, t.d]])


def test_zero_net_energy_is_minus_target():
    t = Transition(np.zeros(3), np.zeros(1), -1.0, np.array([1.0, -1.0, 0.0]), 0.0)
    e = _zero_disc().energy(t)
    assert np.array_equal(e, -_y(t))
    assert _zero_disc().distance(t) == pytest.approx(3.0)


def test_residual_example_and_brute_force(np_rng):
    disc = _disc()
    t = random_transition(np_rng)
    pred = forward(disc.net, np.concatenate([t.s, t.a]))
    manual = sum((pred[i] - _y(t)[i]) ** 2 for i in range(5))
    assert disc.distance(t) == pytest.approx(manual, rel=1e-12)


def test_perfect_prediction_has_zero_energy(np_rng):
    disc = _disc()
    s, a = np_rng.normal(size=3), np_rng.normal(size=1)
    y = forward(disc.net, np.concatenate([s, a]))
    t = Transition(s, a, float(y[3]), y[:3], 0.0)
    # d is a target component too; zero the energy only if the net predicts d=0
    e = disc.energy(t)
    assert np.allclose(e[:4], 0.0) and e[4] == pytest.approx(y[4])


def test_energy_is_affine_in_targets(np_rng):
    disc = _disc()
    s, a = np_rng.normal(size=3), np_rng.normal(size=1)
    t1 = Transition(s, a, 1.0, np_rng.normal(size=3), 0.0)
    t2 = Transition(s, a, -3.0, np_rng.normal(size=3), 1.0)
    mid = Transition(s, a, -1.0, (t1.s_next + t2.s_next) / 2, 0.5)
    assert np.allclose(disc.energy(t1) + disc.energy(t2) - 2 * disc.energy(mid), 0.0, atol=1e-12)


def test_batch_matches_single(np_rng):
    disc = _disc()
    items = [random_transition(np_rng) for _ in range(8)]
    batch = TransitionBatch.from_transitions(items)
    assert np.allclose(disc.distance(batch), [disc.distance(t) for t in items])


def test_corrected_distance_endpoints_and_self_pairs(np_rng):
    for seed in range(20):
        disc = _disc(seed)
        a, b = random_transition(np_rng), random_transition(np_rng)
        for eps in (0.0, 1.0):
            assert disc.corrected_distance(mixup.mix(a, b, eps)) <= 1e-10
            assert disc.corrected_distance(mixup.mix(a, b, eps), "scalar") <= 1e-10
        assert disc.corrected_distance(mixup.mix(a, a, 0.37)) <= 1e-10


def test_corrected_distance_direct_formula(np_rng):
    disc = _disc(3)
    a, b = random_transition(np_rng), random_transition(np_rng)
    eps = 0.3
    m = mixup.mix(a, b, eps)
    gap = disc.energy(m) - (eps * disc.energy(a) + (1 - eps) * disc.energy(b))
    assert disc.corrected_distance(m) == pytest.approx(gap @ gap, rel=1e-12)
    assert disc.corrected_distance(m) > 0


def test_corrected_distance_zero_for_linear_model_on_linear_data(np_rng):
    # a linear net that exactly reproduces linear dynamics: every interpolant is on the manifold
    W = np_rng.normal(size=(4, 5))
    net = Mlp((4, 5), (W, np.zeros(5)))
    disc = Discriminator(3, 1, RngStream(0), net=net)

    def make(x):
        y = x @ W
        return Transition(x[:3], x[3:], float(y[3]), y[:3], float(y[4]))

    a, b = make(np_rng.normal(size=4)), make(np_rng.normal(size=4))
    assert disc.corrected_distance(mixup.mix(a, b, 0.42)) == pytest.approx(0.0, abs=1e-20)


def test_corrected_distance_continuous_in_eps(np_rng):
    disc = _disc(4)
    a, b = random_transition(np_rng), random_transition(np_rng)
    f = lambda e: disc.corrected_distance(mixup.mix(a, b, e))  # noqa: E731
    lipschitz = max(abs(f(e + 1e-3) - f(e)) / 1e-3 for e in np.linspace(0, 0.99, 50))
    for e in np.linspace(0.01, 0.99, 20):
        assert abs(f(e) - f(e + 1e-6)) <= 2 * lipschitz * 1e-6 + 1e-12


def test_corrected_distance_needs_source_pair(np_rng):
    with pytest.raises(RejectedInputError):
        _disc().corrected_distance(random_transition(np_rng))


def test_dimension_mismatch(np_rng):
    with pytest.raises(RejectedInputError):
        _disc().energy(random_transition(np_rng, obs_dim=4))


def test_loss_gradient_matches_finite_differences(np_rng):
    disc = _disc(5, hidden=(6,))
    batch = TransitionBatch.from_transitions(random_transition(np_rng) for _ in range(7))
    _, grads = disc.loss_and_grads(batch)

    def loss(params):
        d = Discriminator(3, 1, RngStream(0), net=disc.net.with_params(params))
        return float(d.distance(batch).mean())

    fd = central_difference(loss, [p.copy() for p in disc.net.params])
    for g, f in zip(grads, fd):
        assert relative_error(g, f) < 1e-5


def test_train_step_returns_pre_step_loss_and_overfits(np_rng):
    disc = _disc(6, learning_rate=1e-3)
    batch = TransitionBatch.from_transitions([random_transition(np_rng)] * 4)
    before = float(disc.distance(batch).mean())
    losses = [disc.train_step(batch) for _ in range(3000)]
    assert losses[0] == pytest.approx(before)
    window = np.convolve(losses[500:], np.ones(250) / 250, mode="valid")[::250]
    assert np.all(np.diff(window) <= 0)
    assert losses[-1] < 1e-3 * losses[0]


def test_train_step_rejects_bad_batches(np_rng):
    disc = _disc()
    with pytest.raises(RejectedInputError):
        disc.train_step(_empty())
    mixed = mixup.mix_batch(
        mixup.PairBatch(
            TransitionBatch.from_transitions([random_transition(np_rng, d=0.0)]),
            TransitionBatch.from_transitions([random_transition(np_rng, d=1.0)]),
        ),
        np.array([0.5]),
    )
    with pytest.raises(RejectedInputError):
        disc.train_step(mixed)


def _empty():
    z = np.zeros((0, 3))
    return TransitionBatch(
        z, np.zeros((0, 1)), np.zeros(0), z, np.zeros(0), np.zeros(0, bool), np.zeros(0, int), np.zeros(0, int)
    )


def test_distance_decreases_on_stationary_stream():
    buf = linear_buffer(20, 50, seed=0)
    disc = _disc(7, hidden=(32, 32))
    stream = RngStream(0, "batches")
    losses = np.array([disc.train_step(buf.sample(64, stream)) for _ in range(3000)])
    means = losses[1000:].reshape(-1, 500).mean(axis=1)
    assert np.all(np.diff(means) <= 0)


def test_state_roundtrip(np_rng):
    disc = _disc(8, normalize=True)
    batch = TransitionBatch.from_transitions(random_transition(np_rng) for _ in range(16))
    for _ in range(5):
        disc.train_step(batch)
    twin = _disc(99, normalize=True)
    twin.load_state_dict(disc.state_dict())
    assert np.array_equal(twin.distance(batch), disc.distance(batch))
    assert twin.train_step(batch) == disc.train_step(batch)

"""Continuous transitions: fieldwise convex combination of consecutive transitions.

``mix(x, y, eps) = eps * x + (1 - eps) * y``, with eps weighting the earlier
transition. Results are clipped to the closed interval spanned by the two
sources, so rounding can never step outside it and identical sources mix to
themselves exactly. Actions are not re-clipped: a convex combination of
in-bound actions is in bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ctrl.errors import RejectedInputError
from ctrl.numerics import RngStream, sample_beta
from ctrl.replay import PairBatch, Transition, TransitionBatch

RATIO_MODES = ("beta", "uniform")


def _lerp(x, y, eps):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = eps * x + (1.0 - eps) * y
    return np.clip(out, np.minimum(x, y), np.maximum(x, y))


def _check_eps(eps) -> None:
    e = np.asarray(eps)
    if not (np.isfinite(e).all() and (e >= 0).all() and (e <= 1).all()):
        raise RejectedInputError("interpolation ratio must lie in [0, 1]")


@dataclass(frozen=True)
class ContinuousTransition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    d: float
    terminal: float
    eps: float
    source: tuple[Transition, Transition]


@dataclass(frozen=True)
class MixedBatch:
    """A batch of continuous transitions plus the pairs and ratios that built them.

    ``terminal`` is the interpolated non-timeout done flag; ``d`` the
    interpolated raw done flag.
    """

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    d: np.ndarray
    terminal: np.ndarray
    eps: np.ndarray
    pairs: PairBatch

    def __len__(self) -> int:
        return len(self.r)


def mix(t: Transition, t_next: Transition, eps: float) -> ContinuousTransition:
    _check_eps(eps)
    if np.shape(t.s) != np.shape(t_next.s) or np.shape(t.a) != np.shape(t_next.a):
        raise RejectedInputError("transitions to mix must have identical dimensions")
    eps = float(eps)
    return ContinuousTransition(
        s=_lerp(t.s, t_next.s, eps),
        a=_lerp(t.a, t_next.a, eps),
        r=float(_lerp(t.r, t_next.r, eps)),
        s_next=_lerp(t.s_next, t_next.s_next, eps),
        d=float(_lerp(t.d, t_next.d, eps)),
        terminal=float(_lerp(t.terminal, t_next.terminal, eps)),
        eps=eps,
        source=(t, t_next),
    )


def mix_batch(pairs: PairBatch, eps: np.ndarray) -> MixedBatch:
    """Mix every pair with its own ratio ``eps[i]``."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (len(pairs),):
        raise RejectedInputError(f"need one ratio per pair, got {eps.shape} for {len(pairs)} pairs")
    _check_eps(eps)
    first, second = pairs.first, pairs.second
    col = eps[:, None]
    return MixedBatch(
        s=_lerp(first.s, second.s, col),
        a=_lerp(first.a, second.a, col),
        r=_lerp(first.r, second.r, eps),
        s_next=_lerp(first.s_next, second.s_next, col),
        d=_lerp(first.d, second.d, eps),
        terminal=_lerp(first.terminal, second.terminal, eps),
        eps=eps,
        pairs=pairs,
    )


def sample_ratios(stream: RngStream, n: int, beta: float, mode: str = "beta") -> np.ndarray:
    if mode == "beta":
        return sample_beta(stream, beta, n)
    if mode == "uniform":
        return stream.uniform(size=n)
    raise RejectedInputError(f"unknown ratio mode {mode!r}")


def make_batch(pairs: PairBatch, beta: float, stream: RngStream, mode: str = "beta") -> MixedBatch:
    """Draw one ratio per pair (Beta(beta, beta) or U(0, 1)) and mix."""
    if not 0.0 < beta <= 1.0:
        raise RejectedInputError(f"beta must lie in (0, 1], got {beta}")
    return mix_batch(pairs, sample_ratios(stream, len(pairs), beta, mode))


def as_mixed(batch: TransitionBatch) -> MixedBatch:
    """View authentic transitions as continuous ones with eps = 1 and self-pairs."""
    return mix_batch(PairBatch(batch, batch), np.ones(len(batch)))

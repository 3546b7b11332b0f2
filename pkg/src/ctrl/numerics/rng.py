"""Seeded random streams and the Beta(b, b) sampler.

Streams are PCG64 generators keyed by ``(seed, name)`` through numpy's
``SeedSequence``, so each consumer owns an independent sequence and the
interleaving of calls between consumers cannot change any of them.
"""

from __future__ import annotations

import zlib

import numpy as np

from ctrl.errors import RejectedInputError


class RngStream:
    """A named, independently seeded random stream."""

    def __init__(self, seed: int, name: str = ""):
        if not 0 <= int(seed) < 2**64:
            raise RejectedInputError(f"seed must fit in 64 bits, got {seed}")
        self.seed = int(seed)
        self.name = name
        key = (zlib.crc32(name.encode()),) if name else ()
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key)))

    def child(self, name: str) -> "RngStream":
        """A stream derived from the same seed under a longer name."""
        return RngStream(self.seed, f"{self.name}/{name}" if self.name else name)

    def normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size)

    def get_state(self) -> dict:
        return self._gen.bit_generator.state

    def set_state(self, state: dict) -> None:
        self._gen.bit_generator.state = state

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, name={self.name!r})"


def sample_normal(stream: RngStream, n: int) -> np.ndarray:
    return stream.normal(n)


def sample_uniform(stream: RngStream, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    return stream.uniform(low, high, n)


def _log_gamma_variates(stream: RngStream, shape: float, n: int) -> np.ndarray:
    """log of n Gamma(shape, 1) draws (Marsaglia-Tsang, boosted for shape < 1).

    Working in log space keeps tiny shapes usable: U**(1/shape) underflows to
    zero long before log(U)/shape loses precision.
    """
    boost = shape < 1.0
    a = shape + 1.0 if boost else shape
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(n)
    pending = np.arange(n)
    while pending.size:
        m = pending.size
        x = stream.normal(m)
        u = stream.uniform(size=m)
        v = (1.0 + c * x) ** 3
        ok = v > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            logv = np.log(np.where(ok, v, 1.0))
            ok &= np.log(u) < 0.5 * x * x + d - d * v + d * logv
        out[pending[ok]] = np.log(d) + logv[ok]
        pending = pending[~ok]
    if boost:
        out += np.log(stream.uniform(size=n)) / shape
    return out


_EPS_HI = np.nextafter(1.0, 0.0)
_EPS_LO = np.finfo(np.float64).tiny


def sample_beta(stream: RngStream, beta: float, n: int) -> np.ndarray:
    """n i.i.d. draws from Beta(beta, beta), 0 < beta <= 1, strictly inside (0, 1)."""
    if not (np.isfinite(beta) and 0.0 < beta <= 1.0):
        raise RejectedInputError(f"beta must lie in (0, 1], got {beta}")
    if n < 1:
        raise RejectedInputError(f"n must be >= 1, got {n}")
    g1 = _log_gamma_variates(stream, beta, n)
    g2 = _log_gamma_variates(stream, beta, n)
    # G1 / (G1 + G2) == logistic(log G1 - log G2)
    eps = 0.5 * (1.0 + np.tanh(0.5 * (g1 - g2)))
    return np.clip(eps, _EPS_LO, _EPS_HI)

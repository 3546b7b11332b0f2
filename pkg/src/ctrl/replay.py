"""Ring-buffer replay storage with episode-aware sampling of consecutive pairs.

Binary dump layout (all little-endian)::

    magic      4 bytes   b"CTRB"
    version    uint32    1
    obs_dim    uint32
    act_dim    uint32
    capacity   uint64
    size       uint64
    cursor     uint64    next slot to be written
    records    size x record, in storage-slot order 0..size-1

    record: s f8[obs_dim] | a f8[act_dim] | r f8 | s_next f8[obs_dim] | d f8
            | timeout u1 | episode_id i8 | step_in_episode i8
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np

from ctrl.errors import EmptyBufferError, RejectedInputError
from ctrl.numerics import RngStream

DUMP_MAGIC = b"CTRB"
DUMP_VERSION = 1
_HEADER = struct.Struct("<4sIIIQQQ")


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    d: float
    timeout: bool = False
    episode_id: int = 0
    step_in_episode: int = 0

    @property
    def terminal(self) -> float:
        """The done flag with time-limit endings removed."""
        return 0.0 if self.timeout else self.d


@dataclass(frozen=True)
class TransitionBatch:
    """Column-wise batch of authentic transitions."""

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    d: np.ndarray
    timeout: np.ndarray
    episode_id: np.ndarray = field(repr=False)
    step_in_episode: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.r)

    @property
    def terminal(self) -> np.ndarray:
        return np.where(self.timeout, 0.0, self.d)

    def row(self, i: int) -> Transition:
        return Transition(
            self.s[i].copy(),
            self.a[i].copy(),
            float(self.r[i]),
            self.s_next[i].copy(),
            float(self.d[i]),
            bool(self.timeout[i]),
            int(self.episode_id[i]),
            int(self.step_in_episode[i]),
        )

    @classmethod
    def from_transitions(cls, items) -> "TransitionBatch":
        items = list(items)
        return cls(
            np.array([t.s for t in items], dtype=np.float64),
            np.array([t.a for t in items], dtype=np.float64),
            np.array([t.r for t in items], dtype=np.float64),
            np.array([t.s_next for t in items], dtype=np.float64),
            np.array([t.d for t in items], dtype=np.float64),
            np.array([t.timeout for t in items], dtype=bool),
            np.array([t.episode_id for t in items], dtype=np.int64),
            np.array([t.step_in_episode for t in items], dtype=np.int64),
        )

    @staticmethod
    def concat(first: "TransitionBatch", second: "TransitionBatch") -> "TransitionBatch":
        return TransitionBatch(
            *(np.concatenate([getattr(first, f), getattr(second, f)]) for f in TransitionBatch.__dataclass_fields__)
        )


@dataclass(frozen=True)
class PairBatch:
    """``first[i]`` and ``second[i]`` form one (T_t, T_t+1) pair; self-pairs repeat the anchor."""

    first: TransitionBatch
    second: TransitionBatch

    def __len__(self) -> int:
        return len(self.first)


class ReplayBuffer:
    """FIFO ring of authentic transitions.

    Slot ``j`` is linked to the slot written right after it when both carry the
    same episode id and consecutive step indices. Linkage is recomputed on every
    write, so eviction can never leave a pair pointing at overwritten data.
    """

    def __init__(self, obs_dim: int, act_dim: int, capacity: int = 1_000_000):
        if capacity < 1:
            raise RejectedInputError("capacity must be >= 1")
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.capacity = int(capacity)
        self.size = 0
        self.cursor = 0
        self._s = np.zeros((capacity, obs_dim))
        self._a = np.zeros((capacity, act_dim))
        self._r = np.zeros(capacity)
        self._s_next = np.zeros((capacity, obs_dim))
        self._d = np.zeros(capacity)
        self._timeout = np.zeros(capacity, dtype=bool)
        self._episode = np.zeros(capacity, dtype=np.int64)
        self._step = np.zeros(capacity, dtype=np.int64)
        self._succ = np.full(capacity, -1, dtype=np.int64)

    def __len__(self) -> int:
        return self.size

    def _validate(self, t: Transition) -> None:
        s, a, s_next = (np.asarray(v, dtype=np.float64) for v in (t.s, t.a, t.s_next))
        if s.shape != (self.obs_dim,) or s_next.shape != (self.obs_dim,) or a.shape != (self.act_dim,):
            raise RejectedInputError("transition dims do not match the buffer")
        if not all(np.isfinite(v).all() for v in (s, a, s_next)) or not np.isfinite(t.r):
            raise RejectedInputError("transition holds NaN/Inf")
        if t.d not in (0.0, 1.0):
            raise RejectedInputError(f"stored transitions need d in {{0, 1}}, got {t.d}")
        if t.timeout and t.d != 1.0:
            raise RejectedInputError("a timeout transition must have d == 1")

    def push(self, t: Transition) -> None:
        self._validate(t)
        j = self.cursor
        self._s[j] = t.s
        self._a[j] = t.a
        self._r[j] = t.r
        self._s_next[j] = t.s_next
        self._d[j] = t.d
        self._timeout[j] = t.timeout
        self._episode[j] = t.episode_id
        self._step[j] = t.step_in_episode
        self._succ[j] = -1
        self.size = min(self.size + 1, self.capacity)
        self.cursor = (j + 1) % self.capacity
        if self.size > 1:
            prev = (j - 1) % self.capacity
            if self._episode[prev] == t.episode_id and self._step[prev] + 1 == t.step_in_episode and self._d[prev] == 0:
                self._succ[prev] = j
            else:
                self._succ[prev] = -1

    def _batch(self, idx: np.ndarray) -> TransitionBatch:
        return TransitionBatch(
            self._s[idx],
            self._a[idx],
            self._r[idx],
            self._s_next[idx],
            self._d[idx],
            self._timeout[idx],
            self._episode[idx],
            self._step[idx],
        )

    def get(self, slot: int) -> Transition:
        if not 0 <= slot < self.size:
            raise IndexError(slot)
        return self._batch(np.array([slot])).row(0)

    def successor_slots(self) -> np.ndarray:
        """Per stored slot, the slot of its successor or the slot itself when none is linkable."""
        idx = np.arange(self.size)
        succ = self._succ[: self.size]
        return np.where(succ >= 0, succ, idx)

    def _require(self) -> None:
        if self.size == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")

    def sample(self, n: int, stream: RngStream) -> TransitionBatch:
        """n transitions drawn uniformly with replacement."""
        self._require()
        return self._batch(stream.integers(0, self.size, n))

    def sample_pairs(self, n: int, stream: RngStream, exclude_terminal_anchors: bool = False) -> PairBatch:
        """n consecutive pairs with uniformly drawn anchors.

        An anchor without a stored successor in its episode is paired with
        itself. With ``exclude_terminal_anchors`` such anchors are never drawn
        (falling back to self-pairs only if no linked anchor exists).

        Anchor indices consume ``stream`` exactly as :meth:`sample` does.
        """
        self._require()
        if exclude_terminal_anchors:
            linked = np.flatnonzero(self._succ[: self.size] >= 0)
            anchors = linked[stream.integers(0, len(linked), n)] if len(linked) else stream.integers(0, self.size, n)
        else:
            anchors = stream.integers(0, self.size, n)
        succ = self._succ[anchors]
        partners = np.where(succ >= 0, succ, anchors)
        return PairBatch(self._batch(anchors), self._batch(partners))

    def sample_random_pairs(self, n: int, stream: RngStream) -> PairBatch:
        """Pairs of independently drawn transitions, ignoring episode structure."""
        self._require()
        first = stream.integers(0, self.size, n)
        second = stream.integers(0, self.size, n)
        return PairBatch(self._batch(first), self._batch(second))

    # -- persistence ---------------------------------------------------------

    def _record_dtype(self) -> np.dtype:
        return np.dtype(
            [
                ("s", "<f8", (self.obs_dim,)),
                ("a", "<f8", (self.act_dim,)),
                ("r", "<f8"),
                ("s_next", "<f8", (self.obs_dim,)),
                ("d", "<f8"),
                ("timeout", "u1"),
                ("episode_id", "<i8"),
                ("step_in_episode", "<i8"),
            ]
        )

    def write(self, fh: BinaryIO) -> None:
        fh.write(
            _HEADER.pack(DUMP_MAGIC, DUMP_VERSION, self.obs_dim, self.act_dim, self.capacity, self.size, self.cursor)
        )
        rec = np.zeros(self.size, dtype=self._record_dtype())
        n = self.size
        rec["s"], rec["a"], rec["r"] = self._s[:n], self._a[:n], self._r[:n]
        rec["s_next"], rec["d"], rec["timeout"] = self._s_next[:n], self._d[:n], self._timeout[:n]
        rec["episode_id"], rec["step_in_episode"] = self._episode[:n], self._step[:n]
        fh.write(rec.tobytes())

    @classmethod
    def read(cls, fh: BinaryIO) -> "ReplayBuffer":
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise RejectedInputError("truncated replay dump header")
        magic, version, obs_dim, act_dim, capacity, size, cursor = _HEADER.unpack(header)
        if magic != DUMP_MAGIC or version != DUMP_VERSION:
            raise RejectedInputError(f"not a replay dump (magic={magic!r}, version={version})")
        buf = cls(obs_dim, act_dim, capacity)
        dtype = buf._record_dtype()
        payload = fh.read(dtype.itemsize * size)
        if len(payload) != dtype.itemsize * size:
            raise RejectedInputError("truncated replay dump body")
        rec = np.frombuffer(payload, dtype=dtype)
        buf._s[:size], buf._a[:size], buf._r[:size] = rec["s"], rec["a"], rec["r"]
        buf._s_next[:size], buf._d[:size] = rec["s_next"], rec["d"]
        buf._timeout[:size] = rec["timeout"].astype(bool)
        buf._episode[:size], buf._step[:size] = rec["episode_id"], rec["step_in_episode"]
        buf.size, buf.cursor = int(size), int(cursor)
        buf._relink()
        return buf

    def _relink(self) -> None:
        self._succ[:] = -1
        if self.size < 2:
            return
        idx = np.arange(self.size)
        nxt = (idx + 1) % self.capacity
        valid = nxt < self.size
        # the newest slot has no stored successor; its ring neighbour is the oldest item
        valid &= idx != (self.cursor - 1) % self.capacity
        nxt_safe = np.where(valid, nxt, 0)
        linked = (
            valid
            & (self._episode[nxt_safe] == self._episode[idx])
            & (self._step[nxt_safe] == self._step[idx] + 1)
            & (self._d[idx] == 0)
        )
        self._succ[idx[linked]] = nxt[linked]

    def dump(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            self.write(fh)

    @classmethod
    def load(cls, path: str | Path) -> "ReplayBuffer":
        with open(path, "rb") as fh:
            return cls.read(fh)

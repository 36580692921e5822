"""Named, counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by a
root seed plus a stream id (a tuple of ints and short strings).  Two calls
with the same (seed, stream id) produce the same numbers no matter how the
work is split across workers.
"""

from __future__ import annotations

import zlib
from typing import Union

import numpy as np

StreamKey = Union[int, str]


def _key_to_int(key: StreamKey) -> int:
    if isinstance(key, (bool, np.bool_)):
        raise TypeError("stream keys must be ints or strings")
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("stream keys must be nonnegative")
        return int(key)
    if isinstance(key, str):
        # crc32 is stable across interpreter runs (unlike hash()).  Offset so
        # names never collide with small integer keys.
        return (1 << 32) + zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"unsupported stream key {key!r}")


def make_generator(seed: int, *stream_id: StreamKey) -> np.random.Generator:
    """Philox generator for ``(seed, stream_id)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_to_int(k) for k in stream_id))
    return np.random.Generator(np.random.Philox(ss))


class Streams:
    """A root seed with a stream-id prefix.

    ``Streams(7).child("cce", 3)`` addresses the sub-tree of streams whose id
    starts with ("cce", 3); ``.generator("agent", 0)`` materialises one of them.
    """

    __slots__ = ("seed", "prefix")

    def __init__(self, seed: int, prefix: tuple = ()):
        self.seed = int(seed)
        self.prefix = tuple(prefix)
        for k in self.prefix:
            _key_to_int(k)

    def child(self, *keys: StreamKey) -> "Streams":
        return Streams(self.seed, self.prefix + tuple(keys))

    def generator(self, *keys: StreamKey) -> np.random.Generator:
        return make_generator(self.seed, *(self.prefix + tuple(keys)))

    def __repr__(self):
        return f"Streams(seed={self.seed}, prefix={self.prefix!r})"


def as_streams(rng) -> Streams:
    """Accept a Streams, an int seed, or a Generator (used to draw a seed)."""
    if isinstance(rng, Streams):
        return rng
    if isinstance(rng, (int, np.integer)):
        return Streams(int(rng))
    if isinstance(rng, np.random.Generator):
        return Streams(int(rng.integers(0, 2**63 - 1)))
    raise TypeError(f"cannot build random streams from {type(rng).__name__}")


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, Streams):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return make_generator(int(rng))
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")

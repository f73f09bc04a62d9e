"""Seed derivation for reproducible, order-independent randomness.

Every consumer gets its own Philox stream keyed by a hash of
``(root seed, *tags)``, so adding a consumer never shifts another one's
draws and trials can run in any order or process.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Mapping

import numpy as np


def derive_key(root: int, *tags: object) -> int:
    """128-bit Philox key for ``root`` and a tag path."""
    h = hashlib.blake2b(digest_size=16, person=b"thermolock-rng")
    h.update(str(int(root)).encode())
    for tag in tags:
        h.update(b"\x1f")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest(), "little")


class Stream:
    """A named random stream. Thin wrapper over ``numpy.random.Generator``."""

    __slots__ = ("gen",)

    def __init__(self, key: int):
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def bits(self, n: int) -> np.ndarray:
        return self.gen.integers(0, 2, size=n, dtype=np.uint8)

    def below(self, bound: int, size: int) -> np.ndarray:
        # Generator.integers rejects out-of-range draws, so no modulo bias.
        return self.gen.integers(0, bound, size=size, dtype=np.int64)

    def bit(self) -> int:
        return int(self.gen.integers(0, 2))


class ScriptedStream:
    """Deterministic stand-in that replays fixed bits; used for exhaustive enumeration."""

    def __init__(self, bits: Iterable[int] = ()):
        self._bits = [int(b) & 1 for b in bits]
        self._pos = 0

    def bits(self, n: int) -> np.ndarray:
        if self._pos + n > len(self._bits):
            raise LookupError("scripted stream exhausted")
        out = np.array(self._bits[self._pos:self._pos + n], dtype=np.uint8)
        self._pos += n
        return out

    def bit(self) -> int:
        return int(self.bits(1)[0])

    def below(self, bound: int, size: int) -> np.ndarray:
        width = max(1, (bound - 1).bit_length())
        out = np.empty(size, dtype=np.int64)
        for i in range(size):
            v = 0
            for b in self.bits(width):
                v = (v << 1) | int(b)
            if v >= bound:
                raise ValueError("scripted value out of range")
            out[i] = v
        return out


class Seeds:
    """Root of a stream tree: ``seeds.stream(party, purpose)``; ``seeds.child(i)`` per trial."""

    __slots__ = ("root", "path")

    def __init__(self, root: int, path: tuple = ()):
        self.root = int(root)
        self.path = path

    def child(self, *tags: object) -> "Seeds":
        return Seeds(self.root, self.path + tuple(tags))

    def stream(self, *tags: object) -> Stream:
        return Stream(derive_key(self.root, *self.path, *tags))

    def __repr__(self) -> str:
        return f"Seeds({self.root}, {self.path!r})"


class ScriptedSeeds:
    """Maps stream tags to fixed bit scripts; unknown tags yield all-zero streams."""

    def __init__(self, scripts: Mapping[tuple, Iterable[int]]):
        self.scripts = {tuple(k): list(v) for k, v in scripts.items()}

    def child(self, *tags: object) -> "ScriptedSeeds":
        return self

    def stream(self, *tags: object) -> ScriptedStream:
        return ScriptedStream(self.scripts.get(tuple(tags), [0] * 4096))


def as_seeds(seed) -> Seeds | ScriptedSeeds:
    if isinstance(seed, (Seeds, ScriptedSeeds)):
        return seed
    return Seeds(int(seed))

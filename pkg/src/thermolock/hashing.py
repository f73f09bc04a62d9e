"""Toeplitz hashing over GF(2).

Tag bit ``i`` is ``XOR_j seed[i + j] & x[j]`` for ``j < n``: a linear map
whose matrix is constant along anti-diagonals, read off a seed of
``n + t - 1`` bits. For any two distinct inputs exactly a ``2**-t`` fraction
of seeds makes them collide.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from thermolock import bits as bitops
from thermolock import kernels
from thermolock.errors import ConfigError, InvalidLength


def seed_length(n: int, t: int) -> int:
    if n < 1 or t < 1:
        raise ConfigError("n and t must be positive")
    return n + t - 1


@dataclass(frozen=True)
class HashSeed:
    bits: np.ndarray
    n: int
    t: int

    def __post_init__(self):
        if self.bits.size != seed_length(self.n, self.t):
            raise InvalidLength(f"seed has {self.bits.size} bits, need {seed_length(self.n, self.t)}")

    @classmethod
    def from_register_bits(cls, bits, n: int, t: int) -> "HashSeed":
        """Use the leading ``n + t - 1`` bits of a (possibly longer) seed register."""
        bits = bitops.as_bits(bits)
        need = seed_length(n, t)
        if bits.size < need:
            raise InvalidLength(f"seed register has {bits.size} bits, need {need}")
        return cls(bits[:need].copy(), n, t)


def _y_words(n: int, t: int) -> int:
    return ((t - 1) >> 6) + ((n + 63) >> 6) + 1


def toeplitz_hash(x, seed, t: int | None = None) -> np.ndarray:
    """Hash bit string ``x`` (length n) with ``seed`` (length n + t - 1) to ``t`` bits."""
    x = bitops.as_bits(x)
    if isinstance(seed, HashSeed):
        t = seed.t if t is None else t
        seed = seed.bits
    seed = bitops.as_bits(seed)
    n = x.size
    if t is None:
        t = seed.size - n + 1
    if n < 1 or t < 1:
        raise ConfigError("n and t must be positive")
    if seed.size != seed_length(n, t):
        raise InvalidLength(f"seed has {seed.size} bits, need {seed_length(n, t)}")
    return kernels.toeplitz_bits(bitops.pack_words(x), bitops.pack_words(seed, _y_words(n, t)), n, t)


def toeplitz_hash_reference(x, seed, t: int) -> np.ndarray:
    """Independent oracle: build the explicit t x n matrix and multiply mod 2."""
    x = np.asarray(x, dtype=np.int64)
    seed = np.asarray(seed, dtype=np.int64)
    n = x.size
    matrix = np.array([[seed[i + j] for j in range(n)] for i in range(t)], dtype=np.int64)
    return ((matrix @ x) % 2).astype(np.uint8)


def random_words(gen: np.random.Generator, rows: int, n_bits: int, n_words: int) -> np.ndarray:
    """``rows`` random bit strings of ``n_bits`` packed into ``n_words`` words (high bits cleared)."""
    out = gen.integers(0, 1 << 64, size=(rows, n_words), dtype=np.uint64, endpoint=False)
    full, rem = divmod(n_bits, 64)
    if full < n_words:
        out[:, full] = out[:, full] & np.uint64((1 << rem) - 1) if rem else np.uint64(0)
        out[:, full + 1:] = 0
    return out


def batch_collisions(gen: np.random.Generator, n: int, t: int, trials: int, chunk: int = 100_000) -> int:
    """Monte Carlo: count tag collisions of independent random (x, x', seed) triples."""
    wx = (n + 63) >> 6
    wy = _y_words(n, t)
    hits = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        xs = random_words(gen, m, n, wx + 1)
        xps = random_words(gen, m, n, wx + 1)
        ys = random_words(gen, m, n + t - 1, wy)
        same_input = np.all(xs == xps, axis=1)
        tags = kernels.toeplitz_batch(xs, ys, n, t)
        tags_p = kernels.toeplitz_batch(xps, ys, n, t)
        hits += int(np.count_nonzero((tags == tags_p) & ~same_input))
        done += m
    return hits


def all_tags(n: int, t: int) -> np.ndarray:
    """Tag table ``[seed_index, input_index]`` for every seed and input (tiny n only)."""
    ls = seed_length(n, t)
    if ls > 20 or n > 16:
        raise ConfigError("exhaustive tag table too large")
    inputs = np.array([bitops.from_int(v, n) for v in range(1 << n)], dtype=np.uint8)
    table = np.empty((1 << ls, 1 << n), dtype=np.int64)
    weights = 1 << np.arange(t, dtype=np.int64)[::-1]
    for s in range(1 << ls):
        seed = bitops.from_int(s, ls)
        matrix = np.lib.stride_tricks.sliding_window_view(seed, n)[:t].astype(np.int64)
        table[s] = ((inputs.astype(np.int64) @ matrix.T) % 2) @ weights
    return table


def exhaustive_collision_fractions(n: int, t: int) -> np.ndarray:
    """For every unordered pair of distinct inputs, the fraction of seeds that collide."""
    table = all_tags(n, t)
    size = 1 << n
    i, j = np.triu_indices(size, k=1)
    eq = table[:, i] == table[:, j]
    return eq.mean(axis=0)


# golden vectors: "N t seed_hex input_hex tag_hex" per line

def read_golden(path: str | Path) -> Iterator[tuple[int, int, np.ndarray, np.ndarray, np.ndarray]]:
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        n_s, t_s, seed_hex, x_hex, tag_hex = line.split()
        n, t = int(n_s), int(t_s)
        yield (n, t, bitops.from_hex(seed_hex, seed_length(n, t)), bitops.from_hex(x_hex, n),
               bitops.from_hex(tag_hex, t))


def golden_line(n: int, t: int, seed, x, tag) -> str:
    return f"{n} {t} {bitops.to_hex(seed)} {bitops.to_hex(x)} {bitops.to_hex(tag)}"

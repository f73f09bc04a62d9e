"""Bit-string helpers shared by every module.

Bit strings are ``numpy.uint8`` arrays of 0/1, index 0 first. Two integer
encodings are in use and must not be mixed up:

* hex / table encoding: index 0 is the most significant bit (serialization,
  explicit permutation tables);
* word encoding: index ``j`` lives at bit ``j % 64`` of word ``j // 64``
  (the hashing kernels).
"""

from __future__ import annotations

import numpy as np


def as_bits(value) -> np.ndarray:
    """Coerce a '0101' string, a sequence of ints, or an array to a bit array."""
    if isinstance(value, str):
        if value and set(value) - {"0", "1"}:
            raise ValueError(f"not a bit string: {value!r}")
        return np.frombuffer(value.encode(), dtype=np.uint8) - ord("0") if value else np.zeros(0, np.uint8)
    arr = np.asarray(value, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit strings are one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValueError("bit values must be 0 or 1")
    return arr


def bits_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits))


def to_int(bits) -> int:
    """MSB-first integer value of a bit string."""
    v = 0
    for b in np.asarray(bits).tolist():
        v = (v << 1) | b
    return v


def from_int(value: int, width: int) -> np.ndarray:
    if value < 0 or value >> width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def to_hex(bits) -> str:
    """Lowercase hex, most significant first, left-padded to ``ceil(n/4)`` digits."""
    bits = np.asarray(bits)
    if bits.size == 0:
        return ""
    return format(to_int(bits), "x").zfill((bits.size + 3) // 4)


def from_hex(text: str, n_bits: int) -> np.ndarray:
    if n_bits == 0:
        if text:
            raise ValueError("non-empty hex for zero-length string")
        return np.zeros(0, dtype=np.uint8)
    if len(text) != (n_bits + 3) // 4:
        raise ValueError(f"hex length {len(text)} does not match {n_bits} bits")
    return from_int(int(text, 16), n_bits)


def pack_words(bits, n_words: int | None = None) -> np.ndarray:
    """Little-endian uint64 words, zero padded; one spare word is always appended."""
    bits = np.asarray(bits, dtype=np.uint8)
    need = (bits.size + 63) // 64 + 1
    n_words = need if n_words is None else max(n_words, need)
    packed = np.packbits(bits, bitorder="little")
    buf = np.zeros(n_words * 8, dtype=np.uint8)
    buf[: packed.size] = packed
    return buf.view(np.uint64)


def unpack_word(word: int, width: int) -> np.ndarray:
    return np.array([(int(word) >> i) & 1 for i in range(width)], dtype=np.uint8)


def ceil_log2(n: int) -> int:
    """Bits needed to tell an index in ``[0, n)``; at least 1."""
    return max(1, (n - 1).bit_length())

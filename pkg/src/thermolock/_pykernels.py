"""Pure-Python implementations of the hot loops.

Used when the compiled ``_ckernels`` extension is unavailable or when
``THERMOLOCK_PURE=1``. Both modules expose the same four functions:

``toeplitz_bits(xw, yw, n, t)``
    Output bit ``i`` is the parity of ``window_i(Y) & X`` where the window
    covers seed bits ``[i, i + n)``. Operands are little-endian uint64 words.
``toeplitz_batch(xs, ys, n, t)``
    Row-wise tags packed into uint64 (bit ``i`` = output bit ``i``), ``t <= 64``.
``erasure_counts(outputs, width, g, t)``
    ``counts[s]`` = how many outputs have at least ``g + s`` leading zeros.
``memory_oracle(n, g, weights)``
    Exhaustive maximisation over memory maps; see ``adversaries``.
"""

from __future__ import annotations

import numpy as np

IMPLEMENTATION = "python"


def _as_int(words) -> int:
    return int.from_bytes(np.ascontiguousarray(words, dtype=np.uint64).tobytes(), "little")


def _check(nx_words: int, ny_words: int, n: int, t: int) -> None:
    wx = (n + 63) >> 6
    if ny_words < ((t - 1) >> 6) + wx + 1 or nx_words < wx:
        raise ValueError("packed operands too short")


def toeplitz_bits(xw, yw, n: int, t: int) -> np.ndarray:
    _check(len(xw), len(yw), n, t)
    x = _as_int(xw) & ((1 << n) - 1)
    y = _as_int(yw)
    return np.array([((y >> i) & x).bit_count() & 1 for i in range(t)], dtype=np.uint8)


def toeplitz_batch(xs, ys, n: int, t: int) -> np.ndarray:
    if t > 64:
        raise ValueError("batch tags are limited to 64 bits")
    xs = np.ascontiguousarray(xs, dtype=np.uint64)
    ys = np.ascontiguousarray(ys, dtype=np.uint64)
    if xs.shape[0] != ys.shape[0]:
        raise ValueError("packed operands too short")
    _check(xs.shape[1], ys.shape[1], n, t)
    mask = (1 << n) - 1
    out = np.empty(xs.shape[0], dtype=np.uint64)
    xb, yb = xs.tobytes(), ys.tobytes()
    sx, sy = xs.shape[1] * 8, ys.shape[1] * 8
    for r in range(xs.shape[0]):
        x = int.from_bytes(xb[r * sx:(r + 1) * sx], "little") & mask
        y = int.from_bytes(yb[r * sy:(r + 1) * sy], "little")
        tag = 0
        for i in range(t):
            tag |= (((y >> i) & x).bit_count() & 1) << i
        out[r] = tag
    return out


def erasure_counts(outputs, width: int, g: int, t: int) -> np.ndarray:
    outputs = np.asarray(outputs, dtype=np.int64)
    lengths = np.zeros(outputs.shape, dtype=np.int64)
    v = outputs.copy()
    while np.any(v):
        nz = v != 0
        lengths[nz] += 1
        v >>= 1
    hist = np.bincount(width - lengths, minlength=width + 1)
    tail = np.cumsum(hist[::-1])[::-1]
    return np.array([tail[g + s] if g + s <= width else 0 for s in range(t + 1)], dtype=np.int64)


def memory_oracle(n: int, g: int, weights) -> tuple[int, np.ndarray]:
    weights = np.asarray(weights, dtype=np.int64)
    nx, nm = 1 << n, 1 << g
    n_maps = nm ** nx
    codes = np.arange(n_maps, dtype=np.int64)
    maps = np.empty((n_maps, nx), dtype=np.int64)
    rem = codes.copy()
    for x in range(nx):
        maps[:, x] = rem % nm
        rem //= nm
    xs = np.arange(nx)
    scores = np.zeros(n_maps, dtype=np.int64)
    for s in range(1 << n):
        if weights[s] == 0:
            continue
        picked = [j for j in range(n) if (s >> j) & 1]
        proj = np.zeros(nx, dtype=np.int64)
        for j in picked:
            proj = (proj << 1) | ((xs >> (n - 1 - j)) & 1)
        onehot = np.zeros((nx, 1 << len(picked)), dtype=np.int64)
        onehot[xs, proj] = 1
        for m in range(nm):
            counts = (maps == m).astype(np.int64) @ onehot
            scores += weights[s] * counts.max(axis=1)
    best = int(np.argmax(scores))
    return int(scores[best]), maps[best].copy()

"""Position sampling, sample comparison and one-time-padded positions."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from thermolock import bits as bitops
from thermolock.core import BitRegister, Party
from thermolock.errors import ConfigError, InvalidLength


@dataclass(frozen=True)
class SampleSpec:
    """``t`` positions in ``[0, n)``, drawn with replacement."""

    n: int
    positions: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if any(not 0 <= p < self.n for p in self.positions):
            raise IndexError(f"position out of range for n={self.n}")

    @property
    def t(self) -> int:
        return len(self.positions)

    @property
    def encoded_bits(self) -> int:
        """Size when told: ``t * ceil(log2 n)`` bits."""
        return self.t * bitops.ceil_log2(self.n)

    def encode(self) -> np.ndarray:
        w = bitops.ceil_log2(self.n)
        pos = np.asarray(self.positions, dtype=np.int64).reshape(-1, 1)
        return ((pos >> np.arange(w - 1, -1, -1)) & 1).astype(np.uint8).ravel()

    @classmethod
    def decode(cls, n: int, payload) -> "SampleSpec":
        w = bitops.ceil_log2(n)
        payload = bitops.as_bits(payload)
        if payload.size % w:
            raise InvalidLength("payload is not a whole number of positions")
        rows = payload.reshape(-1, w).astype(np.int64)
        return cls(n, tuple((rows << np.arange(w - 1, -1, -1)).sum(axis=1).tolist()))

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "positions": list(self.positions)})

    @classmethod
    def from_json(cls, text: str) -> "SampleSpec":
        data = json.loads(text)
        return cls(int(data["n"]), tuple(int(p) for p in data["positions"]))


@dataclass(frozen=True)
class PadSpec:
    n: int
    pad: tuple[int, ...]
    masked: tuple[int, ...]


def draw_positions(n: int, t: int, stream) -> SampleSpec:
    if n < 1 or t < 1:
        raise ConfigError("n and t must be >= 1")
    return SampleSpec(n, tuple(int(v) for v in stream.below(n, t)))


def sample(register: BitRegister, spec: SampleSpec, party: Party | None = None) -> np.ndarray:
    """Read the register at ``spec``'s positions. Free; charges ``t`` workspace bits to ``party``."""
    if register.n_bits != spec.n:
        raise InvalidLength(f"spec is for n={spec.n}, register has {register.n_bits} bits")
    if party is not None:
        party.require(register)
        party.use_workspace(spec.t)
    if not spec.positions:
        return np.zeros(0, dtype=np.uint8)
    return register.bits[list(spec.positions)].copy()


def compare_samples(a, b) -> bool:
    a = bitops.as_bits(a)
    b = bitops.as_bits(b)
    if a.size != b.size:
        raise InvalidLength("sample lengths differ")
    return bool(np.array_equal(a, b))


def mask_positions(spec: SampleSpec, pad_stream) -> PadSpec:
    pad = tuple(int(v) for v in pad_stream.below(spec.n, spec.t))
    return mask_with(spec, pad)


def mask_with(spec: SampleSpec, pad) -> PadSpec:
    pad = tuple(int(v) for v in pad)
    if len(pad) != spec.t:
        raise InvalidLength("pad and positions differ in length")
    return PadSpec(spec.n, pad, tuple((a + s) % spec.n for a, s in zip(pad, spec.positions)))


def unmask_positions(n: int, pad, masked) -> SampleSpec:
    pad, masked = tuple(pad), tuple(masked)
    if len(pad) != len(masked):
        raise InvalidLength("pad and masked vector differ in length")
    return SampleSpec(n, tuple((b - a) % n for a, b in zip(pad, masked)))

"""Registers, the free-energy ledger, reversible operations and the two channels.

Every protocol in the package is assembled from the operations here, so the
cost accounting holds by construction:

* erasing ``k`` bits costs ``k`` ledger units (``k_B T ln 2`` is the unit);
* provenance-guaranteed blank bits can be turned back into units;
* reversible permutations are free;
* ``tell`` is a bounded, copyable classical message and ``send`` moves a
  whole register, leaving the sender nothing.

Each bit of a register carries a *blank* flag that is only ever set when the
zero is paid for (erasure) or provably preserved (reversible analysis). The
flags never over-credit, which is what makes the potential
``ledger balance + owned blank bits`` a sound measure of free energy.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from thermolock import bits as bitops
from thermolock.errors import (
    BudgetExhausted,
    ConfigError,
    IllegalExtraction,
    InvalidLength,
    NotOwner,
    RefusedCopy,
    TellCapExceeded,
    WidthMismatch,
    WorkspaceExceeded,
)
from thermolock.rng import Seeds, Stream

ENVIRONMENT = "Environment"
DEFAULT_WORKSPACE_CAP = 8192
DEFAULT_TELL_CAP = 4096
MAX_TABLE_WIDTH = 20
MAX_SUPPORT_WIDTH = 24

_auto_ids = itertools.count()


class Provenance(str, Enum):
    MIXED_FRESH = "MixedFresh"
    DERIVED = "Derived"
    BLANK = "Blank"


class BitRegister:
    """A fixed-length bit string with per-bit blank provenance and one owner."""

    __slots__ = ("id", "_bits", "_blank", "_fresh", "owner", "_nblank")

    def __init__(self, id: str, bits, owner: str = ENVIRONMENT, blank=None, fresh: bool = False):
        arr = bitops.as_bits(bits).copy()
        if arr.size < 1:
            raise InvalidLength("register length must be at least 1")
        self.id = id
        self._bits = arr
        self._blank = np.zeros(arr.size, dtype=bool) if blank is None else np.array(blank, dtype=bool)
        if self._blank.shape != arr.shape:
            raise InvalidLength("blank mask length differs from register length")
        if np.any(arr[self._blank]):
            raise ValueError("blank-flagged bits must be zero")
        self._nblank = int(np.count_nonzero(self._blank))
        self._fresh = fresh
        self.owner = owner

    @property
    def n_bits(self) -> int:
        return self._bits.size

    @property
    def bits(self) -> np.ndarray:
        """Read-only view. Parties should go through :meth:`Party.read`."""
        view = self._bits.view()
        view.flags.writeable = False
        return view

    @property
    def blank_mask(self) -> np.ndarray:
        view = self._blank.view()
        view.flags.writeable = False
        return view

    @property
    def blank_count(self) -> int:
        return self._nblank

    @property
    def provenance(self) -> Provenance:
        if self._nblank == self._blank.size:
            return Provenance.BLANK
        if self._fresh:
            return Provenance.MIXED_FRESH
        return Provenance.DERIVED

    @property
    def hex(self) -> str:
        return bitops.to_hex(self._bits)

    def to_json(self) -> dict:
        return {"id": self.id, "n_bits": self.n_bits, "provenance": self.provenance.value, "hex": self.hex}

    @classmethod
    def from_json(cls, data: dict, owner: str = ENVIRONMENT, trust_provenance: bool = False) -> "BitRegister":
        """Rebuild a register. Blank provenance is only honoured with ``trust_provenance``:
        a file is not evidence that anyone paid for the zeros."""
        n = int(data["n_bits"])
        bits = bitops.from_hex(data["hex"], n)
        prov = Provenance(data.get("provenance", Provenance.DERIVED.value))
        blank = None
        if prov is Provenance.BLANK and trust_provenance:
            blank = np.ones(n, dtype=bool)
        return cls(str(data["id"]), bits, owner=owner, blank=blank, fresh=prov is Provenance.MIXED_FRESH)

    def __repr__(self) -> str:
        return f"BitRegister({self.id!r}, n={self.n_bits}, {self.provenance.value}, owner={self.owner!r})"


@dataclass
class FreeEnergyLedger:
    """Erasure units: ``spent <= initial_budget + extracted`` at all times."""

    initial_budget: int
    spent: int = 0
    extracted: int = 0

    def __post_init__(self):
        if self.initial_budget < 0:
            raise ConfigError("budget must be non-negative")

    @property
    def balance(self) -> int:
        return self.initial_budget + self.extracted - self.spent

    def charge(self, k: int) -> None:
        if self.spent + k > self.initial_budget + self.extracted:
            raise BudgetExhausted(f"need {k}, have {self.balance}")
        self.spent += k

    def credit(self, k: int) -> None:
        self.extracted += k

    def snapshot(self) -> tuple[int, int, int]:
        return self.initial_budget, self.spent, self.extracted

    def to_json(self) -> dict:
        return {"initial_budget": self.initial_budget, "spent": self.spent, "extracted": self.extracted}


class Party:
    """A player: a ledger, owned registers and a bounded classical workspace.

    ``potential_trace`` records the potential after every operation the party
    performs or receives, and ``target_log`` notes which registers each
    reversible operation may have rewritten (the non-transferability
    simulator relies on it).
    """

    def __init__(self, name: str, budget: int = 0, workspace_cap: int | None = DEFAULT_WORKSPACE_CAP):
        if name == ENVIRONMENT:
            raise ConfigError("'Environment' is reserved")
        self.name = name
        self.ledger = FreeEnergyLedger(int(budget))
        self.registers: dict[str, BitRegister] = {}
        self.workspace_used = 0
        self.workspace_cap = workspace_cap
        self.potential_trace: list[int] = []
        self._owned_blank = 0  # running total of blank bits over owned registers
        self.target_log: list[tuple[str, frozenset[str]]] = []
        self.audit()

    def __repr__(self) -> str:
        return f"Party({self.name!r}, balance={self.ledger.balance}, registers={sorted(self.registers)})"

    def owns(self, register: BitRegister) -> bool:
        return register.owner == self.name and self.registers.get(register.id) is register

    def require(self, register: BitRegister) -> None:
        if not self.owns(register):
            raise NotOwner(f"{self.name} does not own register {register.id!r}")

    def claim(self, register: BitRegister) -> BitRegister:
        """Take a register floating in the environment."""
        if register.owner != ENVIRONMENT:
            raise NotOwner(f"register {register.id!r} is held by {register.owner}")
        if register.id in self.registers:
            raise ConfigError(f"{self.name} already holds a register named {register.id!r}")
        register.owner = self.name
        self.registers[register.id] = register
        self._owned_blank += register._nblank
        self.audit()
        return register

    def new_register(self, n: int, stream, id: str) -> BitRegister:
        return self.claim(new_mixed_register(n, stream, id=id))

    def read(self, register: BitRegister) -> np.ndarray:
        self.require(register)
        return register._bits.copy()

    def use_workspace(self, n_bits: int) -> None:
        if self.workspace_cap is not None and self.workspace_used + n_bits > self.workspace_cap:
            raise WorkspaceExceeded(f"{self.name}: workspace {self.workspace_used}+{n_bits} > {self.workspace_cap}")
        self.workspace_used += n_bits

    def release_workspace(self, n_bits: int) -> None:
        self.workspace_used = max(0, self.workspace_used - n_bits)

    def potential(self) -> int:
        return self.ledger.balance + self._owned_blank

    def _reblank(self, register: BitRegister) -> None:
        """Refresh the cached blank count after ``register``'s mask changed."""
        n = int(np.count_nonzero(register._blank))
        if register.owner == self.name:
            self._owned_blank += n - register._nblank
        register._nblank = n

    def audit(self) -> None:
        led = self.ledger
        assert led.spent <= led.initial_budget + led.extracted, f"ledger broken for {self.name}"
        assert self.workspace_cap is None or self.workspace_used <= self.workspace_cap
        self.potential_trace.append(self.potential())


def _as_stream(seed) -> Stream:
    if hasattr(seed, "bits"):
        return seed
    return Seeds(int(seed)).stream("register")


def new_mixed_register(n: int, seed, id: str | None = None) -> BitRegister:
    """``n`` uniform bits from the environment; nobody owns it yet and nobody paid."""
    if n < 1:
        raise InvalidLength(f"register length must be >= 1, got {n}")
    bits = _as_stream(seed).bits(n)
    return BitRegister(id if id is not None else f"r{next(_auto_ids)}", bits, fresh=True)


def erase(party: Party, register: BitRegister, k: int | None = None) -> None:
    """Reset the first ``k`` bits to zero. Charged by length, never by content."""
    party.require(register)
    k = register.n_bits if k is None else k
    if not 0 <= k <= register.n_bits:
        raise InvalidLength(f"prefix {k} outside register of {register.n_bits} bits")
    party.ledger.charge(k)
    register._bits[:k] = 0
    register._blank[:k] = True
    party._reblank(register)
    if k:
        register._fresh = False
    party.target_log.append(("erase", frozenset([register.id])))
    party.audit()


def extract(party: Party, register: BitRegister, k: int | None = None, seed=0) -> None:
    """Spend ``k`` guaranteed-blank bits for ``k`` ledger units (Szilard engine)."""
    party.require(register)
    k = register.n_bits if k is None else k
    if not 0 <= k <= register.n_bits:
        raise InvalidLength(f"prefix {k} outside register of {register.n_bits} bits")
    if not register._blank[:k].all():
        raise IllegalExtraction(f"bits of {register.id!r} are not provenance-guaranteed zero")
    register._bits[:k] = _as_stream(seed).bits(k)
    register._blank[:k] = False
    party._reblank(register)
    party.ledger.credit(k)
    party.target_log.append(("extract", frozenset([register.id])))
    party.audit()


class Gate(NamedTuple):
    op: str  # "NOT", "CNOT" (a=control, b=target) or "SWAP"
    a: int
    b: int = -1


def NOT(i: int) -> Gate:
    return Gate("NOT", i)


def CNOT(c: int, t: int) -> Gate:
    return Gate("CNOT", c, t)


def SWAP(i: int, j: int) -> Gate:
    return Gate("SWAP", i, j)


class ReversiblePermutation:
    """A bijection on ``{0,1}^width``: either a gate list or an explicit table.

    Tables index states MSB-first (bit 0 of the register is the top bit of the
    index) and are limited to :data:`MAX_TABLE_WIDTH` bits. Gate lists are
    compiled into layers of mutually independent gates of one kind, which are
    applied as vectorised operations.
    """

    def __init__(self, width: int, gates: Sequence[Gate] | None = None, table=None):
        if width < 1:
            raise InvalidLength("permutation width must be >= 1")
        if (gates is None) == (table is None):
            raise ConfigError("give exactly one of gates or table")
        self.width = width
        self.gates: tuple[Gate, ...] | None = None
        self.table: np.ndarray | None = None
        if gates is not None:
            self.gates = tuple(g if type(g) is Gate else Gate(*g) for g in gates)
            self._layers = self._compile(self.gates)
            touched = np.zeros(width, dtype=bool)
            for op, a, b in self._layers:
                touched[b if op == "CNOT" else a] = True
                if op == "SWAP":
                    touched[b] = True
            self._touched = touched
        else:
            if width > MAX_TABLE_WIDTH:
                raise ConfigError(f"explicit tables are capped at {MAX_TABLE_WIDTH} bits")
            tab = np.asarray(table, dtype=np.int64)
            if tab.shape != (1 << width,):
                raise ConfigError(f"table needs {1 << width} entries")
            if tab.min() < 0 or tab.max() >= (1 << width) or np.any(np.bincount(tab, minlength=1 << width) != 1):
                raise ConfigError("table is not a bijection")
            self.table = tab
            self.table.flags.writeable = False
            self._touched = np.ones(width, dtype=bool)

    def _compile(self, gates: tuple[Gate, ...]) -> list[tuple[str, np.ndarray, np.ndarray]]:
        layers: list[tuple[str, list[int], list[int], set[int], set[int]]] = []
        for g in gates:
            op, a, b = g
            if op == "NOT":
                wires = (a,)
            elif op in ("CNOT", "SWAP"):
                wires = (a, b)
                if a == b:
                    raise ConfigError(f"{op} needs two distinct wires")
            else:
                raise ConfigError(f"unknown gate {op!r}")
            if any(not 0 <= i < self.width for i in wires):
                raise ConfigError(f"gate {g} outside width {self.width}")
            cur = layers[-1] if layers else None
            if cur is not None and cur[0] == op:
                _, la, lb, reads, writes = cur
                if op == "CNOT":
                    fits = b not in reads and b not in writes and a not in writes
                else:
                    fits = not (set(wires) & (reads | writes))
                if fits:
                    la.append(a)
                    lb.append(b)
                    if op == "CNOT":
                        reads.add(a)
                        writes.add(b)
                    else:
                        writes.update(wires)
                    continue
            reads = {a} if op == "CNOT" else set()
            writes = {b} if op == "CNOT" else set(wires)
            layers.append((op, [a], [b], reads, writes))
        return [(op, np.array(la, dtype=np.intp), np.array(lb, dtype=np.intp)) for op, la, lb, _, _ in layers]

    @classmethod
    def from_gates(cls, width: int, gates: Iterable[Gate]) -> "ReversiblePermutation":
        return cls(width, gates=list(gates))

    @classmethod
    def from_table(cls, width: int, table) -> "ReversiblePermutation":
        return cls(width, table=table)

    @classmethod
    def identity(cls, width: int) -> "ReversiblePermutation":
        return cls(width, gates=[])

    @classmethod
    def random_table(cls, width: int, stream) -> "ReversiblePermutation":
        gen = stream.gen if hasattr(stream, "gen") else np.random.default_rng(stream)
        return cls(width, table=gen.permutation(1 << width))

    @property
    def is_table(self) -> bool:
        return self.table is not None

    def inverse(self) -> "ReversiblePermutation":
        if self.gates is not None:
            return ReversiblePermutation(self.width, gates=list(reversed(self.gates)))
        inv = np.empty_like(self.table)
        inv[self.table] = np.arange(self.table.size)
        return ReversiblePermutation(self.width, table=inv)

    def apply(self, bits) -> np.ndarray:
        bits = bitops.as_bits(bits)
        if bits.size != self.width:
            raise WidthMismatch(f"permutation width {self.width} vs {bits.size} bits")
        if self.table is not None:
            return bitops.from_int(int(self.table[bitops.to_int(bits)]), self.width)
        out = bits.copy()
        for op, a, b in self._layers:
            if op == "NOT":
                out[a] ^= 1
            elif op == "CNOT":
                out[b] ^= out[a]
            else:
                out[a], out[b] = out[b], out[a].copy()
        return out

    def apply_ints(self, values) -> np.ndarray:
        """Vectorised application to MSB-first state indices."""
        values = np.asarray(values, dtype=np.int64)
        if self.table is not None:
            return self.table[values]
        w = self.width
        out = values.copy()
        for op, a, b in self.gates:
            sa = w - 1 - a
            if op == "NOT":
                out ^= 1 << sa
            elif op == "CNOT":
                out ^= ((out >> sa) & 1) << (w - 1 - b)
            else:
                sb = w - 1 - b
                diff = ((out >> sa) ^ (out >> sb)) & 1
                out ^= (diff << sa) | (diff << sb)
        return out

    def blank_after(self, blank) -> np.ndarray:
        """Which bits are provably zero after the permutation, given the input blanks.

        Gate lists use a forward pass: ``NOT`` clears the flag, ``CNOT`` clears
        the target's flag unless the control is blank, ``SWAP`` swaps flags.
        Tables are analysed exactly over every input consistent with the
        blanks. Neither can report more blanks than it was given.
        """
        blank = np.array(blank, dtype=bool)
        if blank.size != self.width:
            raise WidthMismatch("blank mask width mismatch")
        if self.gates is not None:
            for op, a, b in self._layers:
                if op == "NOT":
                    blank[a] = False
                elif op == "CNOT":
                    blank[b] &= blank[a]
                else:
                    blank[a], blank[b] = blank[b], blank[a].copy()
            return blank
        free = [self.width - 1 - i for i in range(self.width) if not blank[i]]
        support = np.zeros(1, dtype=np.int64)
        for shift in free:
            support = np.concatenate([support, support | (1 << shift)])
        ored = int(np.bitwise_or.reduce(self.table[support]))
        return np.array([not (ored >> (self.width - 1 - i)) & 1 for i in range(self.width)], dtype=bool)

    def targets(self) -> set[int]:
        """Bit positions whose value the permutation may change."""
        return set(np.flatnonzero(self._touched).tolist())

    def __repr__(self) -> str:
        kind = "table" if self.table is not None else f"{len(self.gates)} gates"
        return f"ReversiblePermutation(width={self.width}, {kind})"


@functools.lru_cache(maxsize=256)
def fanout(n: int, copies: int = 1) -> ReversiblePermutation:
    """CNOT layer XOR-ing the first ``n`` wires into each of ``copies`` following blocks."""
    return ReversiblePermutation(n * (copies + 1), gates=[CNOT(i, (k + 1) * n + i) for k in range(copies) for i in range(n)])


@functools.lru_cache(maxsize=256)
def fold(n: int, parts: int) -> ReversiblePermutation:
    """CNOT layers XOR-ing the first ``parts - 1`` blocks of ``n`` wires into the last block."""
    last = (parts - 1) * n
    return ReversiblePermutation(n * parts, gates=[CNOT(k * n + i, last + i) for k in range(parts - 1) for i in range(n)])


def apply_reversible(party: Party, perm: ReversiblePermutation, registers: Sequence[BitRegister]) -> None:
    """Apply ``perm`` to the concatenation of ``registers``; free of charge."""
    for reg in registers:
        party.require(reg)
    if len({id(r) for r in registers}) != len(registers):
        raise ConfigError("a register may appear only once")
    width = sum(r.n_bits for r in registers)
    if width != perm.width:
        raise WidthMismatch(f"permutation width {perm.width} vs registers {width}")
    state = np.concatenate([r._bits for r in registers])
    blank = np.concatenate([r._blank for r in registers])
    new_state = perm.apply(state)
    new_blank = perm.blank_after(blank)
    touched = perm._touched
    pos = 0
    hit: set[str] = set()
    for reg in registers:
        n = reg.n_bits
        reg._bits[:] = new_state[pos:pos + n]
        reg._blank[:] = new_blank[pos:pos + n]
        party._reblank(reg)
        if touched[pos:pos + n].any():
            reg._fresh = False
            hit.add(reg.id)
        pos += n
    party.target_log.append(("reversible", frozenset(hit)))
    party.audit()


def copy_into_blank(party: Party, src: BitRegister, dst: BitRegister) -> None:
    """Bitwise CNOT fan-out of ``src`` onto an all-blank ``dst`` of equal length."""
    party.require(src)
    party.require(dst)
    if dst.provenance is not Provenance.BLANK:
        raise RefusedCopy(f"{dst.id!r} is not blank; copying onto unknown data is not free")
    if src.n_bits != dst.n_bits:
        raise WidthMismatch("copy needs equal lengths")
    apply_reversible(party, fanout(src.n_bits), [src, dst])


def _certify_blank(party: Party, register: BitRegister, start: int = 0, stop: int | None = None) -> None:
    """Flag bits as blank when a share constraint proves they are zero."""
    party.require(register)
    stop = register.n_bits if stop is None else stop
    assert not register._bits[start:stop].any()
    register._blank[start:stop] = True
    party._reblank(register)


@dataclass(frozen=True)
class Tell:
    sender: str
    receiver: str
    payload: str  # '0'/'1' characters

    kind = "tell"

    def to_json(self) -> dict:
        return {"kind": "tell", "from": self.sender, "to": self.receiver, "payload": self.payload}


@dataclass(frozen=True)
class Send:
    sender: str
    receiver: str
    register_id: str
    n_bits: int
    content: str  # hex snapshot at hand-over, for auditing only

    kind = "send"

    def to_json(self) -> dict:
        return {
            "kind": "send", "from": self.sender, "to": self.receiver,
            "register": self.register_id, "n_bits": self.n_bits, "hex": self.content,
        }


@dataclass
class Transcript:
    tell_cap: int = DEFAULT_TELL_CAP
    events: list = field(default_factory=list)
    tell_bits_total: int = 0

    def view(self) -> tuple:
        """Hashable summary used to compare transcripts."""
        return tuple(tuple(e.to_json().items()) for e in self.events)

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self.events]


def tell(transcript: Transcript, sender: Party, receiver: Party, payload) -> np.ndarray:
    """Bounded classical message; returns the receiver's copy."""
    payload = bitops.as_bits(payload)
    n = payload.size
    if transcript.tell_bits_total + n > transcript.tell_cap:
        raise TellCapExceeded(f"{transcript.tell_bits_total}+{n} > {transcript.tell_cap}")
    receiver.use_workspace(n)
    transcript.tell_bits_total += n
    transcript.events.append(Tell(sender.name, receiver.name, bitops.bits_str(payload)))
    return payload.copy()


def send(transcript: Transcript | None, sender: Party, receiver: Party, register: BitRegister) -> BitRegister:
    """Move a register; the sender keeps no copy and loses all access."""
    sender.require(register)
    if register.id in receiver.registers:
        raise ConfigError(f"{receiver.name} already holds a register named {register.id!r}")
    del sender.registers[register.id]
    sender._owned_blank -= register._nblank
    register.owner = receiver.name
    receiver.registers[register.id] = register
    receiver._owned_blank += register._nblank
    if transcript is not None:
        transcript.events.append(Send(sender.name, receiver.name, register.id, register.n_bits, register.hex))
    sender.audit()
    receiver.audit()
    return register


def release(party: Party, register: BitRegister) -> None:
    """Drop a register back into the environment (it thermalises; nothing is paid)."""
    party.require(register)
    del party.registers[register.id]
    party._owned_blank -= register._nblank
    register.owner = ENVIRONMENT
    party.audit()


@dataclass(frozen=True)
class JointSupport:
    """Support of a joint distribution over several bit-string components."""

    widths: tuple[int, ...]
    rows: frozenset

    @classmethod
    def of(cls, widths: Sequence[int], rows: Iterable[Sequence[int]]) -> "JointSupport":
        widths = tuple(int(w) for w in widths)
        if sum(widths) > MAX_SUPPORT_WIDTH:
            raise ConfigError(f"support width {sum(widths)} exceeds {MAX_SUPPORT_WIDTH}")
        frozen = frozenset(tuple(int(v) for v in row) for row in rows)
        for row in frozen:
            if len(row) != len(widths) or any(not 0 <= v < (1 << w) for v, w in zip(row, widths)):
                raise ConfigError(f"row {row} does not fit widths {widths}")
        return cls(widths, frozen)

    def project(self, parts: Sequence[int]) -> frozenset:
        return frozenset(tuple(row[i] for i in parts) for row in self.rows)


def max_entropy(support: JointSupport, parts: Sequence[int] | None = None) -> float:
    """``log2`` of the support size, optionally of the projection onto ``parts``."""
    if not support.rows:
        raise ConfigError("empty support")
    rows = support.rows if parts is None else support.project(parts)
    return math.log2(len(rows))

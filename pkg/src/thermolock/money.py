"""Sampling banknotes and hashing tickets, plus the bank's record store.

A note is a physical register and carries no secret; everything the bank
needs to verify it lives in a :class:`BankRecord`. The store is an
append-only JSON-lines file where the last line for an id wins.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from thermolock import bits as bitops
from thermolock.adversaries import Strategy
from thermolock.core import (
    DEFAULT_TELL_CAP,
    ENVIRONMENT,
    BitRegister,
    Party,
    Transcript,
    release,
    send,
    tell,
)
from thermolock.errors import ConfigError, DoubleSpend, InvalidNote, MustReemit, NotOwner, UnknownRecord
from thermolock.hashing import HashSeed, seed_length, toeplitz_hash
from thermolock.rng import as_seeds
from thermolock.sampling import SampleSpec, compare_samples, draw_positions, sample


@dataclass
class Banknote:
    """A note or ticket: an id, the register, and how often it has been spent."""

    note_id: str
    register: BitRegister
    spend_count: int = 0

    @property
    def n_bits(self) -> int:
        return self.register.n_bits

    def to_json(self) -> dict:
        return {"note_id": self.note_id, "n_bits": self.n_bits, "hex": self.register.hex, "spend_count": self.spend_count}

    @classmethod
    def from_json(cls, data: dict) -> "Banknote":
        reg = BitRegister.from_json({"id": data["note_id"], "n_bits": data["n_bits"], "hex": data["hex"]})
        return cls(str(data["note_id"]), reg, int(data.get("spend_count", 0)))

    def hand_over(self, holder: Party, receiver: Party) -> None:
        send(None, holder, receiver, self.register)


@dataclass(frozen=True)
class SampleBatch:
    spec: SampleSpec
    values: np.ndarray

    def to_json(self) -> dict:
        return {"positions": list(self.spec.positions), "values": bitops.bits_str(self.values)}

    @classmethod
    def from_json(cls, n: int, data: dict) -> "SampleBatch":
        return cls(SampleSpec(n, tuple(data["positions"])), bitops.as_bits(data["values"]))


@dataclass
class BankRecord:
    note_id: str
    n_bits: int
    samples: tuple[SampleBatch, ...]
    next_index: int = 0
    invalid: bool = False
    retired: bool = False

    kind = "note"

    @property
    def k(self) -> int:
        return len(self.samples)

    @property
    def t(self) -> int:
        return self.samples[0].spec.t

    def to_json(self) -> dict:
        return {
            "kind": "note", "note_id": self.note_id, "n_bits": self.n_bits,
            "samples": [b.to_json() for b in self.samples],
            "next_index": self.next_index, "invalid": self.invalid, "retired": self.retired,
        }

    @classmethod
    def from_json(cls, data: dict) -> "BankRecord":
        n = int(data["n_bits"])
        return cls(
            str(data["note_id"]), n, tuple(SampleBatch.from_json(n, b) for b in data["samples"]),
            int(data["next_index"]), bool(data.get("invalid", False)), bool(data.get("retired", False)),
        )


@dataclass
class TicketRecord:
    ticket_id: str
    seed: HashSeed
    tag: np.ndarray

    kind = "ticket"

    def __post_init__(self):
        if self.tag.size != self.seed.t:
            raise ConfigError("tag length must equal t")

    def to_json(self) -> dict:
        return {
            "kind": "ticket", "note_id": self.ticket_id, "n_bits": self.seed.n, "t": self.seed.t,
            "seed": bitops.bits_str(self.seed.bits), "tag": bitops.bits_str(self.tag),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TicketRecord":
        seed = HashSeed(bitops.as_bits(data["seed"]), int(data["n_bits"]), int(data["t"]))
        return cls(str(data["note_id"]), seed, bitops.as_bits(data["tag"]))


class RecordStore:
    """Append-only JSON-lines file of records."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def load(self) -> dict[str, BankRecord | TicketRecord]:
        records: dict[str, BankRecord | TicketRecord] = {}
        if not self.path.exists():
            return records
        for lineno, line in enumerate(self.path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                rec = TicketRecord.from_json(data) if data.get("kind") == "ticket" else BankRecord.from_json(data)
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"{self.path}:{lineno}: bad record ({exc})") from exc
            records[rec.to_json()["note_id"]] = rec
        return records

    def append(self, record: BankRecord | TicketRecord) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as fh:
            fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")


class Bank:
    """The issuer. Access to records is serialized by one lock.

    ``tell_cap`` bounds each merchant call: positions plus values must fit.
    """

    def __init__(self, name: str = "Bank", store: str | Path | None = None,
                 tell_cap: int = DEFAULT_TELL_CAP, workspace_cap: int | None = None):
        self.party = Party(name, 0, workspace_cap=workspace_cap)
        self.tell_cap = tell_cap
        self.store = RecordStore(store) if store is not None else None
        self.records: dict[str, BankRecord | TicketRecord] = self.store.load() if self.store else {}
        self._lock = threading.Lock()

    @property
    def name(self) -> str:
        return self.party.name

    def _next_id(self, prefix: str) -> str:
        serial = sum(1 for r in self.records.values() if r.kind == prefix) + 1
        return f"{prefix}-{serial:06d}"

    def _put(self, record: BankRecord | TicketRecord) -> None:
        self.records[record.to_json()["note_id"]] = record
        if self.store is not None:
            self.store.append(record)

    def record(self, note_id: str) -> BankRecord | TicketRecord:
        try:
            return self.records[note_id]
        except KeyError:
            raise UnknownRecord(f"no record for {note_id!r}") from None

    def note_record(self, note_id: str) -> BankRecord:
        rec = self.record(note_id)
        if not isinstance(rec, BankRecord):
            raise UnknownRecord(f"{note_id!r} is not a banknote")
        return rec

    def ticket_record(self, ticket_id: str) -> TicketRecord:
        rec = self.record(ticket_id)
        if not isinstance(rec, TicketRecord):
            raise UnknownRecord(f"{ticket_id!r} is not a ticket")
        return rec


def _deliver(bank: Bank, reg: BitRegister, holder: Party | None) -> None:
    if holder is None:
        release(bank.party, reg)
    else:
        send(None, bank.party, holder, reg)


def _take(party: Party, reg: BitRegister) -> None:
    """A verifier must physically hold the register; pick it up if it lies around."""
    if reg.owner == ENVIRONMENT:
        party.claim(reg)
    elif not party.owns(reg):
        raise NotOwner(f"{party.name} does not hold {reg.id!r}; hand it over first")


def check_note_params(n: int, k: int, t: int, tell_cap: int = DEFAULT_TELL_CAP) -> None:
    if k < 2:
        raise ConfigError("k must be >= 2 so the note can be spent before re-emission")
    if t < 1:
        raise ConfigError("t must be >= 1")
    if k * t > n:
        raise ConfigError(f"k*t = {k * t} exceeds n = {n}")
    per_call = t * bitops.ceil_log2(n) + t
    if per_call > tell_cap:
        raise ConfigError(f"a spend tells {per_call} bits, over the cap {tell_cap}")


# banknotes

def emit_banknote(bank: Bank, n: int, k: int, t: int, seed, holder: Party | None = None,
                  note_id: str | None = None) -> tuple[Banknote, BankRecord]:
    """Mint a note; the bank keeps ``k`` independent batches of ``t`` samples."""
    check_note_params(n, k, t, bank.tell_cap)
    seeds = as_seeds(seed)
    with bank._lock:
        note_id = note_id or bank._next_id("note")
        if note_id in bank.records:
            raise ConfigError(f"record {note_id!r} already exists")
        reg = bank.party.new_register(n, seeds.stream(bank.name, note_id, "X"), note_id)
        batches = []
        for j in range(k):
            spec = draw_positions(n, t, seeds.stream(bank.name, note_id, "batch", j))
            batches.append(SampleBatch(spec, sample(reg, spec, bank.party)))
        record = BankRecord(note_id, n, tuple(batches))
        bank._put(record)
        _deliver(bank, reg, holder)
    return Banknote(note_id, reg), record


@dataclass(frozen=True)
class SpendResult:
    accepted: bool
    warn: bool = False
    failure_reason: str | None = None
    transcript: Transcript = field(default_factory=Transcript, repr=False, compare=False)


def spend_banknote(merchant: Party, note: Banknote, bank: Bank) -> SpendResult:
    """Merchant checks the note against the bank's next batch.

    The note's ``spend_count`` must match the record's ``next_index``; a
    stale count means another copy got there first (:class:`DoubleSpend`).
    A mismatch marks the record invalid for good.
    """
    with bank._lock:
        rec = bank.note_record(note.note_id)
        if rec.invalid or rec.retired:
            raise InvalidNote(f"{note.note_id} is no longer valid")
        if note.spend_count >= rec.k - 1 or rec.next_index >= rec.k - 1:
            raise MustReemit(f"{note.note_id} has been spent {rec.next_index} times; back to the bank")
        if note.spend_count != rec.next_index:
            raise DoubleSpend(f"{note.note_id}: note says {note.spend_count} spends, bank says {rec.next_index}")
        _take(merchant, note.register)
        batch = rec.samples[rec.next_index]
        transcript = Transcript(bank.tell_cap)
        mark = merchant.workspace_used
        try:
            spec = SampleSpec.decode(rec.n_bits, tell(transcript, bank.party, merchant, batch.spec.encode()))
            expected = tell(transcript, bank.party, merchant, batch.values)
            ok = compare_samples(expected, sample(note.register, spec, merchant))
        finally:
            merchant.release_workspace(merchant.workspace_used - mark)
        rec.next_index += 1
        if not ok:
            rec.invalid = True
            bank._put(rec)
            return SpendResult(False, False, "sample_mismatch", transcript)
        note.spend_count += 1
        bank._put(rec)
        return SpendResult(True, rec.next_index == rec.k - 1, None, transcript)


def race_spend(bank: Bank, attempts: Iterable[tuple[Party, Banknote]]) -> list[SpendResult]:
    """Settle simultaneous attempts in a fixed order: merchant name, then submission index.

    Losers get a ``double_spend`` reject rather than an exception.
    """
    attempts = list(attempts)
    order = sorted(range(len(attempts)), key=lambda i: (attempts[i][0].name, i))
    results: list[SpendResult | None] = [None] * len(attempts)
    for i in order:
        merchant, note = attempts[i]
        try:
            results[i] = spend_banknote(merchant, note, bank)
        except (DoubleSpend, MustReemit, InvalidNote) as exc:
            results[i] = SpendResult(False, False, exc.reason)
    return results


def reemit_banknote(bank: Bank, note: Banknote, seed, holder: Party | None = None) -> tuple[Banknote, BankRecord]:
    """Check the last batch and swap the note for a fresh one.

    If ``holder`` holds the old note it hands it in and receives the new one.
    """
    if holder is not None and holder.owns(note.register):
        note.hand_over(holder, bank.party)
    with bank._lock:
        rec = bank.note_record(note.note_id)
        if rec.invalid or rec.retired:
            raise InvalidNote(f"{note.note_id} is no longer valid")
        if note.spend_count != rec.k - 1 or rec.next_index != rec.k - 1:
            raise ConfigError(f"{note.note_id} still has spends left ({note.spend_count} of {rec.k - 1} used)")
        _take(bank.party, note.register)
        last = rec.samples[-1]
        mark = bank.party.workspace_used
        ok = compare_samples(last.values, sample(note.register, last.spec, bank.party))
        bank.party.release_workspace(bank.party.workspace_used - mark)
        rec.next_index = rec.k
        if not ok:
            rec.invalid = True
            bank._put(rec)
            raise InvalidNote(f"{note.note_id} does not match the bank's record")
        rec.retired = True
        bank._put(rec)
        # the old record's batches are no longer needed
        bank.party.release_workspace(rec.k * rec.t)
        release(bank.party, note.register)
    return emit_banknote(bank, rec.n_bits, rec.k, rec.t, seed, holder=holder)


def forge_note(strategy: Strategy, forger: Party, note: Banknote, budget: int, seed, id: str = "forged") -> Banknote:
    """A counterfeit of ``note`` built by ``strategy``; same id and count, new register."""
    _take(forger, note.register)
    reg = strategy.forge(forger, note.register, budget, as_seeds(seed), id)
    return Banknote(note.note_id, reg, note.spend_count)


# tickets

def emit_ticket(venue: Bank, n: int, t: int, seed, holder: Party | None = None,
                ticket_id: str | None = None) -> tuple[Banknote, TicketRecord]:
    """Mint a ticket; the venue keeps the seed and the tag."""
    if n < 1 or t < 1:
        raise ConfigError("n and t must be >= 1")
    seeds = as_seeds(seed)
    with venue._lock:
        ticket_id = ticket_id or venue._next_id("ticket")
        if ticket_id in venue.records:
            raise ConfigError(f"record {ticket_id!r} already exists")
        x = venue.party.new_register(n, seeds.stream(venue.name, ticket_id, "X"), ticket_id)
        y = venue.party.new_register(seed_length(n, t), seeds.stream(venue.name, ticket_id, "Y"), ticket_id + "/Y")
        hs = HashSeed(venue.party.read(y), n, t)
        venue.party.use_workspace(t)
        record = TicketRecord(ticket_id, hs, toeplitz_hash(venue.party.read(x), hs))
        release(venue.party, y)
        venue._put(record)
        _deliver(venue, x, holder)
    return Banknote(ticket_id, x), record


def verify_ticket(venue: Bank, ticket: Banknote) -> bool:
    """Recompute the tag on the presented register; uses ``t`` workspace bits."""
    with venue._lock:
        rec = venue.ticket_record(ticket.note_id)
        _take(venue.party, ticket.register)
        if ticket.n_bits != rec.seed.n:
            return False
        venue.party.use_workspace(rec.seed.t)
        try:
            return bool(np.array_equal(toeplitz_hash(venue.party.read(ticket.register), rec.seed), rec.tag))
        finally:
            venue.party.release_workspace(rec.seed.t)


def write_note(path: str | Path, note: Banknote) -> None:
    Path(path).write_text(json.dumps(note.to_json(), sort_keys=True) + "\n")


def read_note(path: str | Path) -> Banknote:
    try:
        return Banknote.from_json(json.loads(Path(path).read_text()))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: not a note file ({exc})") from exc

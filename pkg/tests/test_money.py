import json
import threading

import numpy as np
import pytest

from thermolock import bits as bitops
from thermolock.adversaries import fresh_register_success, strategy_fresh_register, strategy_subset_store
from thermolock.core import BitRegister, Party
from thermolock.errors import (
    ConfigError,
    DoubleSpend,
    InvalidNote,
    MustReemit,
    NotOwner,
    UnknownRecord,
)
from thermolock.money import (
    Bank,
    Banknote,
    check_note_params,
    emit_banknote,
    emit_ticket,
    forge_note,
    race_spend,
    read_note,
    reemit_banknote,
    spend_banknote,
    verify_ticket,
    write_note,
)
from thermolock.rng import ScriptedSeeds


def spend_chain(bank, note, merchants):
    """Pass the note from merchant to merchant, spending at each."""
    results = []
    prev = None
    for m in merchants:
        if prev is not None:
            note.hand_over(prev, m)
        results.append(spend_banknote(m, note, bank))
        prev = m
    return results, prev


def test_emission_record():
    bank = Bank()
    note, rec = emit_banknote(bank, 64, 2, 3, 0)
    assert rec.k * rec.t == 6 and sum(len(b.spec.positions) for b in rec.samples) == 6
    for batch in rec.samples:
        assert note.register.bits[list(batch.spec.positions)].tolist() == batch.values.tolist()
    assert note.note_id == "note-000001" and note.spend_count == 0


def test_parameter_checks():
    with pytest.raises(ConfigError):
        check_note_params(64, 1, 8)
    with pytest.raises(ConfigError):
        check_note_params(16, 4, 8)
    with pytest.raises(ConfigError):
        emit_banknote(Bank(), 64, 2, 0, 0)
    with pytest.raises(ConfigError):
        check_note_params(64, 4, 8, tell_cap=40)


def test_honest_lifecycle():
    bank = Bank()
    alice = Party("Alice")
    note, _ = emit_banknote(bank, 64, 4, 8, 1, holder=alice)
    assert alice.owns(note.register)
    merchants = [Party(f"M{i}") for i in range(3)]
    note.hand_over(alice, merchants[0])
    results, last = spend_chain(bank, note, merchants)
    assert [r.accepted for r in results] == [True, True, True]
    assert [r.warn for r in results] == [False, False, True]
    with pytest.raises(MustReemit):
        spend_banknote(last, note, bank)
    new, rec = reemit_banknote(bank, note, 2, holder=last)
    assert last.owns(new.register) and new.note_id != note.note_id
    assert bank.note_record(note.note_id).retired
    with pytest.raises(InvalidNote):
        spend_banknote(last, note, bank)
    assert spend_banknote(last, new, bank).accepted


def test_premature_reemit():
    bank = Bank()
    note, _ = emit_banknote(bank, 64, 4, 8, 1)
    with pytest.raises(ConfigError):
        reemit_banknote(bank, note, 2)


def test_tampered_register_fails_reemission():
    bank = Bank()
    note, _ = emit_banknote(bank, 32, 2, 16, 3)
    m = Party("M")
    assert spend_banknote(m, note, bank).accepted
    # replace the register by an independent one before re-emission
    fake = Banknote(note.note_id, m.new_register(32, 99, "fake"), note.spend_count)
    with pytest.raises(InvalidNote):
        reemit_banknote(bank, fake, 4, holder=m)
    assert bank.note_record(note.note_id).invalid


def test_forged_note_rejected_then_note_dead():
    bank = Bank()
    note, _ = emit_banknote(bank, 64, 4, 8, 5)
    forger = Party("Mallory", 0)
    fake = forge_note(strategy_fresh_register(), forger, note, 0, 7)
    assert fake.register is not note.register
    m = Party("M")
    fake.hand_over(forger, m)
    res = spend_banknote(m, fake, bank)
    if not res.accepted:
        assert res.failure_reason == "sample_mismatch"
        with pytest.raises(InvalidNote):
            spend_banknote(m, note, bank)


def test_fresh_forger_rate():
    trials = 4000
    t = 3
    wins = 0
    for i in range(trials):
        bank = Bank()
        note, _ = emit_banknote(bank, 64, 2, t, i)
        forger = Party("Mallory", 0)
        fake = forge_note(strategy_fresh_register(), forger, note, 0, i + 10**6)
        wins += spend_banknote(forger, fake, bank).accepted
    p = float(fresh_register_success(64, t))
    assert abs(wins / trials - p) < 4 * np.sqrt(p * (1 - p) / trials)


def test_subset_forger_rate_bounded():
    trials = 3000
    n, t = 32, 4
    wins = 0
    strat = strategy_subset_store(range(n // 2))
    for i in range(trials):
        bank = Bank()
        note, _ = emit_banknote(bank, n, 2, t, i)
        forger = Party("Mallory", n // 2)
        fake = forge_note(strat, forger, note, n // 2, i)
        wins += spend_banknote(forger, fake, bank).accepted
    p = 0.75**t
    assert wins / trials <= p + 3 * np.sqrt(p * (1 - p) / trials)


def test_double_spend_is_detected():
    bank = Bank()
    note, _ = emit_banknote(bank, 64, 4, 8, 1)
    twin = Banknote(note.note_id, BitRegister("twin", note.register.bits), 0)
    a, b = Party("A"), Party("B")
    assert spend_banknote(a, note, bank).accepted
    with pytest.raises(DoubleSpend):
        spend_banknote(b, twin, bank)


def _race(seed):
    bank = Bank()
    note, _ = emit_banknote(bank, 64, 4, 8, seed)
    twin = Banknote(note.note_id, BitRegister("twin", note.register.bits), 0)
    zed, amy = Party("Zed"), Party("Amy")
    return race_spend(bank, [(zed, note), (amy, twin)])


def test_race_spend_is_deterministic():
    for seed in range(20):
        first, second = _race(seed), _race(seed)
        assert [r.accepted for r in first] == [r.accepted for r in second] == [False, True]
        assert first[0].failure_reason == "double_spend"


def test_threaded_race_has_one_winner():
    for seed in range(10):
        bank = Bank()
        note, _ = emit_banknote(bank, 64, 4, 8, seed)
        copies = [note] + [Banknote(note.note_id, BitRegister(f"c{i}", note.register.bits), 0) for i in range(7)]
        outcomes = []
        barrier = threading.Barrier(len(copies))

        def go(i, copy):
            m = Party(f"M{i}")
            barrier.wait()
            try:
                outcomes.append(spend_banknote(m, copy, bank).accepted)
            except DoubleSpend:
                outcomes.append(False)

        threads = [threading.Thread(target=go, args=(i, c)) for i, c in enumerate(copies)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        assert sorted(outcomes) == [False] * 7 + [True]
        assert bank.note_record(note.note_id).next_index == 1


def test_store_persistence(tmp_path):
    path = tmp_path / "bank.jsonl"
    bank = Bank(store=path)
    note, _ = emit_banknote(bank, 64, 4, 8, 1)
    note_file = tmp_path / "note.json"
    write_note(note_file, note)
    restored = Bank(store=path)
    m = Party("M")
    again = read_note(note_file)
    assert again.register.bits.tolist() == note.register.bits.tolist()
    assert spend_banknote(m, again, restored).accepted
    later = Bank(store=path)
    assert later.note_record(note.note_id).next_index == 1
    with pytest.raises(UnknownRecord):
        later.note_record("note-999999")


def test_corrupt_store_reports_line(tmp_path):
    path = tmp_path / "bank.jsonl"
    bank = Bank(store=path)
    emit_banknote(bank, 64, 4, 8, 1)
    with path.open("a") as fh:
        fh.write("{not json\n")
    with pytest.raises(ConfigError, match=":2"):
        Bank(store=path)
    with pytest.raises(ConfigError):
        read_note(path)


def test_note_json_round_trip():
    note = Banknote("note-000001", BitRegister("r", "1011001"), 2)
    data = json.loads(json.dumps(note.to_json()))
    assert data["n_bits"] == 7 and data["spend_count"] == 2
    back = Banknote.from_json(data)
    assert back.register.bits.tolist() == [1, 0, 1, 1, 0, 0, 1]


def test_merchant_must_hold_note():
    bank = Bank()
    alice = Party("Alice")
    note, _ = emit_banknote(bank, 64, 4, 8, 1, holder=alice)
    with pytest.raises(NotOwner):
        spend_banknote(Party("M"), note, bank)


# tickets

def test_ticket_honest_and_repeatable():
    venue = Bank("Venue")
    ticket, rec = emit_ticket(venue, 64, 16, 3)
    assert verify_ticket(venue, ticket)
    assert verify_ticket(venue, ticket)
    assert venue.party.workspace_used == 16
    with pytest.raises(UnknownRecord):
        spend_banknote(Party("M"), ticket, venue)


def test_ticket_forgery_exhaustive():
    """A fixed independent register passes on exactly 1/8 of emission seeds at N=6, t=3."""
    n, t = 6, 3
    x = [1, 1, 0, 1, 0, 0]
    forged = [0, 1, 1, 1, 0, 1]
    wins = 0
    for y in range(1 << (n + t - 1)):
        venue = Bank("Venue")
        seeds = ScriptedSeeds({
            ("Venue", "ticket-000001", "X"): x,
            ("Venue", "ticket-000001", "Y"): bitops.from_int(y, n + t - 1).tolist(),
        })
        ticket, _ = emit_ticket(venue, n, t, seeds)
        wins += verify_ticket(venue, Banknote(ticket.note_id, BitRegister("fake", forged)))
    assert wins == (1 << (n + t - 1)) // 8


def test_ticket_wrong_length():
    venue = Bank("Venue")
    ticket, _ = emit_ticket(venue, 16, 4, 0)
    assert not verify_ticket(venue, Banknote(ticket.note_id, BitRegister("short", "1010")))

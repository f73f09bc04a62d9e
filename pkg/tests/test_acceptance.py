"""The eight acceptance criteria, at their stated sizes and tolerances.

Each test records one PASS/FAIL line, printed in the terminal summary.
"""

import itertools
import math
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from thermolock import bits as bitops
from thermolock.adversaries import (
    erasure_profile,
    fresh_register_success,
    spread_positions,
    strategy_fresh_register,
    strategy_subset_store,
)
from thermolock.core import NOT, Party, ReversiblePermutation, apply_reversible
from thermolock.errors import CombineMismatch
from thermolock.harness import hoeffding_halfwidth
from thermolock.hashing import batch_collisions, exhaustive_collision_fractions
from thermolock.money import (
    Bank,
    Banknote,
    emit_banknote,
    emit_ticket,
    forge_note,
    race_spend,
    reemit_banknote,
    spend_banknote,
    verify_ticket,
)
from thermolock.protocols import (
    CorrelatedSeedVerifier,
    HoardingVerifier,
    VerifierStrategy,
    combine_bipartite,
    correlated_pair_support,
    deal_multipartite,
    make_correlated_pair,
    multipartite_support,
    pow_direct,
    pow_hashing,
    pow_sampling,
    reconstruct_multipartite,
    share_value,
    simulate_verifier_view,
)
from thermolock.rng import ScriptedSeeds, Seeds
from thermolock.spacetime import (
    causality_check,
    colluder_agents,
    honest_agents,
    run_positioning_hashing,
    run_positioning_sampling,
)

pytestmark = pytest.mark.slow
C = Fraction(1)


def record(number, title, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


def sigma(p, n):
    return math.sqrt(p * (1 - p) / n)


def test_1_erasure_bound_exact():
    start = time.perf_counter()
    g, t = 2, 10
    root = Seeds(2024)
    perms = [ReversiblePermutation.random_table(g + t, root.stream("perm", i)) for i in range(200)]
    worst = [Fraction(0)] * (t + 1)
    all_ok = True
    for perm in perms:
        prof = erasure_profile(g, t, perm)
        worst = [max(a, b) for a, b in zip(worst, prof)]
        all_ok &= all(p <= Fraction(1, 2**s) for s, p in enumerate(prof))
    ident = erasure_profile(g, t, ReversiblePermutation.identity(g + t))
    equality = ident == [Fraction(1, 2**s) for s in range(t + 1)]
    elapsed = time.perf_counter() - start
    ok = all_ok and equality and elapsed < 60
    record(1, "erasure bound over 200 random permutations + identity", ok,
           f"max P*2^s = {max(p * 2**s for s, p in enumerate(worst))}, identity tight: {equality}, {elapsed:.2f}s")


def test_2_hash_universality():
    start = time.perf_counter()
    fractions = exhaustive_collision_fractions(6, 3)
    exact = fractions.size == math.comb(64, 2) and bool(np.all(fractions == 1 / 8))
    n, t, trials = 1024, 16, 10**6
    hits = batch_collisions(np.random.default_rng(2024), n, t, trials)
    p = 2.0**-t
    rate = hits / trials
    within = abs(rate - p) <= 3 * sigma(p, trials)
    elapsed = time.perf_counter() - start
    ok = exact and within and elapsed < 300
    record(2, "Toeplitz universality", ok,
           f"exhaustive N=6 t=3 all {fractions.size} pairs at 1/8: {exact}; "
           f"N=1024 t=16 rate {rate:.3e} vs {p:.3e} +- {3 * sigma(p, trials):.1e}; {elapsed:.1f}s")


def test_3_completeness():
    runs = 1000
    counts = Counter()
    spent_ok = True
    for i in range(runs):
        d = pow_direct(32, 32, i)
        s = pow_sampling(None, 64, 8, i)
        h = pow_hashing(None, 64, 16, i)
        spent_ok &= d.spent("Prover") == 32 and s.spent("Prover") == 64 and h.spent("Prover") == 64
        spent_ok &= h.spent("Verifier") == 0
        counts["pow_direct"] += d.accepted
        counts["pow_sampling"] += s.accepted
        counts["pow_hashing"] += h.accepted

        bank = Bank()
        holder = Party("Holder")
        note, _ = emit_banknote(bank, 64, 4, 8, i, holder=holder)
        merchant = Party("Merchant")
        note.hand_over(holder, merchant)
        counts["banknote"] += spend_banknote(merchant, note, bank).accepted

        venue = Bank("Venue")
        ticket, _ = emit_ticket(venue, 64, 16, i)
        counts["ticket"] += verify_ticket(venue, ticket)

        counts["positioning_sampling"] += run_positioning_sampling(honest_agents(), 64, 16, i).accepted
        counts["positioning_hashing"] += run_positioning_hashing(honest_agents(), 64, 16, 4, i).accepted
    ok = len(counts) == 7 and all(v == runs for v in counts.values()) and spent_ok
    record(3, "honest completeness, 1000 runs per protocol", ok,
           ", ".join(f"{k} {v}/{runs}" for k, v in sorted(counts.items())) + f"; exact spend: {spent_ok}")


def test_4_soundness_bounded():
    n, t, trials, delta = 64, 16, 10**5, 1e-6
    hw = hoeffding_halfwidth(trials, delta)
    fresh = strategy_fresh_register()
    wins_s = sum(pow_sampling(fresh, n, t, i, prover_budget=0).accepted for i in range(trials))
    wins_h = sum(pow_hashing(fresh, n, t, i + trials, prover_budget=0).accepted for i in range(trials))
    lower_s = wins_s / trials - hw
    lower_h = wins_h / trials - hw
    fresh_ok = lower_s <= 2**-t and lower_h <= 2**-t

    g, ts, sub_trials = n // 2, 8, 20_000
    subset = strategy_subset_store(spread_positions(n, g))
    wins = sum(pow_sampling(subset, n, ts, 10**7 + i, prover_budget=g).accepted for i in range(sub_trials))
    target = 0.75**ts
    rate = wins / sub_trials
    subset_ok = abs(rate - target) <= 3 * sigma(target, sub_trials) and rate < 1
    record(4, "fresh-register and subset-storage soundness", fresh_ok and subset_ok,
           f"fresh: sampling {wins_s}/{trials}, hashing {wins_h}/{trials}, Hoeffding lower bounds "
           f"{lower_s:.4f}/{lower_h:.4f} <= 2^-16; subset g=32 t=8 rate {rate:.4f} vs {target:.4f} "
           f"+- {3 * sigma(target, sub_trials):.4f}")


def _view_multisets(vstrat, budget, n=4, t=2):
    real, sim = Counter(), Counter()
    spent_equal = True
    for x in range(1 << n):
        for y in range(1 << (n + t - 1)):
            xb = bitops.from_int(x, n).tolist()
            yb = bitops.from_int(y, n + t - 1).tolist()
            r = pow_hashing(None, n, t, ScriptedSeeds({("Prover", "X_A"): xb, ("Verifier", "Y"): yb}),
                            verifier=vstrat, verifier_budget=budget)
            s = simulate_verifier_view(vstrat, n, t, ScriptedSeeds({("Verifier", "simulated_X"): xb, ("Verifier", "Y"): yb}),
                                       verifier_budget=budget)
            spent_equal &= r.spent("Verifier") == s.spent("Verifier")
            real[r.transcript.view()] += 1
            sim[s.transcript.view()] += 1
    return real == sim and spent_equal


def test_5_non_transferability():
    strategies = [(VerifierStrategy(), 0), (HoardingVerifier(), 3), (CorrelatedSeedVerifier(), 0)]
    identical = {v.name: _view_multisets(v, b) for v, b in strategies}
    runs, monotone = 10**4, 0
    for i in range(runs):
        vstrat, budget = strategies[i % 3]
        out = pow_hashing(None, 16, 8, i, verifier=vstrat, verifier_budget=budget)
        trace = out.parties["Verifier"].potential_trace
        monotone += all(b <= a for a, b in zip(trace, trace[1:]))
    ok = all(identical.values()) and monotone == runs
    record(5, "verifier view is simulable", ok,
           f"transcript multisets identical: {identical}; potential non-increasing in {monotone}/{runs} runs")


def test_6_secret_sharing():
    pair_value = share_value(correlated_pair_support(4))
    support = multipartite_support(4, 4)
    proper = [grp for size in range(1, 4) for grp in itertools.combinations(range(4), size)]
    subset_values = {grp: share_value(support, [[i] for i in grp]) for grp in proper}
    subsets_zero = all(v == 0.0 for v in subset_values.values())

    p = Party("Pair", 4)
    blank = combine_bipartite(p, make_correlated_pair(p, 4, Seeds(1)))
    holder = Party("Holder", 4, workspace_cap=None)
    rec = reconstruct_multipartite(holder, deal_multipartite(4, 4, 2, dealer=holder))
    reconstruct_ok = blank.blank_count == 4 and rec.blank_count == 4 and rec.n_bits == 4

    caught = 0
    stream = Seeds(3).stream("tamper")
    for i in range(1000):
        holder = Party("Holder", 4, workspace_cap=None)
        shares = deal_multipartite(4, 4, 10**6 + i, dealer=holder)
        part, bit = int(stream.below(4, 1)[0]), int(stream.below(4, 1)[0])
        apply_reversible(holder, ReversiblePermutation(4, gates=[NOT(bit)]), [shares.parts[part]])
        try:
            reconstruct_multipartite(holder, shares)
        except CombineMismatch:
            caught += 1
    ok = pair_value == 4.0 and subsets_zero and reconstruct_ok and caught == 1000
    record(6, "secret sharing of free energy", ok,
           f"pair value {pair_value}, {len(proper)} proper subsets all 0.0: {subsets_zero}, "
           f"reconstruct gives N blanks: {reconstruct_ok}, tamper caught {caught}/1000")


def test_7_money():
    runs, lifecycle = 1000, 0
    for i in range(runs):
        bank = Bank()
        alice = Party("Alice")
        note, _ = emit_banknote(bank, 64, 4, 8, i, holder=alice)
        prev, accepted = alice, 0
        for j in range(3):
            m = Party(f"M{j}")
            note.hand_over(prev, m)
            accepted += spend_banknote(m, note, bank).accepted
            prev = m
        new, _ = reemit_banknote(bank, note, 10**6 + i, holder=prev)
        lifecycle += accepted == 3 and prev.owns(new.register) and bank.note_record(note.note_id).retired

    # the criterion leaves N open; with repeated positions allowed the exact rate is
    # 2^-t only for large N, so the bound is checked at N=1024 and N=64 is shown against its exact value
    t, trials = 8, 10**5
    fresh = strategy_fresh_register()

    def forge_rate(n, count, offset):
        wins = 0
        for i in range(count):
            bank = Bank()
            note, _ = emit_banknote(bank, n, 4, t, offset + i)
            forger = Party("Mallory")
            wins += spend_banknote(forger, forge_note(fresh, forger, note, 0, 10**7 + offset + i), bank).accepted
        return wins / count

    rate = forge_rate(1024, trials, 0)
    p = 2.0**-t
    forge_ok = rate <= p + 3 * sigma(p, trials)
    small_trials = 20_000
    small = forge_rate(64, small_trials, 10**6)
    exact64 = float(fresh_register_success(64, t))
    small_ok = abs(small - exact64) <= 3 * sigma(exact64, small_trials)

    def race(seed):
        bank = Bank()
        note, _ = emit_banknote(bank, 64, 4, 8, seed)
        twin = Banknote(note.note_id, note.register.__class__("twin", note.register.bits), 0)
        return [r.accepted for r in race_spend(bank, [(Party("Zed"), note), (Party("Amy"), twin)])]

    outcomes = [race(s) for s in range(50)] + [race(s) for s in range(50)]
    race_ok = all(sum(o) == 1 for o in outcomes) and outcomes[:50] == outcomes[50:]
    ok = lifecycle == runs and forge_ok and small_ok and race_ok
    record(7, "banknotes", ok,
           f"lifecycle {lifecycle}/{runs}; forger at N=1024 {rate:.5f} <= {p:.5f} + {3 * sigma(p, trials):.5f}; "
           f"at N=64 {small:.5f} vs exact {exact64:.5f}; race deterministic with one winner: {race_ok}")


def test_8_positioning():
    honest = [run_positioning_sampling(honest_agents(), 64, 16, i) for i in range(100)]
    arrivals_ok = all(o.accepted and set(o.details["arrivals"].values()) == {Fraction(2)} for o in honest)
    honest_hash = run_positioning_hashing(honest_agents(), 64, 16, 100, 1)
    arrivals_ok &= honest_hash.accepted and all(r.arrival == 2 for r in honest_hash.details["rounds"])

    rounds = 10**4
    by_hash = run_positioning_hashing(colluder_agents(), 64, 16, rounds, 2, adversary="fresh_register")
    caught = sum(not r.accepted for r in by_hash.details["rounds"]) / rounds

    t, trials = 16, 10**4
    by_sample = [run_positioning_sampling(colluder_agents(), 1024, t, 10**6 + i, adversary="fresh_register")
          for i in range(trials)]
    forge_rate = sum(o.accepted for o in by_sample) / trials
    p = 2.0**-t
    forge_ok = forge_rate <= p + 3 * sigma(p, trials)

    logs = [o.details["events"] for o in honest + [honest_hash, by_hash] + by_sample]
    cone_ok = all(causality_check(events, C) for events in logs)
    ok = arrivals_ok and cone_ok and caught >= 0.45 and forge_ok
    record(8, "positioning", ok,
           f"honest arrivals exactly 2: {arrivals_ok}; light cone respected in {len(logs)} logs: {cone_ok}; "
           f"hashing catch rate {caught:.4f} over {rounds} rounds; sampling forge rate {forge_rate:.5f} "
           f"<= {p:.2e} + {3 * sigma(p, trials):.1e}")

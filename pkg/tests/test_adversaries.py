from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermolock.adversaries import (
    PermutationForger,
    SubsetStore,
    brute_force_erasure_oracle,
    brute_force_memory_oracle,
    erasure_profile,
    fresh_register_success,
    make_strategy,
    spread_positions,
    strategy_fresh_register,
    strategy_prefix_erase_copy,
    strategy_random_guess,
    strategy_subset_store,
    subset_store_success,
)
from thermolock.core import Party, ReversiblePermutation
from thermolock.errors import ConfigError
from thermolock.protocols import pow_direct, pow_hashing, pow_sampling
from thermolock.rng import Seeds


def identity(width):
    return ReversiblePermutation.identity(width)


def test_identity_erasure_example():
    assert brute_force_erasure_oracle(0, 3, 2, identity(3)) == Fraction(1, 4)
    assert erasure_profile(2, 4, identity(6)) == [Fraction(1, 2**s) for s in range(5)]


@given(st.integers(0, 3), st.integers(1, 8), st.integers(0, 2**32 - 1))
@settings(max_examples=80, deadline=None)
def test_erasure_bound_random_tables(g, t, seed):
    perm = ReversiblePermutation.random_table(g + t, Seeds(seed).stream("perm"))
    profile = erasure_profile(g, t, perm)
    assert profile[0] <= 1
    for s, p in enumerate(profile):
        assert p <= Fraction(1, 2**s)


def test_erasure_oracle_caps():
    with pytest.raises(ConfigError):
        erasure_profile(5, 16, identity(21))
    with pytest.raises(ConfigError):
        brute_force_erasure_oracle(0, 3, 4, identity(3))


def test_memory_oracle():
    assert brute_force_memory_oracle(2, 2, 3) == 1
    g0 = brute_force_memory_oracle(3, 0, 1)
    assert g0 >= Fraction(1, 2)
    best = brute_force_memory_oracle(2, 1, 1)
    assert subset_store_success(2, 1, 1) <= best <= 1
    assert brute_force_memory_oracle(3, 1, 2) >= subset_store_success(3, 1, 2)
    with pytest.raises(ConfigError):
        brute_force_memory_oracle(5, 1, 1)


def test_subset_store_closed_form():
    assert subset_store_success(16, 8, 4) == Fraction(3, 4) ** 4
    assert subset_store_success(8, 8, 5) == 1
    assert subset_store_success(8, 0, 3) == Fraction(1, 8)


def test_full_subset_store_forges_perfectly():
    strat = strategy_subset_store(range(16))
    assert all(pow_sampling(strat, 16, 8, s, prover_budget=16).accepted for s in range(50))
    assert all(pow_hashing(strat, 16, 8, s, prover_budget=16).accepted for s in range(50))


def test_subset_store_rate_matches_closed_form():
    strat = strategy_subset_store(spread_positions(16, 8))
    trials = 4000
    hits = sum(pow_sampling(strat, 16, 4, s, prover_budget=8).accepted for s in range(trials))
    assert abs(hits / trials - 0.75**4) < 0.025


def test_random_guess_rate():
    trials = 8000
    hits = sum(pow_sampling(strategy_random_guess(), 32, 3, s, prover_budget=0).accepted for s in range(trials))
    assert abs(hits / trials - 1 / 8) < 4 * np.sqrt((1 / 8) * (7 / 8) / trials)


def test_cap_exceeded():
    strat = strategy_subset_store(range(5))
    out = pow_sampling(strat, 16, 4, 0, prover_budget=4)
    assert not out.accepted and out.failure_reason == "cap_exceeded"
    with pytest.raises(ConfigError):
        SubsetStore([1, 1])


def test_prefix_erase_copy_pays_its_budget():
    out = pow_sampling(strategy_prefix_erase_copy(6), 16, 4, 3, prover_budget=6)
    assert out.spent("Prover") == 6


def test_permutation_forger_within_bound():
    g, t, n = 6, 4, 8
    perm = ReversiblePermutation.random_table(g + t, Seeds(2).stream("perm"))
    exact = brute_force_erasure_oracle(g, t, n - g, perm)
    assert exact <= Fraction(1, 4)
    forger = PermutationForger(perm, g, t)
    trials = 2000
    hits = sum(pow_direct(g, n, s, adversary=forger).accepted for s in range(trials))
    assert abs(hits / trials - float(exact)) < 0.04


def test_adversary_cannot_touch_sent_register():
    p, q = Party("P", 4), Party("Q")
    reg = p.new_register(4, 0, "X_B")
    from thermolock.core import send, Transcript
    from thermolock.errors import NotOwner
    send(Transcript(), p, q, reg)
    with pytest.raises(NotOwner):
        strategy_subset_store([0]).memorize(p, reg, 4, Seeds(0))


def test_make_strategy():
    assert make_strategy("fresh_register").name == "fresh_register"
    assert make_strategy("subset_store", {"g": 4}, n=16).positions == (0, 4, 8, 12)
    assert make_strategy("permutation", {"g": 2, "t": 3}).perm.width == 5
    assert make_strategy("prefix_erase_copy", {"g": 2}).positions == (0, 1)
    with pytest.raises(ConfigError):
        make_strategy("teleport")
    with pytest.raises(ConfigError):
        make_strategy("subset_store", {"g": 4})
    assert spread_positions(10, 0) == []
    assert strategy_fresh_register().bounded


def test_fresh_register_success_exact():
    assert fresh_register_success(1, 5) == Fraction(1, 2)
    assert fresh_register_success(8, 0) == 1
    # two draws from two positions: distinct w.p. 1/2
    assert fresh_register_success(2, 2) == Fraction(1, 2) * Fraction(1, 2) + Fraction(1, 2) * Fraction(1, 4)
    assert fresh_register_success(64, 8) > Fraction(1, 2**8)
    assert abs(float(fresh_register_success(10**6, 8)) - 2**-8) < 1e-6


def test_fresh_register_rate_small_n():
    n, t, trials = 4, 3, 6000
    hits = sum(pow_sampling(strategy_fresh_register(), n, t, s, prover_budget=0).accepted for s in range(trials))
    p = float(fresh_register_success(n, t))
    assert abs(hits / trials - p) < 4 * np.sqrt(p * (1 - p) / trials)

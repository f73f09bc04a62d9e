"""Bounded cheating strategies and exact brute-force oracles.

An adversary with free energy ``g`` starts with a ledger of ``g`` units,
may draw any number of mixed ancillas, and applies reversible gates for
free. Strategies touch registers only through :mod:`thermolock.core`, so a
register that has been sent away is out of reach.

Protocol runners drive a strategy through three hooks:

``prepare``  produce the register the prover hands over;
``memorize`` keep at most ``g`` correlated bits before handing it over;
``respond``  answer a position or seed challenge afterwards.

Money and positioning attacks use ``forge`` instead, which turns a genuine
register into a second, hopefully passing, one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from thermolock import kernels
from thermolock.core import (
    CNOT,
    SWAP,
    BitRegister,
    Party,
    ReversiblePermutation,
    apply_reversible,
    copy_into_blank,
    erase,
    new_mixed_register,
)
from thermolock.errors import CapExceeded, ConfigError
from thermolock.hashing import toeplitz_hash
from thermolock.sampling import SampleSpec, sample

ERASURE_WIDTH_CAP = 20


@dataclass(frozen=True)
class PositionChallenge:
    spec: SampleSpec


@dataclass(frozen=True)
class SeedChallenge:
    seed: BitRegister
    t: int


@dataclass
class Memory:
    """What a prover keeps after handing its register over."""

    registers: list[BitRegister] = field(default_factory=list)
    positions: tuple[int, ...] = ()

    @property
    def stored_bits(self) -> int:
        return sum(r.n_bits for r in self.registers)


class Strategy:
    """Base class; the default hooks describe a prover that does nothing clever."""

    name = "strategy"
    bounded = True

    def __init__(self, **params):
        self.params = params

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.params})"

    def prepare(self, party: Party, n: int, seeds) -> BitRegister:
        return party.new_register(n, seeds.stream(party.name, "X_B"), "X_B")

    def memorize(self, party: Party, register: BitRegister, budget: int, seeds) -> Memory:
        return Memory()

    def respond(self, party: Party, memory: Memory, challenge, seeds) -> np.ndarray:
        stream = seeds.stream(party.name, "guess")
        if isinstance(challenge, PositionChallenge):
            return stream.bits(challenge.spec.t)
        return stream.bits(challenge.t)

    def forge(self, party: Party, genuine: BitRegister, budget: int, seeds, id: str = "forged") -> BitRegister:
        return party.new_register(genuine.n_bits, seeds.stream(party.name, id), id)

    def forge_blank(self, party: Party, n: int, budget: int, seeds) -> BitRegister:
        """Best-effort all-zero register of length ``n``: erase what the budget allows."""
        reg = party.new_register(n, seeds.stream(party.name, "pi_N"), "proof")
        erase(party, reg, min(budget, n, party.ledger.balance))
        return reg


class HonestProver(Strategy):
    """Builds two perfectly correlated copies (cost ``n``) and answers from its own copy."""

    name = "honest"
    bounded = False

    def prepare(self, party: Party, n: int, seeds) -> BitRegister:
        x_a = party.new_register(n, seeds.stream(party.name, "X_A"), "X_A")
        z_b = party.new_register(n, seeds.stream(party.name, "Z_B"), "X_B")
        erase(party, z_b)
        copy_into_blank(party, x_a, z_b)
        return z_b

    def memorize(self, party, register, budget, seeds) -> Memory:
        return Memory([party.registers["X_A"]])

    def respond(self, party, memory, challenge, seeds) -> np.ndarray:
        x_a = memory.registers[0]
        if isinstance(challenge, PositionChallenge):
            return sample(x_a, challenge.spec, party)
        party.use_workspace(challenge.t)
        return toeplitz_hash(party.read(x_a), party.read(challenge.seed)[: x_a.n_bits + challenge.t - 1], challenge.t)


class RandomGuess(Strategy):
    """Hands over a fresh register and answers with uniform bits."""

    name = "random_guess"


class FreshRegister(Strategy):
    """Hands over one fresh register and answers from a second, independent one."""

    name = "fresh_register"

    def memorize(self, party, register, budget, seeds) -> Memory:
        party.new_register(register.n_bits, seeds.stream(party.name, "X_A"), "X_A")
        return Memory()

    def respond(self, party, memory, challenge, seeds) -> np.ndarray:
        own = party.registers["X_A"]
        if isinstance(challenge, PositionChallenge):
            return sample(own, challenge.spec, party)
        party.use_workspace(challenge.t)
        return toeplitz_hash(party.read(own), party.read(challenge.seed)[: own.n_bits + challenge.t - 1], challenge.t)


class SubsetStore(Strategy):
    """Pays for ``len(positions)`` blanks and copies the true bits at those positions.

    Position challenges are answered from memory where possible and by an
    independent fair coin per query elsewhere, so each sample matches with
    probability ``g/n + (1 - g/n)/2``. Seed challenges are answered by hashing
    a guess register that carries the stored bits at their positions.
    """

    name = "subset_store"

    def __init__(self, positions: Sequence[int]):
        positions = tuple(int(p) for p in positions)
        if len(set(positions)) != len(positions):
            raise ConfigError("stored positions must be distinct")
        super().__init__(positions=list(positions))
        self.positions = positions
        self._perms: dict[tuple[str, int], ReversiblePermutation] = {}

    def _perm(self, kind: str, n: int) -> ReversiblePermutation:
        key = (kind, n)
        if key not in self._perms:
            g = len(self.positions)
            if kind == "copy":
                gates = [CNOT(p, n + k) for k, p in enumerate(self.positions)]
            else:
                gates = [SWAP(k, g + p) for k, p in enumerate(self.positions)]
            self._perms[key] = ReversiblePermutation(n + g, gates=gates)
        return self._perms[key]

    def _store(self, party: Party, register: BitRegister, budget: int) -> BitRegister | None:
        g = len(self.positions)
        if g > budget:
            raise CapExceeded(f"asked to store {g} bits with budget {budget}")
        if any(p >= register.n_bits for p in self.positions):
            raise ConfigError("stored position outside register")
        if g == 0:
            return None
        mem = party.claim(new_mixed_register(g, 0, id="memory"))
        erase(party, mem)
        apply_reversible(party, self._perm("copy", register.n_bits), [register, mem])
        return mem

    def memorize(self, party, register, budget, seeds) -> Memory:
        mem = self._store(party, register, budget)
        return Memory([mem] if mem is not None else [], self.positions)

    def respond(self, party, memory, challenge, seeds) -> np.ndarray:
        stream = seeds.stream(party.name, "guess")
        stored = party.read(memory.registers[0]) if memory.registers else np.zeros(0, np.uint8)
        where = {p: k for k, p in enumerate(memory.positions)}
        if isinstance(challenge, PositionChallenge):
            party.use_workspace(challenge.spec.t)
            coins = stream.bits(challenge.spec.t)
            return np.array(
                [stored[where[p]] if p in where else coins[i] for i, p in enumerate(challenge.spec.positions)],
                dtype=np.uint8,
            )
        n = challenge.seed.n_bits - challenge.t + 1
        guess = self._guess_register(party, memory, n, seeds)
        party.use_workspace(challenge.t)
        return toeplitz_hash(party.read(guess), party.read(challenge.seed)[: n + challenge.t - 1], challenge.t)

    def _guess_register(self, party: Party, memory: Memory, n: int, seeds) -> BitRegister:
        guess = party.new_register(n, seeds.stream(party.name, "guess_register"), "guess")
        if memory.registers:
            apply_reversible(party, self._perm("place", n), [memory.registers[0], guess])
        return guess

    def forge(self, party, genuine, budget, seeds, id: str = "forged") -> BitRegister:
        forged = party.new_register(genuine.n_bits, seeds.stream(party.name, id), id)
        mem = self._store(party, genuine, budget)
        if mem is not None:
            apply_reversible(party, self._perm("place", genuine.n_bits), [mem, forged])
        return forged


class PermutationForger(Strategy):
    """Direct proof-of-work cheat: ``g`` blanks plus ``t`` mixed bits through a permutation.

    The register sent is the first ``n`` output bits; it succeeds exactly when
    they are all zero.
    """

    name = "permutation"

    def __init__(self, perm: ReversiblePermutation, g: int, t: int):
        if perm.width != g + t:
            raise ConfigError("permutation width must be g + t")
        super().__init__(g=g, t=t)
        self.perm, self.g, self.t = perm, g, t

    def forge_blank(self, party, n, budget, seeds) -> BitRegister:
        g, t = self.g, self.t
        if g > budget:
            raise CapExceeded(f"permutation strategy needs {g} blanks, budget {budget}")
        if not g <= n <= g + t:
            raise ConfigError("need g <= n <= g + t")
        head = party.new_register(n, seeds.stream(party.name, "pi_N"), "proof")
        regs = [head]
        if g + t > n:
            regs.append(party.new_register(g + t - n, seeds.stream(party.name, "ancilla"), "ancilla"))
        erase(party, head, g)
        apply_reversible(party, self.perm, regs)
        return head


def strategy_random_guess() -> Strategy:
    return RandomGuess()


def strategy_fresh_register() -> Strategy:
    return FreshRegister()


def strategy_subset_store(positions: Sequence[int]) -> Strategy:
    return SubsetStore(positions)


def strategy_prefix_erase_copy(g: int) -> Strategy:
    strat = SubsetStore(range(g))
    strat.name = "prefix_erase_copy"
    strat.params = {"g": g}
    return strat


def spread_positions(n: int, g: int) -> list[int]:
    """``g`` distinct positions spread evenly over ``[0, n)``."""
    if not 0 <= g <= n:
        raise ConfigError("need 0 <= g <= n")
    return sorted({(k * n) // g for k in range(g)}) if g else []


def make_strategy(name: str, params: dict | None = None, n: int | None = None) -> Strategy:
    """Build a strategy from a run descriptor's ``adversary`` entry."""
    params = dict(params or {})
    if name in ("honest", "none", None):
        return HonestProver()
    if name == "random_guess":
        return strategy_random_guess()
    if name == "fresh_register":
        return strategy_fresh_register()
    if name == "subset_store":
        if "positions" in params:
            return strategy_subset_store(params["positions"])
        if n is None:
            raise ConfigError("subset_store needs positions or n")
        return strategy_subset_store(spread_positions(n, int(params["g"])))
    if name == "prefix_erase_copy":
        return strategy_prefix_erase_copy(int(params["g"]))
    if name == "permutation":
        g, t = int(params["g"]), int(params["t"])
        from thermolock.rng import Seeds

        perm = ReversiblePermutation.random_table(g + t, Seeds(int(params.get("table_seed", 0))).stream("table"))
        return PermutationForger(perm, g, t)
    raise ConfigError(f"unknown adversary {name!r}")


def subset_store_success(n: int, g: int, t: int) -> Fraction:
    """Exact acceptance probability of :class:`SubsetStore` against ``t`` position samples."""
    return (Fraction(g, n) + Fraction(n - g, 2 * n)) ** t


def fresh_register_success(n: int, t: int) -> Fraction:
    """Exact acceptance of an independent register against ``t`` samples drawn with replacement.

    A repeated position asks the same bit again, so the forger is right with
    probability ``2**-D`` where ``D`` is the number of distinct positions.
    Slightly above ``2**-t`` for small ``n``.
    """
    if n < 1 or t < 0:
        raise ConfigError("need n >= 1 and t >= 0")
    dist = {0: Fraction(1)}
    for _ in range(t):
        nxt: dict[int, Fraction] = {}
        for d, p in dist.items():
            nxt[d] = nxt.get(d, 0) + p * Fraction(d, n)
            if d < n:
                nxt[d + 1] = nxt.get(d + 1, 0) + p * Fraction(n - d, n)
        dist = nxt
    return sum((p / (1 << d) for d, p in dist.items()), Fraction(0))


# exact oracles

def erasure_profile(g: int, t: int, perm: ReversiblePermutation) -> list[Fraction]:
    """For every ``s`` in ``0..t``: the exact probability that ``g + s`` leading outputs are zero.

    Inputs are ``g`` zeros followed by every one of the ``2**t`` equally likely
    mixed strings.
    """
    if g < 0 or t < 0 or g + t > ERASURE_WIDTH_CAP:
        raise ConfigError(f"need g + t <= {ERASURE_WIDTH_CAP}")
    if perm.width != g + t:
        raise ConfigError("permutation width must be g + t")
    outputs = np.ascontiguousarray(perm.apply_ints(np.arange(1 << t, dtype=np.int64)), dtype=np.int64)
    counts = kernels.erasure_counts(outputs, g + t, g, t)
    return [Fraction(int(c), 1 << t) for c in counts]


def brute_force_erasure_oracle(g: int, t: int, s: int, perm: ReversiblePermutation) -> Fraction:
    if not 0 <= s <= t:
        raise ConfigError("need 0 <= s <= t")
    return erasure_profile(g, t, perm)[s]


def _surjections(t: int, j: int) -> int:
    return sum((-1) ** i * math.comb(j, i) * (j - i) ** t for i in range(j + 1))


def memory_oracle_weights(n: int, t: int) -> np.ndarray:
    """``weights[mask]``: number of ``t``-tuples of positions whose set is exactly ``mask``."""
    return np.array([_surjections(t, bin(mask).count("1")) for mask in range(1 << n)], dtype=np.int64)


def brute_force_memory_oracle(n: int, g: int, t: int) -> Fraction:
    """Optimal probability of answering ``t`` uniform position queries with ``g`` stored bits.

    Maximises over every memory map ``{0,1}^n -> {0,1}^g`` and, for each stored
    value and query tuple, the best answer (the most common pattern among the
    compatible strings).
    """
    return memory_oracle_detail(n, g, t)[0]


def memory_oracle_detail(n: int, g: int, t: int) -> tuple[Fraction, np.ndarray]:
    if 1 <= n <= 4 and g >= n and t >= 1:
        return Fraction(1), np.arange(1 << n)
    if not (1 <= n <= 4 and 0 <= g <= 1 and t >= 1):
        raise ConfigError("memory oracle supports n <= 4, g <= 1, t >= 1")
    score, best_map = kernels.memory_oracle(n, g, memory_oracle_weights(n, t))
    return Fraction(score, (1 << n) * n ** t), best_map

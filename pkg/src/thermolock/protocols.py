"""Proofs of thermodynamic work, the verifier simulator, and secret sharing of free energy.

All runners return a :class:`ProtocolOutcome`; any resource violation along
the way becomes a reject with ``failure_reason`` set, never a partial accept.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from thermolock import bits as bitops
from thermolock.adversaries import (
    HonestProver,
    Memory,
    PositionChallenge,
    SeedChallenge,
    Strategy,
)
from thermolock.core import (
    CNOT,
    DEFAULT_TELL_CAP,
    DEFAULT_WORKSPACE_CAP,
    BitRegister,
    JointSupport,
    Party,
    ReversiblePermutation,
    Send,
    Transcript,
    _certify_blank,
    apply_reversible,
    copy_into_blank,
    erase,
    fold,
    max_entropy,
    send,
    tell,
)
from thermolock.errors import CapExceeded, CombineMismatch, ConfigError, ProtocolAbort, SimulationError
from thermolock.hashing import seed_length, toeplitz_hash
from thermolock.rng import as_seeds
from thermolock.sampling import SampleSpec, compare_samples, draw_positions, sample

PROVER = "Prover"
VERIFIER = "Verifier"


@dataclass
class ProtocolOutcome:
    accepted: bool
    transcript: Transcript
    ledgers: dict[str, dict]
    failure_reason: str | None = None
    parties: dict[str, Party] = field(default_factory=dict, repr=False)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.accepted and self.failure_reason is None:
            raise ValueError("a rejected outcome needs a failure reason")

    def spent(self, party: str) -> int:
        return self.ledgers[party]["spent"]

    def record(self) -> dict:
        return {
            "accepted": self.accepted,
            "failure_reason": self.failure_reason,
            "spent": {name: led["spent"] for name, led in sorted(self.ledgers.items())},
            "tell_bits": self.transcript.tell_bits_total,
        }


def _finish(accepted: bool, reason: str | None, transcript: Transcript, parties: Sequence[Party], **details) -> ProtocolOutcome:
    for p in parties:
        p.audit()
    return ProtocolOutcome(
        accepted=accepted,
        transcript=transcript,
        ledgers={p.name: p.ledger.to_json() for p in parties},
        failure_reason=None if accepted else reason,
        parties={p.name: p for p in parties},
        details=details,
    )


def _guarded(body: Callable[[], tuple[bool, str | None]], transcript: Transcript, parties,
             details: dict | None = None) -> ProtocolOutcome:
    details = {} if details is None else details  # the body may fill it in as it runs
    try:
        accepted, reason = body()
    except ProtocolAbort as exc:
        accepted, reason = False, exc.reason
        details["error"] = str(exc)
    return _finish(accepted, reason, transcript, parties, **details)


def _check_memory(strategy: Strategy, memory: Memory, budget: int) -> None:
    if strategy.bounded and memory.stored_bits > budget:
        raise CapExceeded(f"{strategy.name} stored {memory.stored_bits} bits with budget {budget}")


# direct proof of work

def pow_direct(prover_budget: int, n: int, seed, adversary: Strategy | None = None,
               tell_cap: int = DEFAULT_TELL_CAP) -> ProtocolOutcome:
    """The prover erases a fresh ``n``-bit register and hands it over.

    Without an adversary the prover is honest and needs ``n`` units. With one,
    the strategy's :meth:`~Strategy.forge_blank` produces the register.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    seeds = as_seeds(seed)
    prover = Party(PROVER, prover_budget)
    verifier = Party(VERIFIER, 0)
    transcript = Transcript(tell_cap)

    def body():
        if adversary is None:
            reg = prover.new_register(n, seeds.stream(PROVER, "pi_N"), "proof")
            erase(prover, reg)
        else:
            reg = adversary.forge_blank(prover, n, prover_budget, seeds)
        send(transcript, prover, verifier, reg)
        ok = reg.n_bits == n and not verifier.read(reg).any()
        return ok, None if ok else "not_blank"

    return _guarded(body, transcript, [prover, verifier])


# interactive proof by sampling

def pow_sampling(prover: Strategy | None, n: int, t: int, seed, prover_budget: int | None = None,
                 tell_cap: int = DEFAULT_TELL_CAP, verifier_workspace: int | None = DEFAULT_WORKSPACE_CAP) -> ProtocolOutcome:
    """Verifier samples the handed-over register at ``t`` positions and checks the prover's values."""
    strategy = prover or HonestProver()
    if n < 1 or t < 1:
        raise ConfigError("n and t must be >= 1")
    if t * bitops.ceil_log2(n) + t > tell_cap:
        raise ConfigError(f"t={t} samples of n={n} do not fit the tell cap {tell_cap}")
    seeds = as_seeds(seed)
    budget = n if prover_budget is None else prover_budget
    p = Party(PROVER, budget, workspace_cap=None)
    v = Party(VERIFIER, 0, workspace_cap=verifier_workspace)
    transcript = Transcript(tell_cap)

    def body():
        x_b = strategy.prepare(p, n, seeds)
        memory = strategy.memorize(p, x_b, budget, seeds)
        _check_memory(strategy, memory, budget)
        send(transcript, p, v, x_b)
        spec = draw_positions(n, t, seeds.stream(VERIFIER, "positions"))
        v.use_workspace(spec.encoded_bits)
        expected = sample(x_b, spec, v)
        told = tell(transcript, v, p, spec.encode())
        challenge = PositionChallenge(SampleSpec.decode(n, told))
        answer = strategy.respond(p, memory, challenge, seeds)
        got = tell(transcript, p, v, answer)
        ok = compare_samples(expected, got)
        return ok, None if ok else "sample_mismatch"

    return _guarded(body, transcript, [p, v])


# interactive proof by hashing, with pluggable verifiers

class VerifierStrategy:
    """Verifier side of the hashing proof.

    ``receive`` gets the proof register and returns the seed register to send
    (or ``None`` to abort) plus private state; ``decide`` sees the told tag.
    """

    name = "honest"

    def receive(self, party: Party, x_b: BitRegister, t: int, seeds) -> tuple[BitRegister | None, dict]:
        n = x_b.n_bits
        y = party.new_register(seed_length(n, t), seeds.stream(party.name, "Y"), "Y")
        party.use_workspace(t)
        tag = toeplitz_hash(party.read(x_b), party.read(y), t)
        return y, {"tag": tag}

    def decide(self, party: Party, state: dict, told) -> bool:
        return compare_samples(state["tag"], told)


class AbortingVerifier(VerifierStrategy):
    name = "abort"

    def receive(self, party, x_b, t, seeds):
        return None, {}


class HoardingVerifier(VerifierStrategy):
    """Spends its whole budget copying a prefix of the proof before playing honestly."""

    name = "hoarder"

    def receive(self, party, x_b, t, seeds):
        keep = min(party.ledger.balance, x_b.n_bits)
        if keep:
            hoard = party.new_register(keep, seeds.stream(party.name, "hoard"), "hoard")
            erase(party, hoard)
            gates = [CNOT(i, x_b.n_bits + i) for i in range(keep)]
            apply_reversible(party, ReversiblePermutation(x_b.n_bits + keep, gates=gates), [x_b, hoard])
        return super().receive(party, x_b, t, seeds)


class CorrelatedSeedVerifier(VerifierStrategy):
    """XORs the proof into its seed before sending it, so the tag depends on the proof twice."""

    name = "correlated_seed"

    def receive(self, party, x_b, t, seeds):
        n = x_b.n_bits
        y = party.new_register(seed_length(n, t), seeds.stream(party.name, "Y"), "Y")
        gates = [CNOT(i, n + i) for i in range(n)]
        apply_reversible(party, ReversiblePermutation(n + y.n_bits, gates=gates), [x_b, y])
        party.use_workspace(t)
        tag = toeplitz_hash(party.read(x_b), party.read(y), t)
        return y, {"tag": tag}


VERIFIER_STRATEGIES = {
    cls.name: cls for cls in (VerifierStrategy, AbortingVerifier, HoardingVerifier, CorrelatedSeedVerifier)
}


def pow_hashing(prover: Strategy | None, n: int, t: int, seed, prover_budget: int | None = None,
                verifier: VerifierStrategy | None = None, verifier_budget: int = 0,
                tell_cap: int = DEFAULT_TELL_CAP, verifier_workspace: int | None = DEFAULT_WORKSPACE_CAP) -> ProtocolOutcome:
    """Verifier hashes the handed-over register with a fresh seed, sends the seed, compares tags."""
    strategy = prover or HonestProver()
    vstrat = verifier or VerifierStrategy()
    if n < 1 or t < 1:
        raise ConfigError("n and t must be >= 1")
    if t > tell_cap:
        raise ConfigError(f"tag of {t} bits exceeds the tell cap {tell_cap}")
    seeds = as_seeds(seed)
    budget = n if prover_budget is None else prover_budget
    p = Party(PROVER, budget, workspace_cap=None)
    v = Party(VERIFIER, verifier_budget, workspace_cap=verifier_workspace)
    transcript = Transcript(tell_cap)
    details: dict = {"aborted_by_verifier": False}

    def body():
        x_b = strategy.prepare(p, n, seeds)
        memory = strategy.memorize(p, x_b, budget, seeds)
        _check_memory(strategy, memory, budget)
        send(transcript, p, v, x_b)
        y, state = vstrat.receive(v, x_b, t, seeds)
        if y is None:
            details["aborted_by_verifier"] = True
            return False, "verifier_abort"
        send(transcript, v, p, y)
        answer = strategy.respond(p, memory, SeedChallenge(y, t), seeds)
        got = tell(transcript, p, v, answer)
        ok = vstrat.decide(v, state, got)
        return ok, None if ok else "tag_mismatch"

    return _guarded(body, transcript, [p, v], details)


def simulate_verifier_view(verifier_strategy: VerifierStrategy | None, n: int, t: int, seed,
                           verifier_budget: int = 0, tell_cap: int = DEFAULT_TELL_CAP,
                           verifier_workspace: int | None = DEFAULT_WORKSPACE_CAP) -> ProtocolOutcome:
    """Reproduce the verifier's side of :func:`pow_hashing` without any prover.

    One party with the verifier's budget draws the proof register itself and
    plays both roles on that single register: the prover's tag is computed
    from the very register the verifier holds, so nothing is ever copied. This
    works for any strategy that reads the proof (as a control) but does not
    rewrite it; a strategy that rewrites it raises :class:`SimulationError`.
    """
    vstrat = verifier_strategy or VerifierStrategy()
    seeds = as_seeds(seed)
    sim = Party(VERIFIER, verifier_budget, workspace_cap=verifier_workspace)
    prover_label = Party(PROVER, 0, workspace_cap=None)
    transcript = Transcript(tell_cap)
    details: dict = {"aborted_by_verifier": False}

    def body():
        x = sim.new_register(n, seeds.stream(VERIFIER, "simulated_X"), "X_B")
        transcript.events.append(_send_event(PROVER, VERIFIER, x))
        mark = len(sim.target_log)
        y, state = vstrat.receive(sim, x, t, seeds)
        if y is None:
            details["aborted_by_verifier"] = True
            return False, "verifier_abort"
        transcript.events.append(_send_event(VERIFIER, PROVER, y))
        if any(x.id in regs for _, regs in sim.target_log[mark:]):
            raise SimulationError(f"strategy {vstrat.name!r} rewrote the proof register")
        answer = toeplitz_hash(x.bits, y.bits[: n + t - 1], t)
        got = tell(transcript, prover_label, sim, answer)
        ok = vstrat.decide(sim, state, got)
        return ok, None if ok else "tag_mismatch"

    return _guarded(body, transcript, [sim], details)


def _send_event(sender: str, receiver: str, reg: BitRegister) -> Send:
    return Send(sender, receiver, reg.id, reg.n_bits, reg.hex)


# secret sharing of free energy

class ShareKind(str, Enum):
    CORRELATED_PAIR = "CorrelatedPair"
    XOR_ZERO = "XorZero"


@dataclass
class ShareSet:
    parts: list[BitRegister]
    kind: ShareKind

    def __post_init__(self):
        if len({id(p) for p in self.parts}) != len(self.parts):
            raise ConfigError("shares must be distinct registers")
        if len({p.n_bits for p in self.parts}) != 1:
            raise ConfigError("shares must have equal lengths")
        if self.kind is ShareKind.CORRELATED_PAIR and len(self.parts) != 2:
            raise ConfigError("a correlated pair has exactly two parts")
        if self.kind is ShareKind.XOR_ZERO and len(self.parts) < 2:
            raise ConfigError("need at least two shares")

    @property
    def n_bits(self) -> int:
        return self.parts[0].n_bits


def share_value(support: JointSupport, groups: Sequence[Sequence[int]] | None = None) -> float:
    """Free energy released by reuniting the groups: ``sum H0(group) - H0(all)``.

    With two components and no ``groups`` this is ``H0(A) + H0(B) - H0(AB)``.
    """
    if groups is None:
        groups = [[i] for i in range(len(support.widths))]
    joint = sorted({i for grp in groups for i in grp})
    return sum(max_entropy(support, list(grp)) for grp in groups) - max_entropy(support, joint)


def correlated_pair_support(n: int) -> JointSupport:
    return JointSupport.of((n, n), ((i, i) for i in range(1 << n)))


def independent_pair_support(n: int) -> JointSupport:
    return JointSupport.of((n, n), itertools.product(range(1 << n), repeat=2))


def multipartite_support(k: int, n: int) -> JointSupport:
    rows = []
    for head in itertools.product(range(1 << n), repeat=k - 1):
        last = 0
        for v in head:
            last ^= v
        rows.append((*head, last))
    return JointSupport.of((n,) * k, rows)


def make_correlated_pair(party: Party, n: int, seeds, ids=("X_A", "X_B")) -> ShareSet:
    """Two identical copies of one mixed string; costs exactly ``n``."""
    a = party.new_register(n, seeds.stream(party.name, ids[0]), ids[0])
    b = party.new_register(n, seeds.stream(party.name, ids[1]), ids[1])
    erase(party, b)
    copy_into_blank(party, a, b)
    return ShareSet([a, b], ShareKind.CORRELATED_PAIR)


def _fold_xor(party: Party, shares: ShareSet) -> BitRegister:
    """XOR every part into the last one, reversibly, then certify the zero residue."""
    for part in shares.parts:
        party.require(part)
    last = shares.parts[-1]
    apply_reversible(party, fold(last.n_bits, len(shares.parts)), shares.parts)
    if party.read(last).any():
        raise CombineMismatch("shares do not cancel; at least one was tampered with")
    _certify_blank(party, last)
    party.audit()
    return last


def combine_bipartite(party: Party, shares: ShareSet) -> BitRegister:
    """Compress a co-located correlated pair: the second part becomes ``n`` blank bits."""
    if shares.kind is not ShareKind.CORRELATED_PAIR:
        raise ConfigError("expected a correlated pair")
    return _fold_xor(party, shares)


def deal_multipartite(k: int, n: int, seed, dealer: Party | None = None) -> ShareSet:
    """``k - 1`` uniform parts and their XOR, dealt from one erased register (cost ``n``)."""
    if k < 2:
        raise ConfigError("need k >= 2")
    if n < 1:
        raise ConfigError("need n >= 1")
    seeds = as_seeds(seed)
    dealer = dealer or Party("Dealer", n, workspace_cap=None)
    parts = [dealer.new_register(n, seeds.stream(dealer.name, f"share{i}"), f"share{i}") for i in range(k - 1)]
    last = dealer.new_register(n, seeds.stream(dealer.name, f"share{k - 1}"), f"share{k - 1}")
    erase(dealer, last)
    apply_reversible(dealer, fold(n, k), parts + [last])
    return ShareSet(parts + [last], ShareKind.XOR_ZERO)


def reconstruct_multipartite(party: Party, shares: ShareSet) -> BitRegister:
    """XOR all co-located parts into the last; yields ``n`` blank bits or :class:`CombineMismatch`."""
    return _fold_xor(party, shares)


def check_share_constraint(shares: ShareSet) -> bool:
    acc = np.zeros(shares.n_bits, dtype=np.uint8)
    for p in shares.parts:
        acc ^= p.bits
    if shares.kind is ShareKind.CORRELATED_PAIR:
        return bool(np.array_equal(shares.parts[0].bits, shares.parts[1].bits))
    return not acc.any()

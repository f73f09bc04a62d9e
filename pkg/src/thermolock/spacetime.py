"""One-dimensional positioning: an event-driven simulator with exact rational time.

Verifier1 sits at 0, Verifier2 at ``d``; the claimed position is ``d/2``.
Every message leaves its sender at the current simulated time and is refused
outright if its arrival would beat light speed ``c``. Computation is
instantaneous. Registers in flight belong to nobody.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from thermolock import bits as bitops
from thermolock.adversaries import make_strategy
from thermolock.core import (
    DEFAULT_TELL_CAP,
    BitRegister,
    Party,
    Send,
    Transcript,
    release,
    tell,
)
from thermolock.errors import CausalityViolation, ConfigError, ProtocolAbort
from thermolock.hashing import HashSeed, seed_length, toeplitz_hash
from thermolock.protocols import ProtocolOutcome
from thermolock.rng import as_seeds
from thermolock.sampling import SampleSpec, compare_samples, mask_positions, sample, unmask_positions


def as_fraction(value) -> Fraction:
    """Exact rational from an int, a Fraction or a ``"p/q"`` string. Floats are refused."""
    if isinstance(value, float):
        raise ConfigError(f"use an exact rational instead of the float {value!r}")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise ConfigError(f"not a rational: {value!r}") from exc


def _fmt(q: Fraction) -> str:
    return str(q)


@dataclass(frozen=True)
class SpacetimePoint:
    position: Fraction
    time: Fraction

    def to_json(self) -> dict:
        return {"position": _fmt(self.position), "time": _fmt(self.time)}


def within_light_cone(emit: SpacetimePoint, receive: SpacetimePoint, c: Fraction) -> bool:
    dt = receive.time - emit.time
    return dt >= 0 and abs(receive.position - emit.position) <= c * dt


class Role(str, Enum):
    VERIFIER1 = "Verifier1"
    VERIFIER2 = "Verifier2"
    HONEST_PROVER = "HonestProver"
    COLLUDER = "Colluder"


@dataclass
class Agent:
    name: str
    role: Role
    position: Fraction
    budget: int = 0
    party: Party = field(init=False, repr=False)

    def __post_init__(self):
        self.role = Role(self.role)
        self.position = as_fraction(self.position)
        self.party = Party(self.name, self.budget, workspace_cap=None)

    @property
    def is_verifier(self) -> bool:
        return self.role in (Role.VERIFIER1, Role.VERIFIER2)


@dataclass(frozen=True)
class SpacetimeEvent:
    seq: int
    kind: str
    label: str
    sender: str
    receiver: str
    emit: SpacetimePoint
    receive: SpacetimePoint
    payload: str
    speed_ok: bool

    def to_json(self) -> dict:
        return {
            "seq": self.seq, "kind": self.kind, "label": self.label, "from": self.sender, "to": self.receiver,
            "emit": self.emit.to_json(), "receive": self.receive.to_json(),
            "payload": self.payload, "speed_ok": self.speed_ok,
        }


def causality_check(events: Iterable[SpacetimeEvent], c) -> bool:
    """Re-verify every logged event against the light cone, exactly."""
    c = as_fraction(c)
    return all(e.speed_ok and within_light_cone(e.emit, e.receive, c) for e in events)


def write_event_log(events: Iterable[SpacetimeEvent], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for e in events:
            fh.write(json.dumps(e.to_json(), sort_keys=True) + "\n")


@dataclass
class Message:
    kind: str
    label: str
    sender: Agent
    receiver: Agent
    emit: SpacetimePoint
    receive: SpacetimePoint
    payload: object
    round: int | None = None


Handler = Callable[["Simulator", Message], None]


class Simulator:
    """Deterministic priority queue keyed by (arrival time, sequence number)."""

    def __init__(self, d, c, agents: Sequence[Agent], tell_cap: int = DEFAULT_TELL_CAP):
        self.d = as_fraction(d)
        self.c = as_fraction(c)
        if self.d <= 0 or self.c <= 0:
            raise ConfigError("d and c must be positive")
        self.agents = {a.name: a for a in agents}
        if len(self.agents) != len(agents):
            raise ConfigError("agent names must be unique")
        for a in agents:
            if not 0 <= a.position <= self.d:
                raise ConfigError(f"{a.name} at {a.position} is off the segment [0, {self.d}]")
        self.now = Fraction(0)
        self.transcript = Transcript(tell_cap)
        self.log: list[SpacetimeEvent] = []
        self.handlers: dict[str, Handler] = {}
        self._queue: list[tuple[Fraction, int, Message]] = []
        self._seq = itertools.count()

    def earliest(self, sender: Agent, receiver: Agent, at: Fraction) -> Fraction:
        return at + abs(receiver.position - sender.position) / self.c

    def _post(self, kind: str, label: str, sender: Agent, receiver: Agent, payload, at, arrive, round) -> Fraction:
        at = self.now if at is None else as_fraction(at)
        arrive = self.earliest(sender, receiver, at) if arrive is None else as_fraction(arrive)
        emit = SpacetimePoint(sender.position, at)
        recv = SpacetimePoint(receiver.position, arrive)
        if not within_light_cone(emit, recv, self.c):
            raise CausalityViolation(f"{label}: {sender.name}->{receiver.name} would travel faster than c")
        msg = Message(kind, label, sender, receiver, emit, recv, payload, round)
        heapq.heappush(self._queue, (arrive, next(self._seq), msg))
        return arrive

    def tell(self, sender: Agent, receiver: Agent, label: str, bits, at=None, arrive=None, round=None) -> Fraction:
        return self._post("tell", label, sender, receiver, bitops.as_bits(bits).copy(), at, arrive, round)

    def send(self, sender: Agent, receiver: Agent, label: str, register: BitRegister, at=None, arrive=None,
             round=None) -> Fraction:
        sender.party.require(register)
        arrival = self._post("send", label, sender, receiver, register, at, arrive, round)
        release(sender.party, register)
        return arrival

    def run(self) -> None:
        while self._queue:
            time, seq, msg = heapq.heappop(self._queue)
            self.now = time
            sender, receiver = msg.sender, msg.receiver
            if msg.kind == "tell":
                tell(self.transcript, sender.party, receiver.party, msg.payload)
                shown = bitops.bits_str(msg.payload)
            else:
                reg: BitRegister = msg.payload
                receiver.party.claim(reg)
                self.transcript.events.append(Send(sender.name, receiver.name, reg.id, reg.n_bits, reg.hex))
                shown = reg.id
            self.log.append(SpacetimeEvent(
                seq, msg.kind, msg.label, sender.name, receiver.name, msg.emit, msg.receive, shown,
                within_light_cone(msg.emit, msg.receive, self.c),
            ))
            handler = self.handlers.get(receiver.name)
            if handler is not None:
                handler(self, msg)


# scenario plumbing

def _split(agents: Sequence[Agent], d: Fraction) -> tuple[Agent, Agent, list[Agent]]:
    v1 = [a for a in agents if a.role is Role.VERIFIER1]
    v2 = [a for a in agents if a.role is Role.VERIFIER2]
    if len(v1) != 1 or len(v2) != 1:
        raise ConfigError("need exactly one Verifier1 and one Verifier2")
    if v1[0].position != 0 or v2[0].position != d:
        raise ConfigError("Verifier1 must sit at 0 and Verifier2 at d")
    others = [a for a in agents if not a.is_verifier]
    if not others:
        raise ConfigError("no prover or colluder")
    for a in others:
        if a.role is Role.HONEST_PROVER and a.position != d / 2:
            raise ConfigError(f"honest prover {a.name} must sit at d/2")
        if a.role is Role.COLLUDER and a.position == d / 2:
            raise ConfigError(f"colluder {a.name} sits at d/2; that is an honest position")
    return v1[0], v2[0], others


def _nearest(others: Sequence[Agent], v: Agent) -> list[Agent]:
    best = min(abs(a.position - v.position) for a in others)
    return [a for a in others if abs(a.position - v.position) == best]


def _prephase(d: Fraction, c: Fraction) -> tuple[Fraction, Fraction]:
    """Emission and arrival times for slow pre-delivery before the timed phase."""
    return -3 * d / c, -2 * d / c


def _partner_copies(holder: Agent, partners: Sequence[Agent], originals: Sequence[BitRegister],
                    adversary: str | None, params: dict, seeds) -> dict[str, list[BitRegister | None]]:
    """The holder splits its budget evenly and forges one copy per partner per register."""
    copies: dict[str, list[BitRegister | None]] = {p.name: [None] * len(originals) for p in partners}
    if adversary in (None, "empty") or not partners:
        return copies
    budget_each = holder.budget // (len(partners) * len(originals))
    for p in partners:
        for i, reg in enumerate(originals):
            strategy = make_strategy(adversary, params, reg.n_bits)
            copies[p.name][i] = strategy.forge(
                holder.party, reg, budget_each, seeds.child(p.name, i), id=f"{reg.id}~{p.name}")
    return copies


def _tell_cap(*sizes: int) -> int:
    return max(DEFAULT_TELL_CAP, sum(sizes))


def _run_guarded(sim: Simulator) -> str | None:
    """Run to completion; a resource violation by any agent aborts the whole run."""
    try:
        sim.run()
    except ProtocolAbort as exc:
        return exc.reason
    return None


@dataclass
class Arrival:
    agent: str
    time: Fraction
    payload: object


def _outcome(sim: Simulator, accepted: bool, reason: str | None, parties: list[Party], **details) -> ProtocolOutcome:
    if not causality_check(sim.log, sim.c):
        raise CausalityViolation("event log contains a superluminal delivery")
    for p in parties:
        p.audit()
    return ProtocolOutcome(
        accepted=accepted,
        transcript=sim.transcript,
        ledgers={p.name: p.ledger.to_json() for p in parties},
        failure_reason=None if accepted else reason,
        parties={p.name: p for p in parties},
        details={"events": sim.log, "d": sim.d, "c": sim.c, **details},
    )


# positioning by sampling

def run_positioning_sampling(agents: Sequence[Agent], n: int, t: int, seed, d=2, c=1,
                             adversary: str | None = None, adversary_params: dict | None = None) -> ProtocolOutcome:
    """Single-shot positioning with one shared position set ``s`` and pad ``a``.

    Each verifier evaluates the first answer it receives and requires it by
    ``d/c``. Non-verifier agents answer the verifier(s) they are nearest to.
    A holder without the register guesses each bit.
    """
    if n < 1 or t < 1:
        raise ConfigError("n and t must be >= 1")
    d, c = as_fraction(d), as_fraction(c)
    v1, v2, others = _split(agents, d)
    seeds = as_seeds(seed)
    sim = Simulator(d, c, agents, tell_cap=_tell_cap(4 * t * bitops.ceil_log2(n) * len(others), 4 * t * len(others)))
    deadline = d / c
    t_emit, t_arrive = _prephase(d, c)

    # setup shared by the verifiers
    spec = SampleSpec(n, tuple(int(v) for v in seeds.stream(v1.name, "positions").below(n, t)))
    pad = mask_positions(spec, seeds.stream(v1.name, "pad"))
    x = v1.party.new_register(n, seeds.stream(v1.name, "X"), "X")
    x_s = sample(x, spec, v1.party)
    holder = min(others, key=lambda a: (a.position, a.name))
    partners = [a for a in others if a is not holder]
    sim.tell(v1, v2, "X_s", x_s, at=t_emit, arrive=t_arrive)
    sim.send(v1, holder, "X", x, at=t_emit, arrive=t_arrive)

    state: dict[str, dict] = {a.name: {"register": None, "a": None, "b": None} for a in others}
    answers: dict[str, Arrival | None] = {v1.name: None, v2.name: None}
    v2_expected: dict[str, np.ndarray] = {}

    def prover_handler(sim: Simulator, msg: Message) -> None:
        me = msg.receiver
        st = state[me.name]
        if msg.label in ("X", "X_copy"):
            st["register"] = msg.payload
            if me is holder:
                copies = _partner_copies(me, partners, [msg.payload], adversary, adversary_params or {}, seeds)
                for p in partners:
                    if copies[p.name][0] is not None:
                        sim.send(me, p, "X_copy", copies[p.name][0])
            return
        st[msg.label] = msg.payload
        if st["a"] is None or st["b"] is None:
            return
        s = unmask_positions(n, SampleSpec.decode(n, st["a"]).positions, SampleSpec.decode(n, st["b"]).positions)
        reg = st["register"]
        if reg is not None:
            values = sample(reg, s, me.party)
        else:
            values = seeds.stream(me.name, "guess").bits(t)
        for v in (v1, v2):
            if me in _nearest(others, v):
                sim.tell(me, v, "answer", values)

    def verifier_handler(sim: Simulator, msg: Message) -> None:
        me = msg.receiver
        if msg.label == "X_s":
            v2_expected["X_s"] = msg.payload
        elif msg.label == "answer" and answers[me.name] is None:
            answers[me.name] = Arrival(msg.sender.name, sim.now, msg.payload)

    for a in others:
        sim.handlers[a.name] = prover_handler
    sim.handlers[v1.name] = sim.handlers[v2.name] = verifier_handler

    # the masks are told as fixed-width integers; the pad modulus is n
    a_bits = SampleSpec(n, pad.pad).encode()
    b_bits = SampleSpec(n, pad.masked).encode()
    for a in others:
        sim.tell(v1, a, "a", a_bits, at=Fraction(0))
        sim.tell(v2, a, "b", b_bits, at=Fraction(0))
    abort = _run_guarded(sim)
    if abort is not None:
        return _outcome(sim, False, abort, [a.party for a in agents], deadline=deadline)

    expected = {v1.name: x_s, v2.name: v2_expected.get("X_s")}
    checks = {}
    for v in (v1, v2):
        got = answers[v.name]
        if got is None:
            checks[v.name] = "no_answer"
        elif got.time > deadline:
            checks[v.name] = "late_answer"
        elif expected[v.name] is None or not compare_samples(expected[v.name], got.payload):
            checks[v.name] = "sample_mismatch"
        else:
            checks[v.name] = "ok"
    bad = [r for r in checks.values() if r != "ok"]
    arrivals = {k: (None if a is None else a.time) for k, a in answers.items()}
    return _outcome(sim, not bad, bad[0] if bad else None, [a.party for a in agents],
                    arrivals=arrivals, checks=checks, deadline=deadline)


# positioning by hashing

@dataclass(frozen=True)
class RoundResult:
    index: int
    choice: int  # a xor b: 0 means Verifier1 expects the register, 1 means Verifier2
    arrival: Fraction | None
    timely: bool
    tag_ok: bool

    @property
    def accepted(self) -> bool:
        return self.timely and self.tag_ok

    def to_json(self) -> dict:
        return {
            "round": self.index, "choice": self.choice,
            "arrival": None if self.arrival is None else _fmt(self.arrival),
            "timely": self.timely, "tag_ok": self.tag_ok, "accepted": self.accepted,
        }


def run_positioning_hashing(agents: Sequence[Agent], n: int, t: int, r: int, seed, d=2, c=1,
                            adversary: str | None = None, adversary_params: dict | None = None) -> ProtocolOutcome:
    """``r`` parallel rounds; the register must reach the verifier chosen by ``a xor b`` at ``d/c``.

    Whoever holds a round's register (the real one or a forged copy) and is
    nearest the chosen verifier sends it once both bits are known.
    """
    if n < 1 or t < 1 or r < 1:
        raise ConfigError("n, t and r must be >= 1")
    d, c = as_fraction(d), as_fraction(c)
    v1, v2, others = _split(agents, d)
    seeds = as_seeds(seed)
    sim = Simulator(d, c, agents, tell_cap=_tell_cap(2 * r * len(others), 2 * r * t))
    deadline = d / c
    t_emit, t_arrive = _prephase(d, c)
    m = seed_length(n, t)

    x_bits = seeds.stream(v1.name, "X").bits(r * n).reshape(r, n)
    y_bits = seeds.stream(v1.name, "Y").bits(r * m).reshape(r, m)
    a = seeds.stream(v1.name, "a").bits(r)
    b = seeds.stream(v1.name, "b").bits(r)
    choice = a ^ b
    xs = [v1.party.claim(BitRegister(f"X{i}", x_bits[i], fresh=True)) for i in range(r)]
    ys = [v1.party.claim(BitRegister(f"Y{i}", y_bits[i], fresh=True)) for i in range(r)]
    v1.party.use_workspace(r * t)
    tags = np.stack([toeplitz_hash(x_bits[i], HashSeed(y_bits[i], n, t)) for i in range(r)])
    holder = min(others, key=lambda ag: (ag.position, ag.name))
    partners = [ag for ag in others if ag is not holder]
    sim.tell(v1, v2, "tags", tags.ravel(), at=t_emit, arrive=t_arrive)
    for i in range(r):
        if choice[i]:
            sim.send(v1, v2, "Y", ys[i], at=t_emit, arrive=t_arrive, round=i)
        sim.send(v1, holder, "X", xs[i], at=t_emit, arrive=t_arrive, round=i)

    held: dict[str, list[BitRegister | None]] = {ag.name: [None] * r for ag in others}
    bits_seen: dict[str, dict[str, np.ndarray]] = {ag.name: {} for ag in others}
    received: dict[int, Arrival] = {}
    v_state: dict[str, dict[int, BitRegister]] = {v1.name: {i: ys[i] for i in range(r) if not choice[i]}, v2.name: {}}
    told_tags: dict[str, np.ndarray] = {v1.name: tags}
    pending_x: list[BitRegister] = []

    def prover_handler(sim: Simulator, msg: Message) -> None:
        me = msg.receiver
        if msg.kind == "send":
            held[me.name][msg.round] = msg.payload
            if me is holder and msg.label == "X":
                pending_x.append(msg.payload)
                if len(pending_x) == r and partners:
                    copies = _partner_copies(me, partners, pending_x, adversary, adversary_params or {}, seeds)
                    for p in partners:
                        for i, reg in enumerate(copies[p.name]):
                            if reg is not None:
                                sim.send(me, p, "X_copy", reg, round=i)
            return
        bits_seen[me.name][msg.label] = msg.payload
        if len(bits_seen[me.name]) < 2:
            return
        sel = bits_seen[me.name]["a"] ^ bits_seen[me.name]["b"]
        near = {v.name for v in (v1, v2) if me in _nearest(others, v)}
        for i in range(r):
            target = v2 if sel[i] else v1
            reg = held[me.name][i]
            if target.name in near and reg is not None:
                sim.send(me, target, "answer", reg, round=i)
                held[me.name][i] = None

    def verifier_handler(sim: Simulator, msg: Message) -> None:
        me = msg.receiver
        if msg.label == "Y":
            v_state[me.name][msg.round] = msg.payload
        elif msg.label == "tags":
            told_tags[me.name] = msg.payload.reshape(r, t)
        elif msg.label == "answer" and msg.round not in received:
            received[msg.round] = Arrival(me.name, sim.now, msg.payload)

    for ag in others:
        sim.handlers[ag.name] = prover_handler
    sim.handlers[v1.name] = sim.handlers[v2.name] = verifier_handler
    for ag in others:
        sim.tell(v1, ag, "a", a, at=Fraction(0))
        sim.tell(v2, ag, "b", b, at=Fraction(0))
    abort = _run_guarded(sim)
    if abort is not None:
        return _outcome(sim, False, abort, [ag.party for ag in agents], rounds=[], deadline=deadline)

    rounds = []
    for i in range(r):
        chosen = v2 if choice[i] else v1
        got = received.get(i)
        if got is None or got.agent != chosen.name:
            rounds.append(RoundResult(i, int(choice[i]), None if got is None else got.time, False, False))
            continue
        y = v_state[chosen.name][i]
        reg = got.payload
        if reg.n_bits != n:
            tag_ok = False
        else:
            chosen.party.use_workspace(t)
            seed_i = HashSeed(chosen.party.read(y), n, t)
            tag_ok = bool(np.array_equal(toeplitz_hash(chosen.party.read(reg), seed_i), told_tags[chosen.name][i]))
            chosen.party.release_workspace(t)
        rounds.append(RoundResult(i, int(choice[i]), got.time, got.time <= deadline, tag_ok))
    ok = all(rr.accepted for rr in rounds)
    reason = None
    if not ok:
        first = next(rr for rr in rounds if not rr.accepted)
        reason = "no_answer" if first.arrival is None else ("late_answer" if not first.timely else "tag_mismatch")
    return _outcome(sim, ok, reason, [ag.party for ag in agents], rounds=rounds, deadline=deadline)


# scenario files

PROTOCOLS = {"positioning_sampling", "positioning_hashing"}


@dataclass
class Scenario:
    d: Fraction
    c: Fraction
    agents: list[dict]
    protocol: str
    n: int
    t: int
    r: int = 1
    seed: int = 0
    adversary: str | None = None
    adversary_params: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, data: dict) -> "Scenario":
        try:
            scn = cls(
                d=as_fraction(data["d"]), c=as_fraction(data["c"]), agents=list(data["agents"]),
                protocol=str(data["protocol"]), n=int(data["N"]), t=int(data["t"]), r=int(data.get("r", 1)),
                seed=int(data.get("seed", 0)), adversary=data.get("adversary"),
                adversary_params=dict(data.get("adversary_params", {})),
            )
        except KeyError as exc:
            raise ConfigError(f"scenario is missing field {exc.args[0]!r}") from None
        if scn.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {scn.protocol!r}; expected one of {sorted(PROTOCOLS)}")
        for i, spec in enumerate(scn.agents):
            for key in ("name", "role", "position"):
                if key not in spec:
                    raise ConfigError(f"agents[{i}] is missing {key!r}")
        return scn

    def build_agents(self) -> list[Agent]:
        out = []
        for spec in self.agents:
            try:
                out.append(Agent(spec["name"], Role(spec["role"]), as_fraction(spec["position"]), int(spec.get("budget", 0))))
            except ValueError as exc:
                raise ConfigError(f"agent {spec.get('name')!r}: {exc}") from None
        return out


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return Scenario.from_json(data)


def run_scenario(scn: Scenario, seed: int | None = None) -> ProtocolOutcome:
    agents = scn.build_agents()
    seed = scn.seed if seed is None else seed
    if scn.protocol == "positioning_sampling":
        return run_positioning_sampling(agents, scn.n, scn.t, seed, scn.d, scn.c, scn.adversary, scn.adversary_params)
    return run_positioning_hashing(agents, scn.n, scn.t, scn.r, seed, scn.d, scn.c, scn.adversary, scn.adversary_params)


def honest_agents(d=2) -> list[Agent]:
    d = as_fraction(d)
    return [Agent("V1", Role.VERIFIER1, 0), Agent("V2", Role.VERIFIER2, d), Agent("P", Role.HONEST_PROVER, d / 2)]


def colluder_agents(d=2, budget: int = 0) -> list[Agent]:
    """Two colluders at d/4 and 3d/4; the one nearer Verifier1 gets the register and the whole budget."""
    d = as_fraction(d)
    return [
        Agent("V1", Role.VERIFIER1, 0), Agent("V2", Role.VERIFIER2, d),
        Agent("C1", Role.COLLUDER, d / 4, budget), Agent("C2", Role.COLLUDER, 3 * d / 4, 0),
    ]

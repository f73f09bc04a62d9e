"""Experiment runner: Monte Carlo soundness estimates, exact oracle suites, reports.

Trial ``i`` of an experiment with root seed ``r`` always uses the seed
``derive_key(r, "trial", i)``, so results do not depend on how trials are
split across worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np

from thermolock.adversaries import (
    erasure_profile,
    fresh_register_success,
    make_strategy,
    memory_oracle_detail,
    subset_store_success,
)
from thermolock.core import DEFAULT_TELL_CAP, ReversiblePermutation, Party
from thermolock.errors import ConfigError, ProtocolAbort
from thermolock.hashing import exhaustive_collision_fractions
from thermolock.rng import Seeds, derive_key

PROTOCOLS = (
    "pow_direct", "pow_sampling", "pow_hashing", "banknote", "ticket",
    "positioning_sampling", "positioning_hashing",
)
HONEST = (None, "honest", "none")


def hoeffding_halfwidth(trials: int, delta: float) -> float:
    return math.sqrt(math.log(2.0 / delta) / (2.0 * trials))


class Verdict(str, Enum):
    WITHIN_BOUND = "WithinBound"
    VIOLATION = "Violation"


def verdict(rate: float, halfwidth: float, bound: float) -> Verdict:
    return Verdict.VIOLATION if rate - halfwidth > bound else Verdict.WITHIN_BOUND


# configuration

def _line_of(source: str | None, key: str) -> str:
    if not source:
        return ""
    for lineno, line in enumerate(source.splitlines(), 1):
        if re.search(rf'"{re.escape(key)}"\s*:', line):
            return f"line {lineno}: "
    return ""


@dataclass
class ExperimentConfig:
    protocol: str
    n: int
    t: int = 1
    k: int = 2
    r: int = 1
    trials: int = 1
    seed: int = 0
    adversary: str | None = None
    adversary_params: dict = field(default_factory=dict)
    verifier: str | None = None
    budgets: dict = field(default_factory=dict)
    confidence_delta: float = 1e-6
    parallelism: int = 1
    theoretical_bound: float | None = None
    name: str = ""

    _source: str | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.validate()

    def _fail(self, key: str, msg: str):
        where = _line_of(self._source, key) or _line_of(self._source, key.upper())  # files may say "N"
        raise ConfigError(f"{where}{key}: {msg}")

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            self._fail("protocol", f"unknown protocol {self.protocol!r}; expected one of {', '.join(PROTOCOLS)}")
        for key in ("n", "t", "k", "r", "trials", "parallelism"):
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                self._fail(key, f"must be a positive integer, got {value!r}")
        if not 0 < self.confidence_delta < 1:
            self._fail("confidence_delta", "must lie in (0, 1)")
        if self.theoretical_bound is not None and not 0 <= self.theoretical_bound <= 1:
            self._fail("theoretical_bound", "must lie in [0, 1]")
        for who, b in self.budgets.items():
            if not isinstance(b, int) or b < 0:
                self._fail("budgets", f"budget for {who!r} must be a non-negative integer")
        n, t, k = self.n, self.t, self.k
        if self.protocol == "pow_sampling" and t * max(1, (n - 1).bit_length()) + t > DEFAULT_TELL_CAP:
            self._fail("t", "samples do not fit the tell cap")
        if self.protocol == "banknote" and not (k >= 2 and k * t <= n):
            self._fail("k", "banknotes need k >= 2 and k*t <= n")
        if self.verifier is not None:
            from thermolock.protocols import VERIFIER_STRATEGIES

            if self.protocol != "pow_hashing":
                self._fail("verifier", "verifier strategies apply to pow_hashing only")
            if self.verifier not in VERIFIER_STRATEGIES:
                self._fail("verifier", f"unknown verifier strategy {self.verifier!r}")
        if self.adversary not in HONEST:
            try:
                make_strategy(self.adversary, self.adversary_params, self.n)
            except (ConfigError, KeyError, TypeError) as exc:
                self._fail("adversary", str(exc))

    @classmethod
    def from_dict(cls, data: dict, source: str | None = None) -> "ExperimentConfig":
        names = {f.name for f in fields(cls) if not f.name.startswith("_")}
        data = dict(data)
        if "N" in data:
            data["n"] = data.pop("N")
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"{_line_of(source, unknown[0])}unknown field {unknown[0]!r}")
        for key in ("protocol", "n"):
            if key not in data:
                raise ConfigError(f"missing required field {key!r}")
        return cls(**data, _source=source)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("line 1: config must be a JSON object")
        return cls.from_dict(data, text)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if not f.name.startswith("_")}

    def label(self) -> str:
        return self.name or f"{self.protocol}/{self.adversary or 'honest'}"


# bounds

def _g(cfg: ExperimentConfig) -> int:
    p = cfg.adversary_params
    if "g" in p:
        return int(p["g"])
    if "positions" in p:
        return len(p["positions"])
    return 0


def theoretical_bound(cfg: ExperimentConfig) -> float:
    """Acceptance bound for the configured protocol/adversary pair."""
    if cfg.theoretical_bound is not None:
        return cfg.theoretical_bound
    adv, n, t = cfg.adversary, cfg.n, cfg.t
    if adv in HONEST:
        return 1.0
    g = _g(cfg)
    s = max(n - g, 0)
    if cfg.protocol == "pow_direct":
        budget = cfg.budgets.get("prover", g)
        return 2.0 ** -max(n - max(budget, g), 0)
    subset = adv in ("subset_store", "prefix_erase_copy")
    if cfg.protocol in ("pow_sampling", "banknote", "positioning_sampling"):
        if subset:
            return float(subset_store_success(n, g, t))
        # a forger answering from one register repeats itself on repeated positions
        return float(fresh_register_success(n, t)) if adv == "fresh_register" else 2.0 ** -t
    if cfg.protocol in ("pow_hashing", "ticket"):
        return min(1.0, 2.0 ** -s + 2.0 ** -t) if subset else 2.0 ** -t
    # positioning_hashing: each round is caught with probability >= 1/2 unless the copy passes
    per_round = 0.5 + 0.5 * min(1.0, 2.0 ** -s + 2.0 ** -t)
    return per_round ** cfg.r


# trials

def trial_seed(root: int, index: int) -> int:
    return derive_key(root, "trial", index)


def run_trial(cfg: ExperimentConfig, index: int) -> bool:
    """One seeded trial; True when the verifier(s) accepted."""
    from thermolock import money, protocols, spacetime

    seed = trial_seed(cfg.seed, index)
    honest = cfg.adversary in HONEST
    strat = None if honest else make_strategy(cfg.adversary, cfg.adversary_params, cfg.n)
    budget = cfg.budgets.get("prover", cfg.n if honest else _g(cfg))
    if cfg.protocol == "pow_direct":
        return protocols.pow_direct(budget, cfg.n, seed, adversary=strat).accepted
    if cfg.protocol == "pow_sampling":
        return protocols.pow_sampling(strat, cfg.n, cfg.t, seed, prover_budget=budget).accepted
    if cfg.protocol == "pow_hashing":
        vcls = protocols.VERIFIER_STRATEGIES[cfg.verifier or "honest"]
        return protocols.pow_hashing(strat, cfg.n, cfg.t, seed, prover_budget=budget, verifier=vcls(),
                                     verifier_budget=cfg.budgets.get("verifier", 0)).accepted
    if cfg.protocol == "banknote":
        bank = money.Bank()
        holder = Party("Holder", budget, workspace_cap=None)
        merchant = Party("Merchant", 0)
        note, _ = money.emit_banknote(bank, cfg.n, cfg.k, cfg.t, seed, holder=holder)
        if not honest:
            note = money.forge_note(strat, holder, note, budget, seed)
        note.hand_over(holder, merchant)
        try:
            return money.spend_banknote(merchant, note, bank).accepted
        except ProtocolAbort:
            return False
    if cfg.protocol == "ticket":
        venue = money.Bank("Venue")
        holder = Party("Holder", budget, workspace_cap=None)
        ticket, _ = money.emit_ticket(venue, cfg.n, cfg.t, seed, holder=holder)
        if not honest:
            ticket = money.forge_note(strat, holder, ticket, budget, seed)
        ticket.hand_over(holder, venue.party)
        return money.verify_ticket(venue, ticket)
    agents = spacetime.honest_agents() if honest else spacetime.colluder_agents(budget=budget)
    adv = None if honest else cfg.adversary
    if cfg.protocol == "positioning_sampling":
        return spacetime.run_positioning_sampling(agents, cfg.n, cfg.t, seed, adversary=adv,
                                                  adversary_params=cfg.adversary_params).accepted
    return spacetime.run_positioning_hashing(agents, cfg.n, cfg.t, cfg.r, seed, adversary=adv,
                                             adversary_params=cfg.adversary_params).accepted


def _count_chunk(args: tuple[dict, int, int]) -> int:
    cfg_dict, start, stop = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    return sum(run_trial(cfg, i) for i in range(start, stop))


def _chunks(trials: int, parts: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, trials, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


@dataclass(frozen=True)
class SoundnessReport:
    name: str
    successes: int
    trials: int
    rate: float
    ci_halfwidth: float
    theoretical_bound: float
    verdict: Verdict

    def to_json(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        return d

    @classmethod
    def from_json(cls, data: dict) -> "SoundnessReport":
        return cls(**{**data, "verdict": Verdict(data["verdict"])})


def make_report(name: str, successes: int, trials: int, delta: float, bound: float) -> SoundnessReport:
    rate = successes / trials
    hw = hoeffding_halfwidth(trials, delta)
    return SoundnessReport(name, successes, trials, rate, hw, bound, verdict(rate, hw, bound))


def run_experiment(cfg: ExperimentConfig, jobs: int | None = None) -> SoundnessReport:
    jobs = cfg.parallelism if jobs is None else jobs
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    parts = max(1, min(jobs * 4, cfg.trials)) if jobs > 1 else 1
    work = [(cfg.to_json(), a, b) for a, b in _chunks(cfg.trials, parts)]
    if jobs == 1:
        successes = sum(_count_chunk(w) for w in work)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            successes = sum(pool.map(_count_chunk, work))
    return make_report(cfg.label(), successes, cfg.trials, cfg.confidence_delta, theoretical_bound(cfg))


# exact oracle suites

ORACLE_KINDS = ("erasure", "memory", "hash-collision")
ORACLE_CAPS = {
    "erasure": {"g": 2, "t": 10, "permutations": 200, "seed": 0},
    "memory": {"n": 2, "g": 1, "t": 1},
    "hash-collision": {"n": 6, "t": 3},
}
ERASURE_MAX_WIDTH = 16
HASH_MAX_SEED_BITS = 12


@dataclass
class OracleReport:
    kind: str
    caps: dict
    rows: list[dict]
    passed: bool

    def to_json(self) -> dict:
        return {"kind": self.kind, "caps": self.caps, "passed": self.passed, "rows": self.rows}


def _erasure_suite(g: int, t: int, permutations: int, seed: int) -> list[dict]:
    if g + t > ERASURE_MAX_WIDTH:
        raise ConfigError(f"erasure suite needs g + t <= {ERASURE_MAX_WIDTH}")
    root = Seeds(seed)
    perms = [("identity", ReversiblePermutation.identity(g + t))]
    perms += [(f"random-{i}", ReversiblePermutation.random_table(g + t, root.stream("perm", i)))
              for i in range(permutations)]
    rows = []
    for label, perm in perms:
        prof = erasure_profile(g, t, perm)
        worst = max(p * (1 << s) for s, p in enumerate(prof))
        rows.append({
            "permutation": label,
            "profile": [str(p) for p in prof],
            "max_ratio_to_bound": str(worst),
            "ok": all(p <= Fraction(1, 1 << s) for s, p in enumerate(prof)),
        })
    return rows


def _memory_suite(n: int, g: int, t: int) -> list[dict]:
    best, _ = memory_oracle_detail(n, g, t)
    subset = subset_store_success(n, g, t)
    return [{"n": n, "g": g, "t": t, "optimum": str(best), "optimum_float": float(best),
             "subset_store": str(subset), "ok": best >= subset and best <= 1}]


def _hash_suite(n: int, t: int) -> list[dict]:
    if n + t - 1 > HASH_MAX_SEED_BITS:
        raise ConfigError(f"hash suite needs n + t - 1 <= {HASH_MAX_SEED_BITS}")
    fr = exhaustive_collision_fractions(n, t)
    target = 2.0 ** -t
    return [{"n": n, "t": t, "pairs": int(fr.size), "seeds": 1 << (n + t - 1),
             "min_fraction": float(fr.min()), "max_fraction": float(fr.max()),
             "ok": bool(np.all(fr == target))}]


def run_oracle_suite(kind: str, caps: dict | None = None) -> OracleReport:
    if kind not in ORACLE_KINDS:
        raise ConfigError(f"unknown oracle {kind!r}; expected one of {', '.join(ORACLE_KINDS)}")
    merged = {**ORACLE_CAPS[kind], **(caps or {})}
    unknown = set(merged) - set(ORACLE_CAPS[kind])
    if unknown:
        raise ConfigError(f"unknown cap(s) for {kind}: {', '.join(sorted(unknown))}")
    merged = {k: int(v) for k, v in merged.items()}
    if kind == "erasure":
        rows = _erasure_suite(**merged)
    elif kind == "memory":
        rows = _memory_suite(**merged)
    else:
        rows = _hash_suite(**merged)
    return OracleReport(kind, merged, rows, all(r["ok"] for r in rows))


# output

REPORT_FIELDS = [f.name for f in fields(SoundnessReport)]


def _flat(row: dict) -> dict:
    return {k: (json.dumps(v) if isinstance(v, (list, dict)) else v) for k, v in row.items()}


def format_report(report, fmt: str = "json") -> str:
    """Byte-stable rendering of a :class:`SoundnessReport`, an :class:`OracleReport`, or a list of them."""
    items = report if isinstance(report, list) else [report]
    rows = [r.to_json() for r in items]
    if fmt == "json":
        payload = rows if isinstance(report, list) else rows[0]
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if isinstance(items[0], OracleReport):
        rows = [{"kind": it.kind, **_flat(row)} for it in items for row in it.rows]
        header = list(rows[0]) if rows else ["kind"]
    else:
        header = REPORT_FIELDS
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    if fmt in ("markdown", "markdown-table", "md"):
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for row in rows:
            lines.append("| " + " | ".join(str(row.get(h, "")) for h in header) + " |")
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown format {fmt!r}")


def emit_report(report, fmt: str = "json", path: str | Path | None = None) -> str:
    text = format_report(report, fmt)
    if path is not None:
        Path(path).write_text(text)
    return text

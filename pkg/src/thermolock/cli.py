"""Command line entry point.

Exit codes: 0 when everything is within bound (or a command simply
succeeded), 1 on a bound violation or a rejected note, 2 on a config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from thermolock import harness, money, spacetime
from thermolock.core import Party
from thermolock.errors import ConfigError, ProtocolAbort

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2
FORMATS = ("json", "csv", "markdown")


def _out(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_run(args) -> int:
    cfg = harness.ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    cfg.validate()
    report = harness.run_experiment(cfg, jobs=args.jobs)
    _out(harness.format_report(report, args.format), args.output)
    return EXIT_VIOLATION if report.verdict is harness.Verdict.VIOLATION else EXIT_OK


def _parse_caps(items: list[str]) -> dict:
    caps = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"cap {item!r} should look like key=value")
        try:
            caps[key] = int(value)
        except ValueError:
            raise ConfigError(f"cap {key} needs an integer, got {value!r}") from None
    return caps


def cmd_oracle(args) -> int:
    report = harness.run_oracle_suite(args.kind, _parse_caps(args.caps))
    _out(harness.format_report(report, args.format), args.output)
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_money(args) -> int:
    if not args.bank_store or not args.note:
        raise ConfigError("money commands need --bank-store and --note")
    bank = money.Bank("Venue" if args.action.startswith("ticket") else "Bank", store=args.bank_store)
    seed = 0 if args.seed is None else args.seed
    if args.action == "emit":
        note, rec = money.emit_banknote(bank, args.n, args.k, args.t, seed)
        money.write_note(args.note, note)
        _print_json({"note_id": note.note_id, "k": rec.k, "t": rec.t, "n_bits": rec.n_bits})
        return EXIT_OK
    if args.action == "ticket-emit":
        ticket, rec = money.emit_ticket(bank, args.n, args.t, seed)
        money.write_note(args.note, ticket)
        _print_json({"note_id": ticket.note_id, "t": rec.seed.t, "n_bits": rec.seed.n})
        return EXIT_OK
    note = money.read_note(args.note)
    if args.action == "ticket-verify":
        ok = money.verify_ticket(bank, note)
        _print_json({"note_id": note.note_id, "accepted": ok})
        return EXIT_OK if ok else EXIT_VIOLATION
    if args.action == "spend":
        merchant = Party(args.merchant, 0)
        try:
            res = money.spend_banknote(merchant, note, bank)
        except ProtocolAbort as exc:
            _print_json({"note_id": note.note_id, "accepted": False, "failure_reason": exc.reason, "error": str(exc)})
            return EXIT_VIOLATION
        money.write_note(args.note, note)
        _print_json({"note_id": note.note_id, "accepted": res.accepted, "warn": res.warn,
                     "failure_reason": res.failure_reason, "spend_count": note.spend_count})
        return EXIT_OK if res.accepted else EXIT_VIOLATION
    # reemit
    try:
        new, _ = money.reemit_banknote(bank, note, seed)
    except ProtocolAbort as exc:
        _print_json({"note_id": note.note_id, "accepted": False, "failure_reason": exc.reason, "error": str(exc)})
        return EXIT_VIOLATION
    money.write_note(args.note, new)
    _print_json({"old_note_id": note.note_id, "note_id": new.note_id, "accepted": True})
    return EXIT_OK


def cmd_position(args) -> int:
    scn = spacetime.load_scenario(args.scenario)
    seed = scn.seed if args.seed is None else args.seed
    trials = args.trials or 1
    if trials == 1:
        outcome = spacetime.run_scenario(scn, seed)
        if args.events:
            spacetime.write_event_log(outcome.details["events"], args.events)
        rec = outcome.record()
        rec["light_cone_ok"] = spacetime.causality_check(outcome.details["events"], scn.c)
        if "arrivals" in outcome.details:
            rec["arrivals"] = {k: None if v is None else str(v) for k, v in outcome.details["arrivals"].items()}
        if "rounds" in outcome.details:
            rounds = outcome.details["rounds"]
            rec["rounds"] = len(rounds)
            rec["rounds_accepted"] = sum(r.accepted for r in rounds)
        _print_json(rec)
        return EXIT_OK
    agents = scn.build_agents()
    honest = all(a.role in (spacetime.Role.VERIFIER1, spacetime.Role.VERIFIER2, spacetime.Role.HONEST_PROVER)
                 for a in agents)
    successes = sum(spacetime.run_scenario(scn, harness.trial_seed(seed, i)).accepted for i in range(trials))
    cfg = harness.ExperimentConfig(
        protocol=scn.protocol, n=scn.n, t=scn.t, r=scn.r, trials=trials,
        adversary=None if honest else (scn.adversary or "fresh_register"), adversary_params=scn.adversary_params,
    )
    report = harness.make_report(cfg.label(), successes, trials, cfg.confidence_delta, harness.theoretical_bound(cfg))
    _out(harness.format_report(report, args.format), args.output)
    return EXIT_VIOLATION if report.verdict is harness.Verdict.VIOLATION else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="root seed (overrides the file)")
    common.add_argument("--format", choices=FORMATS, default="json")
    common.add_argument("--output", "-o", default=None, help="write the report here instead of stdout")

    parser = argparse.ArgumentParser(prog="thermolock", description="Thermodynamic cryptography experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="Monte Carlo soundness experiment from a config file")
    p.add_argument("config")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: config parallelism)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", parents=[common], help="exact brute-force oracle suite")
    p.add_argument("kind", choices=harness.ORACLE_KINDS)
    p.add_argument("caps", nargs="*", help="overrides such as g=2 t=10 permutations=200")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("money", parents=[common], help="banknotes and tickets with a persistent bank store")
    p.add_argument("action", choices=("emit", "spend", "reemit", "ticket-emit", "ticket-verify"))
    p.add_argument("--bank-store", required=False)
    p.add_argument("--note", required=False)
    p.add_argument("--n", "-N", type=int, default=64)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--t", type=int, default=8)
    p.add_argument("--merchant", default="Merchant")
    p.set_defaults(func=cmd_money)

    p = sub.add_parser("position", parents=[common], help="run a positioning scenario file")
    p.add_argument("scenario")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--events", default=None, help="write the event log as JSON lines")
    p.set_defaults(func=cmd_position)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        sys.stderr.write(f"thermolock: config error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

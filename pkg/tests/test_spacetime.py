import json
from fractions import Fraction

import pytest

from thermolock.errors import CausalityViolation, ConfigError
from thermolock.spacetime import (
    Agent,
    Role,
    Scenario,
    Simulator,
    SpacetimePoint,
    as_fraction,
    causality_check,
    colluder_agents,
    honest_agents,
    load_scenario,
    run_positioning_hashing,
    run_positioning_sampling,
    run_scenario,
    within_light_cone,
    write_event_log,
)

F = Fraction


def test_light_cone_examples():
    c = F(1)
    assert within_light_cone(SpacetimePoint(F(1), F(0)), SpacetimePoint(F(1), F(0)), c)
    assert within_light_cone(SpacetimePoint(F(0), F(0)), SpacetimePoint(F(1), F(1)), c)
    assert not within_light_cone(SpacetimePoint(F(0), F(0)), SpacetimePoint(F(2), F(1)), c)
    assert not within_light_cone(SpacetimePoint(F(0), F(1)), SpacetimePoint(F(0), F(0)), c)


def test_as_fraction():
    assert as_fraction("3/4") == F(3, 4)
    assert as_fraction(2) == F(2)
    with pytest.raises(ConfigError):
        as_fraction(0.5)


def test_simulator_refuses_superluminal():
    a, b = Agent("A", Role.VERIFIER1, F(0)), Agent("B", Role.VERIFIER2, F(2))
    sim = Simulator(2, 1, [a, b])
    with pytest.raises(CausalityViolation):
        sim.tell(a, b, "x", [1], at=0, arrive=1)
    assert sim.tell(a, b, "x", [1], at=0) == 2


def test_simulator_orders_by_arrival_then_sequence():
    a, b = Agent("A", Role.VERIFIER1, F(0)), Agent("B", Role.VERIFIER2, F(1))
    sim = Simulator(1, 1, [a, b])
    seen = []
    sim.handlers["B"] = lambda s, m: seen.append(m.label)
    sim.tell(a, b, "late", [1], at=F(1, 2))
    sim.tell(a, b, "first", [1], at=0)
    sim.tell(a, b, "second", [0], at=0)
    sim.run()
    assert seen == ["first", "second", "late"]
    assert [e.receive.time for e in sim.log] == [1, 1, F(3, 2)]


def test_send_moves_register_in_transit():
    a, b = Agent("A", Role.VERIFIER1, F(0)), Agent("B", Role.VERIFIER2, F(1))
    sim = Simulator(1, 1, [a, b])
    reg = a.party.new_register(4, 0, "r")
    sim.send(a, b, "r", reg, at=0)
    assert reg.owner == "Environment"
    sim.run()
    assert b.party.owns(reg)


def test_bad_layouts():
    with pytest.raises(ConfigError):
        Simulator(2, 1, [Agent("A", Role.VERIFIER1, F(3))])
    with pytest.raises(ConfigError):
        Simulator(0, 1, [])
    with pytest.raises(ConfigError):
        run_positioning_sampling([Agent("P", Role.HONEST_PROVER, F(1))], 16, 4, 0)


@pytest.mark.parametrize("seed", range(10))
def test_honest_sampling_arrives_at_two(seed):
    out = run_positioning_sampling(honest_agents(), 64, 8, seed)
    assert out.accepted
    assert set(out.details["arrivals"].values()) == {F(2)}
    assert causality_check(out.details["events"], F(1))


def test_off_centre_prover_is_late():
    agents = honest_agents()[:2] + [Agent("C", Role.COLLUDER, F(1, 2))]
    out = run_positioning_sampling(agents, 64, 8, 0)
    assert not out.accepted and out.failure_reason == "late_answer"
    assert out.details["arrivals"]["V2"] == 3


def test_colluders_fail_sampling():
    wins = sum(run_positioning_sampling(colluder_agents(), 64, 16, s, adversary="fresh_register").accepted
               for s in range(300))
    assert wins == 0


def test_honest_hashing_rounds():
    out = run_positioning_hashing(honest_agents(), 32, 8, 5, 0)
    assert out.accepted
    rounds = out.details["rounds"]
    assert len(rounds) == 5 and all(r.accepted and r.arrival == 2 for r in rounds)
    assert causality_check(out.details["events"], F(1))


def test_colluders_caught_about_half_the_rounds():
    out = run_positioning_hashing(colluder_agents(), 16, 8, 400, 3, adversary="fresh_register")
    caught = sum(not r.accepted for r in out.details["rounds"])
    assert 0.4 < caught / 400 < 0.6
    assert not out.accepted
    assert causality_check(out.details["events"], F(1))


def test_every_logged_event_respects_light_cone():
    for out in (run_positioning_sampling(colluder_agents(), 16, 4, 1, adversary="subset_store",
                                         adversary_params={"g": 8}),
                run_positioning_hashing(colluder_agents(budget=8), 16, 4, 20, 1, adversary="subset_store",
                                        adversary_params={"g": 4})):
        for ev in out.details["events"]:
            assert within_light_cone(ev.emit, ev.receive, F(1))


def test_event_log_round_trip(tmp_path):
    out = run_positioning_hashing(honest_agents(), 16, 4, 2, 0)
    path = tmp_path / "events.jsonl"
    write_event_log(out.details["events"], path)
    lines = [json.loads(l) for l in path.read_text().splitlines()]
    assert len(lines) == len(out.details["events"])
    assert all(isinstance(l["receive"]["time"], str) for l in lines)


def test_scenario_files():
    scn = load_scenario("configs/position_honest.json")
    assert run_scenario(scn).accepted
    col = load_scenario("configs/position_colluders.json")
    assert not run_scenario(col).accepted
    with pytest.raises(ConfigError):
        Scenario.from_json({"d": "2", "c": "1", "agents": [], "protocol": "teleport", "N": 4, "t": 2})
    with pytest.raises(ConfigError):
        Scenario.from_json({"d": "2", "c": "1", "agents": []})


def test_deterministic_replay():
    a = run_positioning_hashing(colluder_agents(), 16, 4, 30, 11, adversary="fresh_register")
    b = run_positioning_hashing(colluder_agents(), 16, 4, 30, 11, adversary="fresh_register")
    assert [e.to_json() for e in a.details["events"]] == [e.to_json() for e in b.details["events"]]

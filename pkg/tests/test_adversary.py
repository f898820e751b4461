import dataclasses

import numpy as np
import pytest

from strhc.adversary import (
    ACTUATOR, BOTH, DOS, FDI, SENSOR, STEALTHY, AttackAction, AttackerKnowledge, ScriptError, StealthyAttacker,
    corrupt_actuator, corrupt_sensor, malicious_goal, random_script, stealthy_step, validate_script,
)
from strhc.controller import set_level_index, solve_command
from strhc.geometry import contains
from strhc.model import nominal_successor, output_prediction_set, sample_uniform


def test_actuator_corruption():
    assert corrupt_actuator([1.5], AttackAction(0, 1, ACTUATOR, FDI, (0.0,))) == pytest.approx([1.5])
    assert corrupt_actuator([-4.91], AttackAction(0, 1, ACTUATOR, FDI, (2.0,))) == pytest.approx([-2.91])
    assert corrupt_actuator([1.0], AttackAction(0, 1, ACTUATOR, DOS)) is None


def test_sensor_corruption(rng):
    y = rng.normal(size=2)
    np.testing.assert_array_equal(corrupt_sensor(y, AttackAction(0, 1, SENSOR, FDI, (0.0, 0.0))), y)
    assert corrupt_sensor(y, AttackAction(0, 1, SENSOR, DOS)) is None
    np.testing.assert_allclose(corrupt_sensor(y, AttackAction(0, 1, SENSOR, FDI, (0.5, -1.0))), y + [0.5, -1.0])


def test_both_channel_payload_split():
    a = AttackAction(0, 3, BOTH, FDI, {SENSOR: (0.1, 0.2), ACTUATOR: (1.0,)})
    assert corrupt_actuator([0.0], a) == pytest.approx([1.0])
    assert corrupt_sensor([0.0, 0.0], a) == pytest.approx([0.1, 0.2])
    assert AttackAction.from_dict(a.to_dict()) == a


def test_action_validation():
    with pytest.raises(ScriptError):
        AttackAction(5, 3, SENSOR, DOS)
    with pytest.raises(ScriptError):
        AttackAction(1, 3, SENSOR, STEALTHY)
    with pytest.raises(ScriptError):
        AttackAction(1, 3, "radio", DOS)
    a = AttackAction(3, 5, ACTUATOR, DOS)
    assert a.active(3) and a.active(5) and not a.active(6)
    assert a.hits(ACTUATOR) and not a.hits(SENSOR)


def test_script_spacing_rules():
    ok = [AttackAction(5, 7, ACTUATOR, DOS), AttackAction(7 + 4 + 5 + 2, 20, SENSOR, DOS)]
    assert validate_script(ok, 100, 4, 5) == ok
    with pytest.raises(ScriptError):
        validate_script([AttackAction(4, 7, ACTUATOR, DOS)], 100, 4, 5)
    with pytest.raises(ScriptError):
        validate_script([AttackAction(5, 7, ACTUATOR, DOS), AttackAction(17, 20, SENSOR, DOS)], 100, 4, 5)
    with pytest.raises(ScriptError):
        validate_script([AttackAction(95, 100, ACTUATOR, DOS)], 100, 4, 5)


def test_random_scripts_are_valid(model, rng):
    for _ in range(200):
        script = random_script(rng, 200, model, 4, 5)
        validate_script(script, 200, 4, 5)
        for a in script:
            if a.kind == FDI and a.channel in (ACTUATOR, BOTH):
                assert np.all(np.abs(a.vector(1, ACTUATOR)) <= 5)


# -- stealthy attacker --------------------------------------------------------------
def test_information_wall(family, model, costs):
    know = AttackerKnowledge(model, family, costs)
    names = {f.name for f in dataclasses.fields(know)} | {f.name for f in dataclasses.fields(costs)}
    assert not any("seed" in n or "rng" in n for n in names)
    assert not hasattr(know, "watermark_seed")


def test_emulated_command_matches_assumed_cost(family, model, costs, rng):
    know = AttackerKnowledge(model, family, costs, assumed_cost_index=2)
    for _ in range(20):
        y = sample_uniform(family.T[int(rng.integers(1, family.N + 1))], rng)
        i = set_level_index(family, y)
        if i == 0:
            continue
        np.testing.assert_allclose(know.emulate_command(y), solve_command(family, model, y, i, costs, 2))
    # in the terminal region the emulation follows the assumed terminal law
    y = np.array([0.3, -0.2])
    assert know.emulate_command(y) != pytest.approx(AttackerKnowledge(model, family, costs, 0).emulate_command(y))


def test_malicious_goal_lands_in_terminal_target(family, model, costs, rng):
    know = AttackerKnowledge(model, family, costs)
    for _ in range(30):
        x = sample_uniform(family.T[0], rng)
        u = malicious_goal(know, x)
        assert u is not None
        assert contains(family.eroded[0][0], model.A @ x + model.B @ u, 1e-6)
    assert malicious_goal(know, [-1.27, 2.2]) is None


def test_passive_attacker_forges_the_nominal_prediction(family, model, costs, rng):
    know = AttackerKnowledge(model, family, costs)
    x = sample_uniform(family.T[0], rng)
    out = stealthy_step(know, x, x, goal_weight=0.0)
    assert out.u_attack == pytest.approx([0.0])
    np.testing.assert_allclose(out.y_forgery, nominal_successor(model, x, out.u_hat))
    assert contains(output_prediction_set(model, x, out.u_hat), out.y_forgery)


def test_attacker_without_reachable_goal_stays_silent(family, model, costs):
    att = StealthyAttacker(AttackerKnowledge(model, family, costs))
    y = np.array([-1.27, 2.2])
    assert contains(family.T[-1], y)
    u = att.actuator(np.array([1.0]), y, y)
    assert u == pytest.approx([1.0])
    assert att.sensor(y) is y and not att.engaged


def test_engaged_attacker_keeps_forging(family, model, costs):
    att = StealthyAttacker(AttackerKnowledge(model, family, costs))
    y = np.array([0.05, -0.1])
    att.actuator(np.array([0.0]), y, y)
    assert att.engaged and att.pending_forgery is not None
    far = np.array([-1.27, 2.2])
    att.actuator(np.array([0.0]), far, far)
    assert att.pending_forgery is not None

"""Closed-loop scenario execution and post-run checks."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..adversary import ACTUATOR, SENSOR, STEALTHY, AttackerKnowledge, StealthyAttacker
from ..adversary import corrupt_actuator, corrupt_sensor
from ..controller import ATTACK, NO_ATTACK, ControllerAutomaton, CostFamily, Infeasible, OutOfDomain, controller_step
from ..geometry import TOL, contains
from ..guard import GuardState, actuator_step, detect
from ..model import DisturbanceSampler, output_prediction_set, step
from ..reach import ControllableFamily
from .scenario import Scenario
from .trace import SimTrace, StepRecord

logger = logging.getLogger(__name__)


def seed_streams(scenario: Scenario):
    """Independent generators: (cost draw, cost-index stream) from the watermark seed."""
    cost_ss, index_ss = np.random.SeedSequence(scenario.watermark_seed).spawn(2)
    return cost_ss, index_ss


def build_costs(scenario: Scenario, family: ControllableFamily) -> CostFamily:
    """The defender's cost family.

    Members are drawn in order from one stream, so the first member does not
    depend on ``Nj``: an ``Nj = 1`` defender uses exactly the cost an
    attacker assumes by default.
    """
    cost_ss, _ = seed_streams(scenario)
    return CostFamily.generate(
        scenario.model, family, Nj=scenario.Nj, seed=cost_ss, offset_scale=scenario.cost_offset_scale,
    )


@dataclass(eq=False)
class RunResult:
    trace: SimTrace
    detections: list[int] = field(default_factory=list)
    recoveries: list[int] = field(default_factory=list)
    evicted_at: dict = field(default_factory=dict)  # action index -> step


def run_scenario(
    scenario: Scenario,
    family: ControllableFamily,
    costs: CostFamily | None = None,
    check_start: bool = True,
) -> RunResult:
    """Simulate ``scenario.horizon`` steps.

    Per step: sensor channel, detector, controller automaton, actuator
    channel, actuator firewalls, plant update. A detection evicts every
    attack that has started; after each (re)initialization the channels
    stay clean for ``T_viol`` steps.
    """
    model = scenario.model
    if family.model_hash and family.model_hash != model.fingerprint():
        raise ValueError("the family was synthesized for a different model")
    if check_start:
        scenario.check_start(family)
    costs = costs or build_costs(scenario, family)
    _, index_ss = seed_streams(scenario)
    automaton = ControllerAutomaton.seeded(scenario.T_encry, index_ss)
    dist = DisturbanceSampler(model, scenario.disturbance_seed)
    attackers = {}
    for k, a in enumerate(scenario.attacks):
        if a.kind == STEALTHY:
            p = a.payload or {}
            know = AttackerKnowledge(model, family, costs, int(p.get("assumed_cost_index", 0)))
            attackers[k] = StealthyAttacker(know, float(p.get("goal_weight", 1.0)))

    trace = SimTrace(n=model.n, m=model.m, Ts=model.Ts, p=model.Bd.shape[1])
    result = RunResult(trace)
    guard: GuardState | None = None
    pending = None
    locked_until = 0
    evicted: set[int] = set()
    x = scenario.x0.copy()

    def live(t):
        if t < locked_until:
            return []
        return [(k, a) for k, a in enumerate(scenario.attacks) if a.active(t) and k not in evicted]

    for t in range(scenario.horizon):
        dx, dy = dist.dx(), dist.dy()
        y = x + dy
        reinit_due = automaton.status == ATTACK and automaton.timer >= automaton.T_encry
        acts = [] if reinit_due else live(t)

        y_tilde = y
        for k, a in acts:
            if a.hits(SENSOR):
                y_tilde = attackers[k].sensor(y_tilde) if k in attackers else corrupt_sensor(y_tilde, a)

        verdict = None
        if automaton.status == NO_ATTACK:
            if y_tilde is None:
                verdict = ATTACK
            elif pending is not None:
                verdict = detect(pending, y_tilde)
        if verdict == ATTACK:
            result.detections.append(t)
            for k, a in enumerate(scenario.attacks):
                if a.t_start <= t and k not in evicted:
                    evicted.add(k)
                    result.evicted_at[k] = t

        try:
            out = controller_step(automaton, family, costs, model, verdict, y_tilde)
        except (OutOfDomain, Infeasible) as exc:
            trace.aborted_at, trace.abort_reason = t, f"{type(exc).__name__}: {exc}"
            logger.error("aborted at step %d: %s", t, exc)
            break
        pending = None if out.command is None else output_prediction_set(model, y_tilde, out.command)

        if t == 0 or out.reinitialized:
            if guard is None:
                guard = GuardState(i_hat=out.level, u_prev=np.asarray(out.command, dtype=float))
            guard.reinitialize(out.level, out.command)
            locked_until = t + scenario.T_viol
            if t > 0:
                result.recoveries.append(t)
            acts = []
        else:
            acts = live(t)

        incoming = out.command
        for k, a in acts:
            if a.hits(ACTUATOR):
                if k in attackers:
                    incoming = attackers[k].actuator(incoming, y_tilde, y)
                else:
                    incoming = corrupt_actuator(incoming, a)

        u = actuator_step(guard, family, incoming, y)
        trace.records.append(StepRecord(
            t=t, x=x.copy(), y=np.asarray(y, dtype=float), y_tilde=None if y_tilde is None else np.asarray(y_tilde, dtype=float),
            u_c=None if out.command is None else np.asarray(out.command, dtype=float),
            u_tilde=None if incoming is None else np.asarray(incoming, dtype=float),
            u=u, dx=dx, dy=dy, level=out.level, i_hat=guard.i_hat, j=out.cost_index,
            detector=int(verdict == ATTACK), pre_check=int(guard.last_pre), post_check=int(guard.last_post),
            status=out.status, timer=out.timer, mode=guard.mode,
            attack="+".join(f"{a.kind}@{a.channel}" for _, a in acts),
        ))
        x = step(model, x, u, dx)
    trace.x_final = x
    return result


# -- post-run checks ---------------------------------------------------------------
def theorem1_violations(trace: SimTrace, model, family: ControllableFamily, tol: float = 1e-6) -> list[tuple]:
    """Steps where the state leaves 𝒳 or the rings, or the applied input leaves 𝒰."""
    bad = []
    outer = family.T[family.N]
    for r in trace.records:
        if not contains(model.X, r.x, tol):
            bad.append((r.t, "state outside X"))
        if not contains(outer, r.x, tol):
            bad.append((r.t, "state outside the largest ring"))
        if not contains(model.U, r.u, tol):
            bad.append((r.t, "input outside U"))
    if trace.aborted_at is not None:
        bad.append((trace.aborted_at, trace.abort_reason))
    return bad


def uub_entry(trace: SimTrace, family: ControllableFamily, after: int = 0) -> int | None:
    """First step ``>= after`` from which the state stays in ``T[0]`` to the end of the trace."""
    inside = [contains(family.T[0], r.x, TOL) for r in trace.records]
    entry = None
    for r, ok in zip(trace.records, inside):
        if r.t < after:
            continue
        if ok and entry is None:
            entry = r.t
        elif not ok:
            entry = None
    return entry


def first_flag(trace: SimTrace, start: int, stop: int) -> int | None:
    """First step in ``[start, stop]`` where the detector fired or a firewall failed."""
    for r in trace.records:
        if start <= r.t <= stop and (r.detector or not r.pre_check or not r.post_check):
            return r.t
    return None


def attack_report(result: RunResult, scenario: Scenario) -> list[dict]:
    """Per attack: when it was first flagged and how the actuator responded."""
    recs = {r.t: r for r in result.trace.records}
    out = []
    for k, a in enumerate(scenario.attacks):
        det = next((t for t in result.detections if t >= a.t_start), None)
        rec = next((t for t in result.recoveries if det is not None and t > det), None)
        flag = first_flag(result.trace, a.t_start, a.t_end)
        span = [recs[t] for t in range(a.t_start, (rec or a.t_end) + 1) if t in recs]
        out.append({
            "index": k,
            "kind": a.kind,
            "channel": a.channel,
            "t_start": a.t_start,
            "t_end": a.t_end,
            "detected_at": det,
            "flagged_in_window": flag,
            "recovered_at": rec,
            "pre_check_failed": any(not r.pre_check for r in span),
            "post_check_failed": any(not r.post_check for r in span),
            "held_input_steps": sum(r.mode == "hold_previous" for r in span),
            "zero_input_steps": sum(r.mode == "zero_input" for r in span),
        })
    return out

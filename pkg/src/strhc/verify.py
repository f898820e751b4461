"""Randomized property suites over a synthesized family and a scenario.

Each suite returns a plain dict (JSON-serializable) with at least
``passed`` and the counts it was judged on.
"""
from __future__ import annotations

import hashlib
import tempfile
from pathlib import Path

import numpy as np

from .adversary import STEALTHY, AttackAction, random_script
from .controller import CostFamily, solve_command
from .geometry import contains, support_many
from .model import SystemModel, sample_uniform, step
from .reach import ControllableFamily, hold_matrices
from .sim.runner import attack_report, build_costs, run_scenario, theorem1_violations
from .sim.scenario import Scenario
from .sim.trace import export_trace


def _box(P):
    eye = np.eye(P.dim)
    return -support_many(P, -eye), support_many(P, eye)


def _draw_box(rng, P):
    lo, hi = _box(P)
    return lo + (hi - lo) * rng.random(P.dim)


def _draw_ring_point(rng, family: ControllableFamily, i: int, tries: int = 200):
    """Uniform point of ``T[i]``, preferring the shell ``T[i] minus T[i-1]``."""
    z = None
    for _ in range(tries):
        z = sample_uniform(family.T[i], rng)
        if i == 0 or not contains(family.T[i - 1], z):
            return z
    return z


def prop3_confinement(
    family: ControllableFamily, model: SystemModel, costs: CostFamily,
    n_cases: int = 200, n_disturbances: int = 20, seed: int = 0,
) -> dict:
    """Hold one solved command for ``tau`` steps from random ring points.

    The nominal successor from the measurement must lie in ``T̃_k`` of the
    previous ring at every ``k``; every disturbed state must lie in that ring.
    """
    rng = np.random.default_rng(seed)
    nominal_bad = state_bad = 0
    for _ in range(n_cases):
        i = int(rng.integers(1, family.N + 1))
        x = _draw_ring_point(rng, family, i)
        y = x + _draw_box(rng, model.Dy) if model.Dy.n_constraints else x
        y = y if contains(family.T[i], y) else x
        j = int(rng.integers(costs.Nj))
        u = solve_command(family, model, y, i, costs, j)
        targets = family.eroded[i - 1]
        for k in range(1, family.tau + 1):
            Ak, Bk = hold_matrices(model, k)
            if not contains(targets[k - 1], Ak @ y + Bk @ u, 1e-6):
                nominal_bad += 1
        for _ in range(n_disturbances):
            xk = x.copy()
            for _k in range(family.tau):
                xk = step(model, xk, u, sample_uniform(model.Dx, rng))
                if not contains(family.T[i - 1], xk, 1e-6):
                    state_bad += 1
    return {"suite": "prop3", "cases": n_cases, "nominal_violations": nominal_bad,
            "state_violations": state_bad, "passed": nominal_bad == 0 and state_bad == 0}


def prop4_free_evolution(family: ControllableFamily, model: SystemModel, n_cases: int = 200, seed: int = 0) -> dict:
    """One arbitrary admissible input, then zero input for ``tau - 1`` steps, from ``T[i_max]``."""
    rng = np.random.default_rng(seed)
    target = family.T[family.safe_target()]
    bad = 0
    for _ in range(n_cases):
        x = sample_uniform(family.T[family.i_max], rng)
        u = sample_uniform(model.U, rng)
        x = step(model, x, u, sample_uniform(model.Dx, rng))
        for _k in range(family.tau - 1):
            x = step(model, x, np.zeros(model.m), sample_uniform(model.Dx, rng))
        bad += not contains(target, x, 1e-6)
    return {"suite": "prop4", "cases": n_cases, "i_max": family.i_max, "target_ring": family.safe_target(),
            "violations": bad, "passed": bad == 0}


def _random_start(rng, scenario: Scenario, family: ControllableFamily, region: str | None = None):
    """Uniform start in the scenario's start region, or in ``region`` ("safe"/"domain") when given."""
    if region is not None:
        scenario = scenario.with_overrides(start_region=region)
    return sample_uniform(family.T[scenario.start_index(family)], rng)


def soundness(scenario: Scenario, family: ControllableFamily, runs: int = 100, steps: int = 300, seed: int = 0) -> dict:
    """Attack-free runs with random starts and disturbance seeds; any alarm is a false alarm."""
    rng = np.random.default_rng(seed)
    costs = build_costs(scenario, family)
    alarms = aborts = 0
    for r in range(runs):
        sc = scenario.with_overrides(
            x0=_random_start(rng, scenario, family), attacks=[], horizon=steps,
            disturbance_seed=int(rng.integers(2**31)), watermark_seed=scenario.watermark_seed,
        )
        res = run_scenario(sc, family, costs)
        aborts += res.trace.aborted_at is not None
        alarms += sum(rec.detector + (1 - rec.pre_check) + (1 - rec.post_check) for rec in res.trace.records)
    return {"suite": "soundness", "runs": runs, "steps": steps, "alarms": alarms, "aborts": aborts,
            "passed": alarms == 0 and aborts == 0}


def watermark(
    scenario: Scenario, family: ControllableFamily, runs: int = 200, Nj: int = 4,
    window: int = 20, seed: int = 0,
) -> dict:
    """Stealthy-attack runs; a run counts as detected when a flag is raised inside the attack window."""
    rng = np.random.default_rng(seed)
    detected, latencies, aborts = 0, [], 0
    for _ in range(runs):
        onset = int(rng.integers(scenario.T_viol + family.safe_target(), 60))
        act = AttackAction(onset, onset + window - 1, "both", STEALTHY, {"goal_weight": 1.0})
        sc = scenario.with_overrides(
            x0=_random_start(rng, scenario, family, "safe"), attacks=[act], horizon=onset + window + 10, Nj=Nj,
            start_region="safe",
            disturbance_seed=int(rng.integers(2**31)), watermark_seed=int(rng.integers(2**31)),
        )
        res = run_scenario(sc, family)
        aborts += res.trace.aborted_at is not None
        flag = attack_report(res, sc)[0]["flagged_in_window"]
        if flag is not None:
            detected += 1
            latencies.append(flag - onset)
    rate = detected / runs if runs else 0.0
    return {"suite": "watermark", "Nj": Nj, "runs": runs, "detected": detected, "rate": rate,
            "max_latency": max(latencies) if latencies else None,
            "mean_latency": float(np.mean(latencies)) if latencies else None, "aborts": aborts,
            "passed": (rate >= 0.95) if Nj > 1 else (detected == 0)}


def fuzz(
    scenario: Scenario, family: ControllableFamily, runs: int = 500, horizon: int = 200, seed: int = 0,
    start_region: str = "safe",
) -> dict:
    """Random valid attack scripts; no constraint violation, domain exit or abort is tolerated.

    Starts are drawn from ``start_region`` ("safe" by default, where the
    guarantees apply).
    """
    rng = np.random.default_rng(seed)
    costs = build_costs(scenario, family)
    failures = []
    for r in range(runs):
        script = random_script(rng, horizon, scenario.model, scenario.T_encry, scenario.T_viol)
        sc = scenario.with_overrides(
            x0=_random_start(rng, scenario, family, start_region), attacks=script, horizon=horizon,
            disturbance_seed=int(rng.integers(2**31)), start_region=start_region,
        )
        res = run_scenario(sc, family, costs)
        bad = theorem1_violations(res.trace, sc.model, family)
        if bad:
            failures.append({"run": r, "x0": sc.x0.tolist(), "first": [bad[0][0], bad[0][1]],
                             "script": [a.to_dict() for a in script]})
    return {"suite": "fuzz", "start_region": start_region, "runs": runs, "failed_runs": len(failures), "failures": failures[:5],
            "passed": not failures}


def determinism(scenario: Scenario, family: ControllableFamily, repeats: int = 2) -> dict:
    """Run the same scenario repeatedly and compare CSV digests."""
    digests = []
    with tempfile.TemporaryDirectory() as d:
        for k in range(repeats):
            res = run_scenario(scenario, family)
            p = export_trace(res.trace, Path(d) / f"trace{k}.csv")
            digests.append(hashlib.sha256(p.read_bytes()).hexdigest())
    return {"suite": "determinism", "repeats": repeats, "digests": digests, "passed": len(set(digests)) == 1}


SUITES = ("prop3", "prop4", "soundness", "watermark", "fuzz", "determinism")


def run_suite(name: str, scenario: Scenario, family: ControllableFamily, runs: int | None = None, seed: int = 0) -> dict:
    kw = {} if runs is None else {"runs": runs}
    if name == "prop3":
        return prop3_confinement(family, scenario.model, build_costs(scenario, family),
                                 **({"n_cases": runs} if runs else {}), seed=seed)
    if name == "prop4":
        return prop4_free_evolution(family, scenario.model, **({"n_cases": runs} if runs else {}), seed=seed)
    if name == "soundness":
        return soundness(scenario, family, seed=seed, **kw)
    if name == "watermark":
        on = watermark(scenario, family, Nj=4, seed=seed, **kw)
        off = watermark(scenario, family, Nj=1, seed=seed, **kw)
        return {"suite": "watermark", "Nj4": on, "Nj1": off, "passed": on["passed"] and off["passed"]}
    if name == "fuzz":
        return fuzz(scenario, family, seed=seed, **kw)
    if name == "determinism":
        return determinism(scenario, family)
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")

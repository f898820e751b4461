"""Acceptance suite: one test per numbered criterion, each recording a PASS/FAIL line.

The lines are printed at the end of the pytest run (and immediately with ``-s``).
"""
import hashlib
import subprocess
import sys
import time

import numpy as np
import pytest

from strhc.geometry import Polytope, contains, minkowski_sum, pontryagin_diff, project
from strhc.sim import attack_report, bundled_scenario, run_scenario, theorem1_violations, uub_entry
from strhc.verify import fuzz, prop3_confinement, prop4_free_evolution, soundness, watermark

from .conftest import ACCEPTANCE
from .oracles import diff_margin, disagreements, grid, poly_margin, random_shape, sum_margin

X0_BENCHMARK = np.array([-1.09, 5.11])


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def fresh():
    """Synthesize the bundled configuration from scratch (no cache) and time it."""
    sc = bundled_scenario()
    t0 = time.perf_counter()
    fam = sc.synth.run(sc.model)
    fam.key = sc.synth.key(sc.model)
    return sc, fam, time.perf_counter() - t0


def test_criterion_1_geometry_oracle():
    rng = np.random.default_rng(2024)
    bad = {"sum": 0, "diff": 0, "project": 0}
    t0 = time.perf_counter()
    for _ in range(500):
        P, VP = random_shape(rng)
        Q, VQ = random_shape(rng, 0.4)
        allv = np.vstack([VP, (VP[:, None] + VQ[None]).reshape(-1, 2)])
        Z = grid(allv.min(0) - 0.2, allv.max(0) + 0.2, 100)
        oracle_sum = sum_margin(VP, VQ, Z)
        bad["sum"] += disagreements(poly_margin(minkowski_sum(P, Q), Z), oracle_sum)
        D = pontryagin_diff(P, Q)
        got = np.full(len(Z), -np.inf) if D.is_empty else poly_margin(D, Z)
        bad["diff"] += disagreements(got, diff_margin(VP, VQ, Z))
        # {(z, p) : p ∈ P, z - p ∈ Q} projected onto z is P ⊕ Q
        lifted = Polytope(
            np.vstack([np.hstack([np.zeros((P.n_constraints, 2)), P.A]), np.hstack([Q.A, -Q.A])]),
            np.concatenate([P.b, Q.b]),
        )
        bad["project"] += disagreements(poly_margin(project(lifted, [0, 1]), Z), oracle_sum)
    dt = time.perf_counter() - t0
    record(1, sum(bad.values()) == 0 and dt < 60,
           f"500 pairs x 10^4 grid points, disagreements {bad}, {dt:.1f} s (limit 60 s)")


def test_criterion_2_family_synthesis(fresh):
    sc, fam, dt = fresh
    nonempty = sum(not P.is_empty for P in fam.T) - 1
    nested = fam.check_nesting()
    x0_level = fam.level_of(X0_BENCHMARK)
    ratio = fam.i_max / fam.N
    ok = nonempty >= 45 and nested and x0_level is not None and fam.i_max >= 0.6 * fam.N and dt < 300
    record(2, ok,
           f"{nonempty} nonempty rings, nested={nested}, x(0)=[-1.09, 5.11] in ring {x0_level}, "
           f"i_max={fam.i_max} (i_max/N={ratio:.2f}, need >= 0.6), {dt:.0f} s (limit 300 s)")


def test_criterion_3_prop3(scenario, family, costs):
    res = prop3_confinement(family, scenario.model, costs, n_cases=200, n_disturbances=20, seed=3)
    record(3, res["passed"],
           f"200 cases: nominal violations {res['nominal_violations']}, disturbed-state violations {res['state_violations']}")


def test_criterion_4_prop4(scenario, family):
    res = prop4_free_evolution(family, scenario.model, n_cases=200, seed=4)
    record(4, res["passed"],
           f"200 starts in T^{res['i_max']}: {res['violations']} end outside T^{res['target_ring']}")


def test_criterion_5_soundness(scenario, family):
    res = soundness(scenario, family, runs=100, steps=300, seed=5)
    record(5, res["passed"], f"100 attack-free runs x 300 steps: {res['alarms']} alarms, {res['aborts']} aborts")


def test_criterion_6_scenario(scenario, family):
    t0 = time.perf_counter()
    res = run_scenario(scenario, family)
    off = run_scenario(scenario.with_overrides(Nj=1), family)
    dt = time.perf_counter() - t0
    rep = attack_report(res, scenario)
    a1, a2, a3, a4 = rep
    s4 = scenario.attacks[3]
    off4 = attack_report(off, scenario.with_overrides(Nj=1))[3]
    checks = {
        "a: attack 1 detected one step after onset, held input":
            a1["detected_at"] == a1["t_start"] + 1 and a1["held_input_steps"] > 0,
        "b: attack 2 detected, held input": a2["detected_at"] is not None and a2["held_input_steps"] > 0,
        "c: attack 3 passes pre-check, fails post-check, zero input":
            not a3["pre_check_failed"] and a3["post_check_failed"] and a3["zero_input_steps"] > 0,
        "d: stealthy flagged after >=1 silent step, within window (Nj=4)":
            a4["flagged_in_window"] is not None and s4.t_start < a4["flagged_in_window"] <= s4.t_end,
        "d: stealthy never flagged in window (Nj=1)": off4["flagged_in_window"] is None,
        "no Theorem-1 violation":
            not theorem1_violations(res.trace, scenario.model, family)
            and not theorem1_violations(off.trace, scenario.model, family),
        "enters T0 after last recovery": uub_entry(res.trace, family, after=max(res.recoveries)) is not None,
        "runtime < 30 s": dt < 30,
    }
    failed = [k for k, v in checks.items() if not v]
    record(6, not failed,
           f"detections at {res.detections}, stealthy flagged at {a4['flagged_in_window']} "
           f"(Nj=1: {off4['flagged_in_window']}), {dt:.1f} s" + (f"; failed: {failed}" if failed else ""))


def test_criterion_7_watermark(scenario, family):
    on = watermark(scenario, family, runs=200, Nj=4, seed=7)
    off = watermark(scenario, family, runs=200, Nj=1, seed=7)
    record(7, on["rate"] >= 0.95 and off["rate"] == 0.0,
           f"Nj=4 detection rate {on['rate']:.3f} (max latency {on['max_latency']} steps), Nj=1 rate {off['rate']:.3f}")


def test_criterion_8_fuzz(scenario, family):
    t0 = time.perf_counter()
    res = fuzz(scenario, family, runs=500, horizon=200, seed=8)
    dt = time.perf_counter() - t0
    record(8, res["passed"] and dt < 600, f"500 random scripts: {res['failed_runs']} failing runs, {dt:.0f} s (limit 600 s)")


def test_criterion_9_determinism(tmp_path):
    def digest(out):
        return hashlib.sha256((out / "trace.csv").read_bytes()).hexdigest()

    cmd = [sys.executable, "-m", "strhc.cli", "run", "--no-plots", "--out"]
    procs = [subprocess.Popen(cmd + [str(tmp_path / f"r{k}")], stdout=subprocess.DEVNULL) for k in range(3)]
    codes = [p.wait() for p in procs]
    subprocess.run(cmd + [str(tmp_path / "r3")], stdout=subprocess.DEVNULL, check=True)
    digests = {digest(tmp_path / f"r{k}") for k in range(4)}
    record(9, codes == [0, 0, 0] and len(digests) == 1,
           f"4 runs (3 concurrent): {len(digests)} distinct trace digest(s)")

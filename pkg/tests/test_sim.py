import numpy as np
import pytest

from strhc.adversary import ACTUATOR, DOS, AttackAction
from strhc.controller import ATTACK
from strhc.geometry import contains
from strhc.model import model_from_dict, sample_uniform
from strhc.sim import (
    Scenario, ScenarioError, SynthConfig, attack_report, export_trace, load_or_synthesize, read_trace,
    run_scenario, theorem1_violations, uub_entry,
)
from strhc.sim.plots import emit_plots, ring_outlines


@pytest.fixture(scope="module")
def bundled_run(scenario, family):
    return run_scenario(scenario, family)


# -- scenario -------------------------------------------------------------------
def test_bundled_scenario_fields(scenario):
    assert scenario.T_encry == 4 and scenario.T_viol == 5 and scenario.Nj == 4
    assert [a.kind for a in scenario.attacks] == ["dos", "dos", "fdi_additive", "stealthy"]
    assert scenario.model.Ts == pytest.approx(0.02)


def test_scenario_validation(scenario):
    with pytest.raises(ScenarioError):
        scenario.with_overrides(T_viol=3)
    with pytest.raises(ScenarioError):
        scenario.with_overrides(start_region="anywhere")
    with pytest.raises(ValueError):
        scenario.with_overrides(attacks=[AttackAction(2, 3, ACTUATOR, DOS)])


def test_start_region_is_enforced(scenario, family):
    with pytest.raises(ScenarioError):
        run_scenario(scenario.with_overrides(x0=[2.4, 9.5]), family)
    safe = scenario.with_overrides(start_region="safe")
    assert safe.start_index(family) == family.safe_target()
    with pytest.raises(ScenarioError):
        safe.check_start(family)


def test_cache_lookup_by_key(scenario, family, tmp_path):
    p = tmp_path / "fam.json"
    family.save(p)
    again = load_or_synthesize(scenario.model, scenario.synth, p)
    assert again.key == family.key and again.N == family.N


# -- runner ---------------------------------------------------------------------
def test_horizon_zero_gives_empty_trace(scenario, family, tmp_path):
    res = run_scenario(scenario.with_overrides(horizon=0, attacks=[]), family)
    assert len(res.trace) == 0
    p = export_trace(res.trace, tmp_path / "t.csv")
    lines = p.read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("t,time_s,x1,x2")


def test_disturbance_free_convergence():
    m = model_from_dict({
        "A": [[1.02, 0.08], [0.016, 1.01]], "B": [[0], [0.02]], "Bd": [[0.02], [0.02]], "Ts": 0.02,
        "constraints": {"x": {"bound": [2.5, 10]}, "u": {"bound": [5]}},
        "disturbances": {"dx": {"point": [0.0]}, "dy": {"point": [0.0, 0.0]}},
    })
    cfg = SynthConfig(tau=4, N=2, T_viol=5, Q=((10, 0), (0, 10)), R=((1,),), rpi_region={"bound": [0.5, 2.0]})
    fam = load_or_synthesize(m, cfg)
    x0 = sample_uniform(fam.T[0], np.random.default_rng(0))
    sc = Scenario(m, cfg, x0, 200, 4, 5, start_region="domain")
    res = run_scenario(sc, fam)
    assert np.linalg.norm(res.trace.x_final) < 1e-3
    assert not theorem1_violations(res.trace, m, fam)


def test_bundled_run_events(bundled_run, scenario, family):
    rep = attack_report(bundled_run, scenario)
    assert all(r["detected_at"] is not None for r in rep)
    assert not theorem1_violations(bundled_run.trace, scenario.model, family)
    assert uub_entry(bundled_run.trace, family, after=max(bundled_run.recoveries)) is not None


def test_silence_after_each_detection(bundled_run, scenario):
    recs = bundled_run.trace.records
    for t in bundled_run.detections:
        silent = [r for r in recs if t < r.t <= t + scenario.T_encry]
        assert all(r.u_c is None and r.status == ATTACK for r in silent)
        assert recs[t + scenario.T_encry + 1].u_c is not None
        assert t + scenario.T_encry + 1 in bundled_run.recoveries


def test_level_compatibility(scenario, family):
    res = run_scenario(scenario.with_overrides(attacks=[]), family)
    recs = res.trace.records
    for prev, cur in zip(recs, recs[1:]):
        assert prev.i_hat >= cur.level


def test_applied_inputs_and_states_admissible(bundled_run, scenario):
    for r in bundled_run.trace.records:
        assert contains(scenario.model.U, r.u)
        assert contains(scenario.model.X, r.x)


def test_determinism(scenario, family, tmp_path):
    a = export_trace(run_scenario(scenario, family).trace, tmp_path / "a.csv")
    b = export_trace(run_scenario(scenario, family).trace, tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


# -- trace and plots ----------------------------------------------------------------
def test_csv_round_trip(bundled_run, tmp_path):
    trace = bundled_run.trace
    rows = read_trace(export_trace(trace, tmp_path / "trace.csv"))
    assert len(rows) == len(trace)
    for rec, row in zip(trace.records[::17], rows[::17]):
        assert row["t"] == rec.t
        assert row["x1"] == pytest.approx(rec.x[0], rel=1e-11, abs=1e-300)
        assert row["u1"] == pytest.approx(rec.u[0], rel=1e-11, abs=1e-300)
        assert row["level"] == rec.level and row["i_hat"] == rec.i_hat and row["mode"] == rec.mode
        assert (row["u_c1"] is None) == (rec.u_c is None)
    assert list(rows[0]) == trace.header()


def test_plots(bundled_run, family, tmp_path):
    assert len(ring_outlines(family)) == family.N + 1
    paths = emit_plots(bundled_run.trace, family, tmp_path)
    assert {p.name for p in paths} == {"rings.svg", "inputs.svg", "levels.svg", "flags.svg"}
    assert all(p.stat().st_size > 1000 for p in paths)

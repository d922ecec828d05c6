import json
import math
import os
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htsim.architectures import TAGS, make_architecture
from htsim.errors import ConfigError, UndefinedLagError
from htsim.harness import (InputSpec, Jitter, ScenarioConfig, Trajectory,
                           contact_oscillation, fmt, load_config, metrics, plateau_windows,
                           read_schedule, run_scenario, simulate, sweep, sweep_csv, write_meta)
from htsim.plant import Surface

STEP = InputSpec(kind="step", offset_m=0.005, amplitude_m=-0.015)


def _cfg(tag="FPPF", **kw):
    kw.setdefault("input", STEP)
    kw.setdefault("duration_s", 6.0)
    return ScenarioConfig(architecture=make_architecture(tag), **kw)


def _traj(x_o, x_f, dt=1e-3, f_h=None, f_f=None, x_star=None):
    n = len(x_o)
    d = np.zeros((n, 9))
    d[:, 0] = np.arange(n) * dt
    d[:, 1] = x_o if x_star is None else x_star
    d[:, 2] = x_o
    d[:, 6] = x_f
    if f_h is not None:
        d[:, 4] = f_h
    if f_f is not None:
        d[:, 8] = f_f
    return Trajectory(d)


# ------------------------------------------------------------------ config

def test_config_round_trip(tmp_path):
    cfg = _cfg(delay_ms=250.0, jitter=Jitter(40.0, 10.0, 3))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    again = load_config(path)
    assert again.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("bad", [
    {"unknown": 1},
    {"architecture": {"tag": "FPPF", "gain": {}}},
    {"architecture": {"tag": "FP", "gains": {"k_ff": 0.1}}},
    {"params": {"k_x": 1}},
    {"surface": {"x0": 0.0}},
    {"input": {"kind": "square"}},
    {"input": {"kind": "step", "amp": 1}},
    {"jitter": {"mean_ms": 10, "std_ms": 1}},
    {"delay_ms": -5},
    {"duration_s": 0},
    {"dt_ms": "fast"},
    {"input": {"kind": "steps"}},
])
def test_config_rejections(bad, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_io_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_stiffness_in_n_per_mm(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"surface": {"stiffness_n_per_mm": 0.4}}))
    cfg = load_config(p)
    assert cfg.params.k_p == pytest.approx(400.0) and cfg.surface.k_p == pytest.approx(400.0)


# ------------------------------------------------------------------ inputs

def test_input_kinds(tmp_path):
    t = np.linspace(0, 10, 10001)
    step = STEP.evaluate(t)
    assert step[0] == pytest.approx(0.005) and step[-1] == pytest.approx(-0.010)
    assert np.all(np.diff(step) <= 1e-15)  # monotone smooth ramp
    steps = InputSpec(kind="steps", levels=(0.0, 0.01, -0.01), period_s=3.0).evaluate(t)
    assert steps[2000] == 0.0 and steps[5000] == pytest.approx(0.01) and steps[-1] == -0.01
    ms = InputSpec(kind="multisine", amplitude_m=0.01, freqs_hz=(0.1, 0.3, 0.7)).evaluate(t)
    assert np.max(np.abs(ms)) <= 0.01 + 1e-12
    csv_path = tmp_path / "in.csv"
    csv_path.write_text("t,x_o_star\n0,0\n1,0.01\n")
    c = InputSpec(kind="csv", path=str(csv_path)).evaluate(np.array([0.0, 0.5, 2.0]))
    assert c == pytest.approx([0.0, 0.005, 0.01])


# ------------------------------------------------------------------ simulation

def test_csv_header_and_precision(tmp_path):
    res = run_scenario(_cfg(duration_s=1.0))
    text = res.trajectory.to_csv(tmp_path / "r.csv")
    lines = text.splitlines()
    assert lines[0] == "t,x_o_star,x_o,v_o,f_h,x_v,x_f,v_f,f_f"
    assert len(lines) == 1002
    back = Trajectory.from_csv(tmp_path / "r.csv")
    assert np.allclose(back.data, res.trajectory.data, rtol=1e-8, atol=1e-300)
    assert fmt(1 / 3) == "0.333333333" and fmt(0.0) == "0" and fmt(True) == "1"


def test_zero_input_stays_at_rest():
    cfg = _cfg(input=InputSpec(kind="step", amplitude_m=0.0, offset_m=0.02),
               surface=Surface(x0=0.0))
    traj, diverged = simulate(cfg)
    assert not diverged
    assert np.all(traj.data[:, 2:] == traj.data[0, 2:])


@pytest.mark.parametrize("tag", TAGS)
def test_zero_delay_path_equals_direct_coupling(tag):
    cfg = _cfg(tag, duration_s=3.0)
    a, _ = simulate(cfg)
    b, _ = simulate(cfg, bypass_delay=True)
    assert np.array_equal(a.data, b.data)


def test_determinism_with_jitter():
    cfg = _cfg(delay_ms=100.0, jitter=Jitter(40.0, 20.0, 5))
    assert run_scenario(cfg).trajectory.to_csv() == run_scenario(cfg).trajectory.to_csv()
    other = replace(cfg, jitter=Jitter(40.0, 20.0, 6))
    assert run_scenario(other).trajectory.to_csv() != run_scenario(cfg).trajectory.to_csv()


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 500), st.floats(0, 300), st.floats(0, 300), st.integers(0, 2 ** 31))
def test_jittered_reads_are_causal_and_monotone(delay, mean, std, seed):
    cfg = _cfg(delay_ms=delay, jitter=Jitter(mean, std, seed), duration_s=0.5)
    n = 500
    k = np.arange(n + 1)
    for r in read_schedule(cfg, n):
        assert np.all(r <= k)
        assert np.all(np.diff(r) >= 0)


@pytest.mark.parametrize("tag", TAGS)
def test_haptic_force_saturates_on_every_row(tag):
    cfg = ScenarioConfig(architecture=make_architecture(tag, f_sat=0.5),
                         input=InputSpec(kind="step", offset_m=0.02, amplitude_m=-0.06),
                         surface=Surface(x0=0.0), duration_s=4.0, delay_ms=100.0)
    traj, _ = simulate(cfg)
    assert np.max(np.abs(traj.f_h)) <= 0.5


def test_divergence_is_flagged_and_truncated():
    # strong force loop, no saturation or clamp, long delay
    arch = make_architecture("FPPF", {"k_ff": 1.0, "k_fo": 20.0}, f_sat=math.inf, d_max=1e9)
    cfg = ScenarioConfig(architecture=arch, input=STEP, duration_s=30.0, delay_ms=300.0)
    res = run_scenario(cfg)
    assert res.diverged
    assert len(res.trajectory) < 30001
    assert np.all(np.isfinite(res.trajectory.data))


def test_virtual_tool_is_clamped_near_operator():
    cfg = _cfg(delay_ms=0.0, duration_s=4.0)
    traj, _ = simulate(cfg)
    assert np.max(np.abs(traj.x_v - traj.x_o)) <= 0.03 + 0.01


# ------------------------------------------------------------------ metrics

def test_metrics_of_perfect_tracking():
    t = np.arange(6000) * 1e-3
    x = 0.01 * np.sin(2 * np.pi * 0.5 * t)
    m = metrics(_traj(x, x), steady_window_s=1.0, max_lag_s=1.0)
    assert m.e_p == 0.0 and m.tau == 0.0


def test_metrics_of_constructed_shift():
    t = np.arange(8000) * 1e-3
    x = 0.01 * np.sin(2 * np.pi * 0.3 * t) + 0.004 * np.sin(2 * np.pi * 0.71 * t)
    xf = np.concatenate([np.full(250, x[0]), x[:-250]])
    m = metrics(_traj(x, xf), steady_window_s=1.0, max_lag_s=1.0)
    assert m.tau == pytest.approx(250.0, abs=1.0)


def test_metrics_of_constant_offset():
    x = np.concatenate([np.zeros(3000), np.full(3000, 0.01)])
    m = metrics(_traj(x, x + 0.003, f_h=np.ones(6000), f_f=np.full(6000, 0.75)),
                steady_window_s=1.0, max_lag_s=1.0)
    assert m.e_p == pytest.approx(3.0) and m.e_pss == pytest.approx(3.0)
    assert m.e_f == pytest.approx(0.25) and m.e_fss == pytest.approx(0.25)


def test_constant_trajectory_has_no_lag():
    x = np.zeros(3000)
    with pytest.raises(UndefinedLagError):
        metrics(_traj(x, x), steady_window_s=1.0, max_lag_s=0.5)
    cfg = _cfg(input=InputSpec(kind="step", amplitude_m=0.0, offset_m=0.02), duration_s=3.0)
    assert math.isnan(run_scenario(cfg).metrics.tau)


def test_plateaus_use_final_second():
    # 3 s at 0, ramp, 1.5 s at 1 (too short), 2.5 s at 2
    x = np.concatenate([np.zeros(3000), np.linspace(0.01, 1, 100), np.ones(1500),
                        np.full(2500, 2.0)])
    assert plateau_windows(x, 1e-3, 1.0) == [(2000, 3000), (6100, 7100)]


def test_contact_oscillation_of_pure_sine():
    t = np.arange(10000) * 1e-3
    f = 1.0 + 0.1 * np.sin(2 * np.pi * 10 * t)
    d = np.zeros((10000, 9))
    d[:, 0] = t
    d[:, 6] = -0.01
    d[:, 8] = f
    amp = contact_oscillation(Trajectory(d), Surface(x0=0.0))
    assert amp == pytest.approx(0.1 / math.sqrt(2), rel=0.02)
    d[:, 6] = 0.01
    assert contact_oscillation(Trajectory(d), Surface(x0=0.0)) == 0.0


def test_free_space_step_reaches_target():
    cfg = _cfg(input=InputSpec(kind="step", amplitude_m=0.02), surface=Surface(x0=-1.0),
               duration_s=10.0)
    res = run_scenario(cfg)
    assert res.metrics.e_pss <= 1.0


# ------------------------------------------------------------------ sweeps

def test_single_value_sweep_matches_run():
    cfg = _cfg(delay_ms=50.0, duration_s=3.0)
    rows = sweep(cfg, "delay", [50.0])
    direct = run_scenario(cfg)
    assert np.array_equal(rows[0].result.trajectory.data, direct.trajectory.data)


def test_mesh_delay_sweep_never_diverges():
    rows = sweep(_cfg("MFP", duration_s=8.0), "delay", [0, 50, 250, 500, 1000])
    assert len(rows) == 5 and not any(r.result.diverged for r in rows)


def test_sweep_records_errors_and_writes_csv(tmp_path):
    rows = sweep(_cfg(duration_s=3.0), "architecture", ["FPPF", "NOPE"])
    assert rows[1].result is None and "ConfigError" in rows[1].error
    text = sweep_csv(rows, tmp_path / "s.csv")
    assert text.splitlines()[0].startswith("axis,value,e_p_mm")
    assert len(text.splitlines()) == 3
    with pytest.raises(ConfigError):
        sweep(_cfg(), "mass", [1])
    with pytest.raises(ConfigError):
        sweep(_cfg(), "delay", [])


def test_meta_sidecar(tmp_path):
    meta = write_meta(tmp_path / "run.csv", {"a": np.float64(1.5), "b": np.arange(2)})
    assert meta.name == "run.meta.json"
    assert json.loads(meta.read_text()) == {"a": 1.5, "b": [0, 1]}


def test_fallback_kernels_match_compiled(tmp_path):
    script = (
        "import sys, numpy as np\n"
        "from htsim.harness import ScenarioConfig, InputSpec, Jitter, simulate\n"
        "from htsim.architectures import make_architecture\n"
        "from htsim.numerics import eigenvalues\n"
        "cfg = ScenarioConfig(architecture=make_architecture('FPPF', force_lowpass=0.1),\n"
        "    input=InputSpec(kind='step', offset_m=0.005, amplitude_m=-0.015),\n"
        "    duration_s=3.0, delay_ms=120.0, jitter=Jitter(30.0, 10.0, 1))\n"
        "tr, _ = simulate(cfg)\n"
        "np.save(sys.argv[1], tr.data)\n"
        "np.save(sys.argv[2], np.sort_complex(eigenvalues(np.arange(25.0).reshape(5, 5) ** 0.5)))\n"
    )
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, HTSIM_DISABLE_NUMBA=flag)
        a, b = tmp_path / f"t{flag}.npy", tmp_path / f"e{flag}.npy"
        subprocess.run([sys.executable, "-c", script, str(a), str(b)], env=env, check=True)
        out[flag] = (np.load(a), np.load(b))
    assert np.allclose(out["0"][0], out["1"][0], rtol=1e-12, atol=1e-15)
    assert np.allclose(out["0"][1], out["1"][1], rtol=1e-12)


def _contact_osc(tag, k, tau):
    cfg = ScenarioConfig.from_dict({
        "architecture": {"tag": tag, "force_lowpass_tau_s": tau},
        "surface": {"stiffness_n_per_mm": k},
        "input": {"kind": "step", "offset_m": 0.005, "amplitude_m": -0.015},
        "duration_s": 20.0})
    return run_scenario(cfg).contact_oscillation


def test_fppf_contact_oscillation_trends():
    # three-channel coupling: stiffer surface rings more, the 0.1 s filter calms it
    raw = [_contact_osc("FPPF", k, None) for k in (0.2, 0.4, 0.8)]
    filt = [_contact_osc("FPPF", k, 0.1) for k in (0.2, 0.4, 0.8)]
    assert raw[0] < raw[1] < raw[2]
    assert filt[0] < filt[1] < filt[2]
    assert all(f < r for f, r in zip(filt, raw))

"""Scenario configuration, closed-loop simulation, metrics, sweeps and file I/O."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .architectures import Architecture, make_architecture
from .errors import ConfigError, UndefinedLagError
from .numerics import xcorr_lag
from .plant import N_PER_MM, ParameterSet, Surface, operator_equilibrium

TRAJECTORY_COLUMNS = ("t", "x_o_star", "x_o", "v_o", "f_h", "x_v", "x_f", "v_f", "f_f")
METRIC_COLUMNS = ("e_p_mm", "e_pss_mm", "e_f_n", "e_fss_n", "tau_ms", "contact_osc_n",
                  "diverged")
INPUT_KINDS = ("step", "steps", "ramp", "sine", "multisine", "csv")


def fmt(x):
    """Nine significant digits, stable across platforms."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"
    return f"{x:.9g}"


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {where} field(s): {', '.join(unknown)}")


def _num(d, key, default, where, positive=False, nonneg=False):
    v = d.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key} must be a finite number")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key} must be > 0")
    if nonneg and v < 0:
        raise ConfigError(f"{where}.{key} must be >= 0")
    return float(v)


# ------------------------------------------------------------------ inputs

def _raised_cosine(u):
    u = np.clip(u, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * u)


@dataclass(frozen=True)
class InputSpec:
    """Operator target x_o*(t).

    ``step``: offset, then offset+amplitude reached by a raised-cosine ramp of
    ``ramp_s`` starting at ``t0_s``.  ``steps``: piecewise-constant ``levels``
    (m), one every ``period_s``, joined by the same ramp.  ``ramp``: slope
    ``amplitude_m`` per second after ``t0_s``.  ``sine``: amplitude * sin at
    ``freqs_hz[0]``.  ``multisine``: Schroeder-phased sum over ``freqs_hz``
    scaled to peak ``amplitude_m``.  ``csv``: columns t, x_o_star (linear
    interpolation, held at the ends).
    """

    kind: str = "step"
    amplitude_m: float = 0.0
    offset_m: float = 0.0
    t0_s: float = 0.5
    ramp_s: float = 0.05
    period_s: float = 3.0
    freqs_hz: tuple = (0.2,)
    levels: tuple = ()
    path: Optional[str] = None

    FIELDS = ("kind", "amplitude_m", "offset_m", "t0_s", "ramp_s", "period_s", "freqs_hz",
              "levels", "path")

    @classmethod
    def from_dict(cls, d):
        _reject_unknown(d, cls.FIELDS, "input")
        kind = d.get("kind", "step")
        if kind not in INPUT_KINDS:
            raise ConfigError(f"input.kind must be one of {INPUT_KINDS}")
        kw = dict(kind=kind)
        for key in ("amplitude_m", "offset_m", "t0_s"):
            if key in d:
                kw[key] = _num(d, key, 0.0, "input")
        if "ramp_s" in d:
            kw["ramp_s"] = _num(d, "ramp_s", 0.05, "input", nonneg=True)
        if "period_s" in d:
            kw["period_s"] = _num(d, "period_s", 3.0, "input", positive=True)
        for key in ("freqs_hz", "levels"):
            if key in d:
                v = d[key]
                if not isinstance(v, list) or not all(
                        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
                    raise ConfigError(f"input.{key} must be a list of numbers")
                kw[key] = tuple(float(x) for x in v)
        if d.get("path") is not None:
            kw["path"] = str(d["path"])
        spec = cls(**kw)
        if kind == "csv" and not spec.path:
            raise ConfigError("input.path is required for kind 'csv'")
        if kind == "steps" and not spec.levels:
            raise ConfigError("input.levels is required for kind 'steps'")
        if kind in ("sine", "multisine") and (not spec.freqs_hz or min(spec.freqs_hz) <= 0):
            raise ConfigError("input.freqs_hz must list positive frequencies")
        return spec

    def to_dict(self):
        return {k: (list(getattr(self, k)) if isinstance(getattr(self, k), tuple)
                    else getattr(self, k)) for k in self.FIELDS}

    @property
    def scale(self):
        """Characteristic magnitude used by the divergence test."""
        if self.kind == "steps":
            return max([abs(x) for x in self.levels] + [abs(self.offset_m)])
        if self.kind == "csv":
            return abs(self.offset_m)
        return max(abs(self.amplitude_m), abs(self.offset_m))

    def evaluate(self, t, base_dir=None):
        t = np.asarray(t, dtype=float)
        k = self.kind
        if k == "step":
            if self.ramp_s > 0:
                shape = _raised_cosine((t - self.t0_s) / self.ramp_s)
            else:
                shape = (t >= self.t0_s).astype(float)
            return self.offset_m + self.amplitude_m * shape
        if k == "steps":
            out = np.full_like(t, self.levels[0] + self.offset_m)
            for i in range(1, len(self.levels)):
                start = self.t0_s + i * self.period_s
                jump = self.levels[i] - self.levels[i - 1]
                if self.ramp_s > 0:
                    out = out + jump * _raised_cosine((t - start) / self.ramp_s)
                else:
                    out = out + jump * (t >= start)
            return out
        if k == "ramp":
            return self.offset_m + self.amplitude_m * np.maximum(t - self.t0_s, 0.0)
        if k == "sine":
            return self.offset_m + self.amplitude_m * np.sin(2 * np.pi * self.freqs_hz[0] * t)
        if k == "multisine":
            f = np.asarray(self.freqs_hz)
            n = len(f)
            phases = -np.pi * np.arange(1, n + 1) * np.arange(n) / n  # Schroeder
            raw = np.sin(2 * np.pi * np.outer(t, f) + phases).sum(axis=1)
            grid = np.linspace(0, max(1.0 / f.min(), 1.0), 20001)
            peak = np.max(np.abs(np.sin(2 * np.pi * np.outer(grid, f) + phases).sum(axis=1)))
            return self.offset_m + self.amplitude_m * raw / peak
        path = Path(self.path)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        tt, xs = read_input_csv(path)
        return np.interp(t, tt, xs)


def read_input_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as e:
        raise ConfigError(f"cannot read input CSV {path}: {e}") from None
    if not rows or "t" not in rows[0] or "x_o_star" not in rows[0]:
        raise ConfigError(f"input CSV {path} needs columns t, x_o_star")
    t = np.array([float(r["t"]) for r in rows])
    x = np.array([float(r["x_o_star"]) for r in rows])
    if np.any(np.diff(t) <= 0):
        raise ConfigError("input CSV times must be strictly increasing")
    return t, x


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class Jitter:
    mean_ms: float
    std_ms: float
    seed: int


@dataclass(frozen=True)
class ScenarioConfig:
    architecture: Architecture = field(default_factory=lambda: make_architecture("FPPF"))
    params: ParameterSet = field(default_factory=ParameterSet)
    surface: Surface = field(default_factory=Surface)
    delay_ms: float = 0.0
    jitter: Optional[Jitter] = None
    input: InputSpec = field(default_factory=InputSpec)
    duration_s: float = 10.0
    dt_ms: float = 1.0
    steady_window_s: float = 1.0
    max_lag_s: Optional[float] = None
    base_dir: Optional[str] = None

    TOP_FIELDS = ("architecture", "params", "surface", "delay_ms", "jitter", "input",
                  "duration_s", "dt_ms", "steady_window_s", "max_lag_s")

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ConfigError("duration_s must be > 0")
        if not self.dt_ms > 0:
            raise ConfigError("dt_ms must be > 0")
        if self.delay_ms < 0:
            raise ConfigError("delay_ms must be >= 0")
        if self.surface.k_p != self.params.k_p or self.surface.b_p != self.params.b_p:
            object.__setattr__(self, "surface", replace(self.surface, k_p=self.params.k_p,
                                                        b_p=self.params.b_p))

    @property
    def dt(self):
        return self.dt_ms / 1000.0

    @property
    def delay(self):
        return self.delay_ms / 1000.0

    def with_delay_ms(self, d):
        return replace(self, delay_ms=float(d))

    def with_stiffness_n_per_mm(self, k):
        p = replace(self.params, k_p=float(k) * N_PER_MM)
        return replace(self, params=p, surface=replace(self.surface, k_p=p.k_p))

    def with_architecture(self, tag):
        a = self.architecture
        arch = make_architecture(tag, force_lowpass=a.force_lowpass if tag in
                                 ("FP", "FPP", "FPPF") else None,
                                 f_sat=a.f_sat, d_max=a.d_max, d_err=a.d_err)
        return replace(self, architecture=arch)

    @classmethod
    def from_dict(cls, d, base_dir=None):
        _reject_unknown(d, cls.TOP_FIELDS, "config")
        arch = Architecture.from_dict(d.get("architecture", {"tag": "FPPF"}))
        params = ParameterSet.from_dict(d.get("params", {}))
        surf_d = d.get("surface", {}) or {}
        _reject_unknown(surf_d, ("x0_m", "normal", "stiffness_n_per_mm"), "surface")
        if "stiffness_n_per_mm" in surf_d:
            params = replace(params, k_p=_num(surf_d, "stiffness_n_per_mm", 0, "surface",
                                              nonneg=True) * N_PER_MM)
        normal = surf_d.get("normal", 1)
        if normal not in (1, -1):
            raise ConfigError("surface.normal must be 1 or -1")
        surface = Surface(x0=_num(surf_d, "x0_m", 0.0, "surface"), k_p=params.k_p,
                          b_p=params.b_p, normal=int(normal))
        jitter = None
        if d.get("jitter") is not None:
            jd = d["jitter"]
            _reject_unknown(jd, ("mean_ms", "std_ms", "seed"), "jitter")
            if "seed" not in jd or isinstance(jd["seed"], bool) or not isinstance(jd["seed"], int):
                raise ConfigError("jitter.seed is required and must be an integer")
            jitter = Jitter(mean_ms=_num(jd, "mean_ms", 0.0, "jitter", nonneg=True),
                            std_ms=_num(jd, "std_ms", 0.0, "jitter", nonneg=True),
                            seed=int(jd["seed"]))
        inp = InputSpec.from_dict(d.get("input", {}))
        cfg = cls(architecture=arch, params=params, surface=surface,
                  delay_ms=_num(d, "delay_ms", 0.0, "config", nonneg=True),
                  jitter=jitter, input=inp,
                  duration_s=_num(d, "duration_s", 10.0, "config", positive=True),
                  dt_ms=_num(d, "dt_ms", 1.0, "config", positive=True),
                  steady_window_s=_num(d, "steady_window_s", 1.0, "config", positive=True),
                  max_lag_s=_num(d, "max_lag_s", None, "config", positive=True),
                  base_dir=None if base_dir is None else str(base_dir))
        return cfg

    def to_dict(self):
        return {
            "architecture": self.architecture.to_dict(),
            "params": self.params.to_dict(),
            "surface": {"x0_m": self.surface.x0, "normal": self.surface.normal},
            "delay_ms": self.delay_ms,
            "jitter": None if self.jitter is None else {
                "mean_ms": self.jitter.mean_ms, "std_ms": self.jitter.std_ms,
                "seed": self.jitter.seed},
            "input": self.input.to_dict(),
            "duration_s": self.duration_s,
            "dt_ms": self.dt_ms,
            "steady_window_s": self.steady_window_s,
            "max_lag_s": self.max_lag_s,
        }


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}") from None
    return ScenarioConfig.from_dict(d, base_dir=path.parent)


# ------------------------------------------------------------------ results

@dataclass
class Trajectory:
    """Uniformly sampled rows in SI units; columns as TRAJECTORY_COLUMNS."""

    data: np.ndarray

    def __getattr__(self, name):
        if name in TRAJECTORY_COLUMNS:
            return self.data[:, TRAJECTORY_COLUMNS.index(name)]
        raise AttributeError(name)

    def __len__(self):
        return self.data.shape[0]

    @property
    def dt(self):
        return float(self.data[1, 0] - self.data[0, 0]) if len(self) > 1 else math.nan

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for row in self.data:
            buf.write(",".join(fmt(v) for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(x) for x in r] for r in reader if r]
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise ConfigError(f"trajectory header must be {','.join(TRAJECTORY_COLUMNS)}")
        return cls(np.array(rows, dtype=float).reshape(-1, len(TRAJECTORY_COLUMNS)))


@dataclass
class Metrics:
    e_p: float      # mm
    e_pss: float    # mm
    e_f: float      # N
    e_fss: float    # N
    tau: float      # ms

    def as_dict(self):
        return {"e_p_mm": self.e_p, "e_pss_mm": self.e_pss, "e_f_n": self.e_f,
                "e_fss_n": self.e_fss, "tau_ms": self.tau}


@dataclass
class SimResult:
    trajectory: Trajectory
    metrics: Metrics
    diverged: bool
    config: ScenarioConfig
    contact_oscillation: float = math.nan


# ------------------------------------------------------------------ simulation

def _pack(cfg: ScenarioConfig):
    p = cfg.params
    s = cfg.surface
    a = cfg.architecture
    g = a.effective_gains()
    k_hat, b_hat = g.impedance_estimate(s)
    par = np.array([p.k_p, p.b_p, p.k_f, p.b_f, p.m_f, p.m_o, p.b_o, p.k_a, p.k_o1, p.k_o2,
                    s.x0, float(s.normal)])
    gain = np.array([g.k_po, g.k_do, g.k_fo, g.k_pf, g.k_ff, k_hat, b_hat, a.f_sat,
                     a.d_max if math.isfinite(a.d_max) else -1.0, a.d_err,
                     a.force_lowpass or 0.0])
    return par, gain


def read_schedule(cfg: ScenarioConfig, n):
    """Fractional history positions read by each channel at every step.

    Fixed delay T reads position k - T/dt.  With jitter each step draws a one-way
    delay T + N(mean/2, std/2) (RTT statistics halved), clamped at zero; read
    positions are then made non-decreasing and never ahead of the present.
    """
    dt = cfg.dt
    k = np.arange(n + 1, dtype=float)
    steps = cfg.delay / dt
    if abs(steps - round(steps)) > 1e-9 and cfg.jitter is None:
        warnings.warn(f"delay {cfg.delay_ms} ms is not a multiple of dt; reads interpolate",
                      stacklevel=2)
    elif abs(steps - round(steps)) <= 1e-9:
        steps = float(round(steps))
    if cfg.jitter is None:
        r = k - steps
        return r.copy(), r.copy()
    rng = np.random.default_rng(cfg.jitter.seed)
    out = []
    for _ in range(2):
        extra = rng.normal(cfg.jitter.mean_ms / 2.0, cfg.jitter.std_ms / 2.0, size=n + 1)
        d = np.maximum(cfg.delay_ms + extra, 0.0) / 1000.0
        r = np.minimum(np.maximum.accumulate(k - d / dt), k)
        out.append(r)
    return out[0], out[1]


def initial_state(cfg: ScenarioConfig, x_star0):
    """Operator at rest on its target, follower and tool on the operator."""
    from .architectures import haptic_force
    from .plant import FollowerState, follower_force

    x = float(x_star0)
    f_f = follower_force(FollowerState(x, 0.0), cfg.surface)
    f_h = haptic_force(cfg.architecture, (x, 0.0, f_f), (x, 0.0), cfg.surface)
    op = operator_equilibrium(x, f_h, cfg.params)
    return np.array([op.x_o, op.v_o, op.x_a, x, 0.0, x])


def simulate(cfg: ScenarioConfig, bypass_delay=False):
    """Integrate the scenario; returns (Trajectory, diverged)."""
    dt = cfg.dt
    n = int(round(cfg.duration_s / dt))
    if n < 1:
        raise ConfigError("duration shorter than one step")
    t_half = np.arange(2 * n + 1) * (dt / 2.0)
    xstar = np.asarray(cfg.input.evaluate(t_half, cfg.base_dir), dtype=float)
    if not np.all(np.isfinite(xstar)):
        raise ConfigError("operator target contains non-finite values")
    par, gain = _pack(cfg)
    read_o, read_f = read_schedule(cfg, n)
    scale = max(cfg.input.scale, float(np.max(np.abs(xstar))), 1e-3)
    limit = 1e3 * scale
    y0 = initial_state(cfg, xstar[0])
    out, valid, diverged = _kernels.simulate_loop(y0, xstar, dt, par, gain,
                                                  cfg.architecture.law, read_o, read_f,
                                                  bool(bypass_delay), limit)
    return Trajectory(out[:valid].copy()), bool(diverged)


# ------------------------------------------------------------------ metrics

def plateau_windows(x_star, dt, window_s, min_len_s=2.0, atol=1e-12):
    """Index ranges covering the final ``window_s`` of every constant stretch of x_o*."""
    x = np.asarray(x_star)
    n = len(x)
    windows = []
    start = 0
    for i in range(1, n + 1):
        if i == n or abs(x[i] - x[i - 1]) > atol:
            if (i - 1 - start) * dt >= min_len_s - 1e-12:
                w = int(round(window_s / dt))
                windows.append((max(start, i - w), i))
            start = i
    return windows


def steady_error(err, x_star, dt, window_s):
    windows = plateau_windows(x_star, dt, window_s)
    if not windows:
        w = max(1, int(round(window_s / dt)))
        windows = [(max(0, len(err) - w), len(err))]
    chunk = np.concatenate([np.abs(err[a:b]) for a, b in windows])
    return float(np.mean(chunk))


def default_max_lag(duration_s, delay_s=0.0):
    return min(0.5 * duration_s, max(1.0, 2.5 * delay_s + 0.5))


def metrics(traj: Trajectory, steady_window_s=1.0, max_lag_s=None):
    """Tracking metrics; raises UndefinedLagError on a constant trajectory."""
    dt = traj.dt
    n = len(traj)
    if n * dt < 2 * steady_window_s:
        raise ValueError("trajectory shorter than two steady-state windows")
    if max_lag_s is None:
        max_lag_s = default_max_lag(n * dt)
    ep = traj.x_o - traj.x_f
    ef = traj.f_h - traj.f_f
    tau = xcorr_lag(traj.x_o, traj.x_f, dt, max_lag_s)
    return Metrics(
        e_p=1000.0 * float(np.sqrt(np.mean(ep ** 2))),
        e_pss=1000.0 * steady_error(ep, traj.x_o_star, dt, steady_window_s),
        e_f=float(np.sqrt(np.mean(ef ** 2))),
        e_fss=steady_error(ef, traj.x_o_star, dt, steady_window_s),
        tau=1000.0 * tau,
    )


def contact_oscillation(traj: Trajectory, surface: Surface, smooth_s=0.5, settle_s=0.0):
    """RMS of the follower force about its running mean while in contact (N).

    The running mean is a centred moving average of ``smooth_s``; only samples
    after the first contact (plus ``settle_s``) are used.
    """
    f = traj.f_f
    dt = traj.dt
    contact = np.flatnonzero(surface.in_contact(traj.x_f))
    if contact.size == 0:
        return 0.0
    start = contact[0] + int(round(settle_s / dt))
    if start >= len(f) - 2:
        return 0.0
    w = max(1, int(round(smooth_s / dt)))
    seg = f[start:]
    pad = np.pad(seg, (w // 2, w - 1 - w // 2), mode="edge")
    mean = np.convolve(pad, np.ones(w) / w, mode="valid")
    return float(np.sqrt(np.mean((seg - mean) ** 2)))


def aligned_rms(a, b, dt, max_lag_s):
    """RMS of ``a(t - tau) - b(t)`` with tau from cross-correlation."""
    try:
        lag = xcorr_lag(a, b, dt, max_lag_s)
    except UndefinedLagError:
        lag = 0.0
    k = int(round(lag / dt))
    if k > 0:
        d = a[:-k] - b[k:]
    elif k < 0:
        d = a[-k:] - b[:k]
    else:
        d = a - b
    return float(np.sqrt(np.mean(d ** 2))), lag


def run_scenario(cfg: ScenarioConfig, bypass_delay=False):
    traj, diverged = simulate(cfg, bypass_delay=bypass_delay)
    nan = math.nan
    m = Metrics(nan, nan, nan, nan, nan)
    if len(traj) > 1:
        max_lag = cfg.max_lag_s or default_max_lag(len(traj) * cfg.dt, cfg.delay)
        try:
            m = metrics(traj, cfg.steady_window_s, max_lag)
        except (UndefinedLagError, ValueError):
            # constant or too-short records: keep what is computable
            ep = traj.x_o - traj.x_f
            ef = traj.f_h - traj.f_f
            m = Metrics(1000.0 * float(np.sqrt(np.mean(ep ** 2))),
                        1000.0 * steady_error(ep, traj.x_o_star, cfg.dt, cfg.steady_window_s),
                        float(np.sqrt(np.mean(ef ** 2))),
                        steady_error(ef, traj.x_o_star, cfg.dt, cfg.steady_window_s), nan)
    return SimResult(trajectory=traj, metrics=m, diverged=diverged, config=cfg,
                     contact_oscillation=contact_oscillation(traj, cfg.surface)
                     if len(traj) > 2 else nan)


# ------------------------------------------------------------------ sweeps

SWEEP_AXES = ("delay", "stiffness", "architecture")


@dataclass
class SweepRow:
    axis: str
    value: object
    result: Optional[SimResult]
    error: str = ""


def _apply_axis(cfg, axis, value):
    if axis == "delay":
        return cfg.with_delay_ms(float(value))
    if axis == "stiffness":
        return cfg.with_stiffness_n_per_mm(float(value))
    if axis == "architecture":
        return cfg.with_architecture(str(value))
    raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")


def sweep(base: ScenarioConfig, axis, values):
    """One scenario per value (same seed); per-run errors are recorded, not raised."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    rows = []
    for v in values:
        try:
            cfg = _apply_axis(base, axis, v)
            rows.append(SweepRow(axis, v, run_scenario(cfg)))
        except Exception as e:  # noqa: BLE001 - recorded per row
            rows.append(SweepRow(axis, v, None, f"{type(e).__name__}: {e}"))
    return rows


def sweep_csv(rows, path=None):
    buf = io.StringIO()
    buf.write(",".join(("axis", "value") + METRIC_COLUMNS + ("error",)) + "\n")
    for r in rows:
        if r.result is None:
            vals = ["nan"] * (len(METRIC_COLUMNS) - 1) + ["0"]
        else:
            m = r.result.metrics.as_dict()
            vals = [fmt(m[c]) for c in METRIC_COLUMNS[:5]]
            vals += [fmt(r.result.contact_oscillation), fmt(r.result.diverged)]
        err = r.error.replace(",", ";").replace("\n", " ")
        buf.write(",".join([r.axis, fmt(r.value)] + vals + [err]) + "\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def write_meta(out_path, payload):
    """Sidecar ``<stem>.meta.json`` carrying the resolved configuration."""
    out_path = Path(out_path)
    meta = out_path.with_name(out_path.stem + ".meta.json")
    meta.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return meta


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(type(o).__name__)

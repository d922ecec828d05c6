"""Grey-box identification of follower or operator parameters from trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ConfigError, NumericalError
from .numerics import eigenvalues
from .plant import ParameterSet

FOLLOWER_PARAMS = ("k_f", "b_f", "m_f")
OPERATOR_PARAMS = ("m_o", "b_o", "k_a", "k_o1", "k_o2")
MASS_FLOOR = 1e-9


@dataclass
class FitData:
    """Uniformly sampled record.

    follower model: ``u`` is x_v, ``y`` is x_f, ``v0`` is v_f(0).
    operator model: ``u`` is x_o*, ``f`` is f_h, ``y`` is x_o, ``v0`` is v_o(0).
    """

    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    model: str = "follower"
    f: Optional[np.ndarray] = None
    v0: float = 0.0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.model not in ("follower", "operator"):
            raise ConfigError("model must be 'follower' or 'operator'")
        if not (len(self.t) == len(self.u) == len(self.y)) or len(self.t) < 2:
            raise ConfigError("t, u and y must have equal length >= 2")
        d = np.diff(self.t)
        if np.any(d <= 0) or np.ptp(d) > 1e-6 * d.mean():
            raise ConfigError("data must be uniformly sampled")
        if self.model == "operator":
            if self.f is None:
                raise ConfigError("operator data needs the haptic force f")
            self.f = np.asarray(self.f, dtype=float)

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])

    @classmethod
    def from_trajectory(cls, traj, model="follower"):
        if model == "follower":
            return cls(traj.t, traj.x_v, traj.x_f, "follower", v0=float(traj.v_f[0]))
        return cls(traj.t, traj.x_o_star, traj.x_o, "operator", f=traj.f_h,
                   v0=float(traj.v_o[0]))


@dataclass
class FitProblem:
    data: FitData
    free: tuple
    init: ParameterSet = field(default_factory=ParameterSet)
    reg: Optional[float] = None  # None -> 1e-6 * initial objective

    def __post_init__(self):
        self.free = tuple(self.free)
        allowed = FOLLOWER_PARAMS if self.data.model == "follower" else OPERATOR_PARAMS
        bad = [n for n in self.free if n not in allowed]
        if bad or not self.free:
            raise ConfigError(f"free parameters must be a non-empty subset of {allowed}")
        if len(self.data.t) < 10 * len(self.free):
            raise ConfigError("need at least 10 samples per free parameter")


@dataclass
class FitReport:
    params: ParameterSet
    rms_mm: float
    mse_mm2: float
    iterations: int
    converged: bool
    sensitivity: dict
    objective_history: list

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "rms_mm": self.rms_mm,
            "mse_mm2": self.mse_mm2,
            "iterations": self.iterations,
            "converged": self.converged,
            "sensitivity_mm_per_unit": self.sensitivity,
        }


def model_stable(p: ParameterSet, model="follower"):
    """Admissibility of a candidate during the fit.

    Follower: poles in the open left half-plane (all coefficients positive).
    Operator: positive mass only.  Its servo has no proportional term when
    k_o1 = 0, so the isolated operator is unstable even at the reference
    values and an eigenvalue test would reject every candidate.
    """
    if model == "follower":
        return p.m_f > 0 and p.b_f > 0 and p.k_f > 0
    return p.m_o > 0


def operator_poles(p: ParameterSet):
    """Eigenvalues of the isolated operator (x_o, v_o, x_a) dynamics."""
    A = np.array([[0, 1, 0],
                  [-p.k_o1 / p.m_o, -(p.b_o + p.k_o2) / p.m_o, p.k_a / p.m_o],
                  [-1, 0, 0]], dtype=float)
    return eigenvalues(A)


def predict(p: ParameterSet, data: FitData):
    dt = data.dt
    if data.model == "follower":
        return _kernels.simulate_follower(data.u, dt, p.k_f, p.b_f, p.m_f,
                                          float(data.y[0]), data.v0)
    x0 = float(data.y[0])
    a0 = (p.k_o1 * x0 - float(data.f[0])) / p.k_a if p.k_a > 0 else 0.0
    return _kernels.simulate_operator(data.u, data.f, dt, p.m_o, p.b_o, p.k_a, p.k_o1,
                                      p.k_o2, x0, data.v0, a0)


def simulate_residuals(p: ParameterSet, data: FitData):
    """Measured minus simulated position, per sample (m)."""
    return data.y - predict(p, data)


def residual_rms_mm(p: ParameterSet, data: FitData):
    r = simulate_residuals(p, data)
    return 1000.0 * float(np.sqrt(np.mean(r * r)))


def _vector(p, names):
    return np.array([getattr(p, n) for n in names], dtype=float)


def _with(p, names, vec):
    return replace(p, **{n: float(v) for n, v in zip(names, vec)})


def _project(vec, names):
    out = np.maximum(vec, 0.0)
    for i, n in enumerate(names):
        if n in ("m_f", "m_o", "k_f"):
            out[i] = max(out[i], MASS_FLOOR)
    return out


def fit(problem: FitProblem, max_iter=200, step_tol=1e-8, fd_step=1e-6):
    """Levenberg-Marquardt on sum(r^2) + reg * ||p - p_init||^2.

    Jacobian by forward differences (relative step ``fd_step``), Marquardt
    diagonal scaling, projection onto the non-negative bounds after each step.
    Candidates whose submodel is unstable are charged 1e6 times the current
    objective, so the step is refused and damping grows.
    """
    data = problem.data
    names = problem.free
    model = data.model
    p0 = problem.init
    x_init = _project(_vector(p0, names), names)
    if np.any(x_init != _vector(p0, names)):
        raise ConfigError("initial guess violates the bounds")
    r0 = simulate_residuals(p0, data)
    if not np.all(np.isfinite(r0)):
        raise NumericalError("non-finite residuals at the initial guess")
    reg = problem.reg
    if reg is None:
        reg = 1e-6 * float(r0 @ r0)
    if reg < 0:
        raise ConfigError("regularization weight must be >= 0")
    sqrt_reg = math.sqrt(reg)

    def stacked(x):
        p = _with(p0, names, x)
        r = simulate_residuals(p, data)
        return np.concatenate([r, sqrt_reg * (x - x_init)]), p

    def objective(x):
        res, p = stacked(x)
        if not np.all(np.isfinite(res)):
            return math.inf, res
        return float(res @ res), res

    x = x_init.copy()
    f, res = objective(x)
    history = [f]
    lam = 1e-3
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        J = np.empty((res.size, len(names)))
        for j in range(len(names)):
            h = fd_step * max(abs(x[j]), 1e-6)
            xp = x.copy()
            xp[j] += h
            rp, _ = stacked(xp)
            J[:, j] = (rp - res) / h
        g = J.T @ res
        JTJ = J.T @ J
        diag = np.diag(JTJ).copy()
        diag[diag <= 0] = 1.0
        accepted = False
        while lam < 1e16:
            try:
                step = -np.linalg.solve(JTJ + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = _project(x + step, names)
            p_new = _with(p0, names, x_new)
            if not model_stable(p_new, model):
                f_new = 1e6 * f
            else:
                f_new, res_new = objective(x_new)
            if f_new < f:
                scaled = np.max(np.abs(x_new - x) / np.maximum(np.abs(x), 1e-12))
                x, f, res = x_new, f_new, res_new
                history.append(f)
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                if scaled < step_tol:
                    converged = True
                break
            lam *= 10.0
        if not accepted:
            # no descent direction left at any damping: we are at a minimum
            converged = True
            break
        if converged:
            break
    p_fit = _with(p0, names, x)
    rms = residual_rms_mm(p_fit, data)
    sens = {n: sensitivity(p_fit, data, n)[0] for n in names}
    return FitReport(params=p_fit, rms_mm=rms, mse_mm2=rms * rms, iterations=it,
                     converged=converged, sensitivity=sens, objective_history=history)


def sensitivity(p: ParameterSet, data: FitData, name, rel_step=0.01):
    """Slope of residual RMS (mm) per unit of ``name``.

    Central difference with a step of ``rel_step`` times the value; a zero-valued
    parameter uses a forward difference (second item of the result is True).
    """
    if name not in ParameterSet.names():
        raise ConfigError(f"unknown parameter {name!r}")
    v = getattr(p, name)
    if v == 0:
        h = rel_step
        return (residual_rms_mm(p.with_value(name, h), data)
                - residual_rms_mm(p, data)) / h, True
    h = rel_step * abs(v)
    up = residual_rms_mm(p.with_value(name, v + h), data)
    dn = residual_rms_mm(p.with_value(name, v - h), data)
    return (up - dn) / (2 * h), False

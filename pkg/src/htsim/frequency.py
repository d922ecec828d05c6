"""Hybrid-matrix transparency and scattering-norm passivity over frequency."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .architectures import make_architecture
from .errors import PoleError, SingularError
from .plant import ParameterSet, gf_eval

IDEAL = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)


def frequency_grid(lo=1e-2, hi=1e2, n=200):
    """Log-spaced angular frequencies (rad/s)."""
    if not (0 < lo < hi) or n < 2:
        raise ValueError("need 0 < lo < hi and n >= 2")
    return np.geomspace(lo, hi, n)


@dataclass
class HybridResponse:
    omega: np.ndarray
    H: np.ndarray  # (n, 2, 2) complex; NaN where a pole was hit
    tag: str
    delay: float

    @property
    def valid(self):
        return np.all(np.isfinite(self.H.reshape(len(self.omega), 4)), axis=1)

    def element(self, i, j):
        return self.H[:, i - 1, j - 1]


def _arch(arch):
    return make_architecture(arch) if isinstance(arch, str) else arch


def _denominator_check(den, scale):
    if abs(den) <= 1e-13 * max(scale, 1e-300):
        raise PoleError("hybrid matrix denominator vanishes")


def hybrid_general(gains, p: ParameterSet, T, s):
    """Shared-denominator form with all five coupling gains (paper sign of k_ff)."""
    g = gains
    gf = gf_eval(p, s)
    if gf == 0:
        raise PoleError("G_f is zero")
    gi = 1.0 / gf
    d1 = cmath.exp(-s * T)
    d2 = d1 * d1
    c = g.k_po + g.k_do * s
    den = gi * s + g.k_pf - d2 * g.k_ff * c
    _denominator_check(den, abs(gi * s) + g.k_pf + abs(g.k_ff * c))
    h11 = d2 * c * (1.0 - gi) / den
    h12 = ((gi * s + g.k_pf) * g.k_fo - g.k_ff * c) / den * d1
    h21 = -(s + g.k_pf - d1 * g.k_ff * c) / den
    h22 = g.k_ff * (1.0 - d2 * g.k_fo) * s / den
    return np.array([[h11, h12], [h21, h22]])


def hybrid_eval(arch, p: ParameterSet, T, omega):
    """2x2 hybrid matrix mapping (v_o, f_f) to (f_h, -v_f) at s = j*omega.

    The local force-feedback gain enters with the sign used by the simulator's
    virtual-tool law (the force error drives the tool towards force agreement),
    which is the negative of the k_ff appearing in the closed forms.
    """
    arch = _arch(arch)
    g = arch.effective_gains()
    s = 1j * float(omega)
    if omega == 0:
        raise PoleError("hybrid matrix is evaluated for omega > 0")
    gf = gf_eval(p, s)
    d1 = cmath.exp(-s * T)
    d2 = d1 * d1
    kff = -g.k_ff
    tag = arch.tag
    if tag == "PP":
        return np.array([[d2 * (g.k_po / s + g.k_do) * (gf - 1.0), 0.0], [-gf, 0.0]],
                        dtype=complex)
    if tag == "FP":
        return np.array([[0.0, d1 * g.k_fo], [-gf, 0.0]], dtype=complex)
    den = s / gf + g.k_pf
    _denominator_check(den, abs(s / gf) + g.k_pf)
    if tag == "FPP":
        return np.array([[0.0, d1 * g.k_fo], [-(s + g.k_pf) / den, 0.0]], dtype=complex)
    if tag == "FPPF":
        return np.array([[0.0, d1 * g.k_fo],
                         [-(s + g.k_pf) / den, kff * (1.0 - d2 * g.k_fo) * s / den]],
                        dtype=complex)
    # model-mediated: local mesh impedance, k_hat/b_hat default to the true surface
    k_hat = p.k_p if g.k_p_hat is None else g.k_p_hat
    b_hat = p.b_p if g.b_p_hat is None else g.b_p_hat
    h11 = -(b_hat + k_hat / s)
    h21 = -d1 * (s + g.k_pf - kff * (b_hat * s + k_hat)) / den
    h22 = kff * s / den
    return np.array([[h11, 0.0], [h21, h22]], dtype=complex)


def perfect_delay_hybrid(T, omega):
    """Ideal model-mediated two-port: [[0, e^{sT}], [-e^{-sT}, 0]]."""
    s = 1j * float(omega)
    return np.array([[0.0, cmath.exp(s * T)], [-cmath.exp(-s * T), 0.0]], dtype=complex)


def hybrid_response(arch, p: ParameterSet, T, omega=None):
    arch = _arch(arch)
    omega = frequency_grid() if omega is None else np.asarray(omega, dtype=float)
    H = np.empty((len(omega), 2, 2), dtype=complex)
    for i, w in enumerate(omega):
        try:
            H[i] = hybrid_eval(arch, p, T, w)
        except PoleError:
            H[i] = np.nan
    return HybridResponse(omega=omega, H=H, tag=arch.tag, delay=float(T))


def perfect_delay_response(T, omega=None):
    omega = frequency_grid() if omega is None else np.asarray(omega, dtype=float)
    H = np.array([perfect_delay_hybrid(T, w) for w in omega])
    return HybridResponse(omega=omega, H=H, tag="ideal-delay", delay=float(T))


@dataclass
class TransparencyMetrics:
    sup: dict
    rms: dict
    magnitude_sup: dict
    phase_sup: dict
    phase: dict


def _weighted_rms(omega, v):
    if len(omega) < 2:
        return float(np.sqrt(np.mean(v ** 2)))
    x = np.log(omega)
    return float(np.sqrt(np.trapezoid(v ** 2, x) / (x[-1] - x[0])))


def transparency_error(resp: HybridResponse):
    """Distance from the ideal [[0, 1], [-1, 0]] per element.

    ``rms`` is weighted uniformly in log-frequency.  Magnitude-only errors
    compare |h12| and |h21| with 1; phase errors are the wrapped angles of h12
    and -h21 (for a pure delay, omega*T modulo 2*pi).
    """
    ok = resp.valid
    w = resp.omega[ok]
    H = resp.H[ok]
    err = {
        "h11": np.abs(H[:, 0, 0]),
        "h12": np.abs(H[:, 0, 1] - 1.0),
        "h21": np.abs(H[:, 1, 0] + 1.0),
        "h22": np.abs(H[:, 1, 1]),
    }
    mag = {"h12": np.abs(np.abs(H[:, 0, 1]) - 1.0), "h21": np.abs(np.abs(H[:, 1, 0]) - 1.0)}
    phase = {"h12": np.abs(np.angle(H[:, 0, 1])), "h21": np.abs(np.angle(-H[:, 1, 0]))}
    sup = {k: float(np.max(v)) if v.size else math.nan for k, v in err.items()}
    rms = {k: _weighted_rms(w, v) if v.size else math.nan for k, v in err.items()}
    return TransparencyMetrics(
        sup=sup, rms=rms,
        magnitude_sup={k: float(np.max(v)) if v.size else math.nan for k, v in mag.items()},
        phase_sup={k: float(np.max(v)) if v.size else math.nan for k, v in phase.items()},
        phase=phase,
    )


def scattering_matrix(H):
    H = np.asarray(H, dtype=complex)
    I = np.eye(2)
    M = H + I
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if abs(det) <= 1e-14 * max(1.0, np.max(np.abs(M)) ** 2):
        raise SingularError("H + I is singular")
    inv = np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / det
    return np.diag([1.0, -1.0]) @ (H - I) @ inv


def scattering_norm(H):
    """Largest singular value of diag(1,-1)(H-I)(H+I)^-1 (2x2 closed form)."""
    S = scattering_matrix(H)
    G = S.conj().T @ S
    tr = float((G[0, 0] + G[1, 1]).real)
    det = float((G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]).real)
    disc = max(tr * tr - 4.0 * det, 0.0)
    return math.sqrt(max(0.5 * (tr + math.sqrt(disc)), 0.0))


def scattering_norms(resp: HybridResponse):
    out = np.full(len(resp.omega), np.nan)
    for i in np.flatnonzero(resp.valid):
        try:
            out[i] = scattering_norm(resp.H[i])
        except SingularError:
            pass
    return out


def passive_on_grid(resp: HybridResponse, tol=1e-9):
    """True if the scattering norm is <= 1 at every valid grid sample."""
    n = scattering_norms(resp)
    n = n[np.isfinite(n)]
    return bool(n.size) and bool(np.all(n <= 1.0 + tol))


# ------------------------------------------------------------------ probing

def probe_two_port(arch, p: ParameterSet, omega, amplitude=1e-3, force_amplitude=0.1,
                   dt=1e-3, periods=6, settle_periods=3):
    """Measure the undelayed two-port by sinusoidal probing of the time-domain laws.

    Two runs: operator velocity driven sinusoidally with the follower force held
    at zero, then the follower force driven with the operator held still.  The
    follower, virtual tool and haptic laws are the simulator's own; deadband,
    saturation and the tool clamp are disabled so the probe is linear.  Returns
    the 2x2 complex matrix estimated from the steady-state cycles.
    """
    arch = _arch(arch)
    arch = replace(arch, d_err=0.0, f_sat=math.inf, d_max=math.inf, force_lowpass=None)
    g = arch.effective_gains()
    k_hat = p.k_p if g.k_p_hat is None else g.k_p_hat
    b_hat = p.b_p if g.b_p_hat is None else g.b_p_hat
    period = 2.0 * math.pi / omega
    n = int(round((settle_periods + periods) * period / dt))
    t = np.arange(n + 1) * dt
    keep = t >= settle_periods * period

    def run(v_amp, f_amp):
        # state: x_o, x_f, v_f, x_v ; v_o and f_f are prescribed
        y = np.zeros(4)
        fh_out = np.empty(n + 1)
        vf_out = np.empty(n + 1)

        def inputs(tt):
            return v_amp * math.sin(omega * tt), f_amp * math.sin(omega * tt)

        def fh_of(y, tt):
            v_o, f_f = inputs(tt)
            # mesh surface placed 1 m away so the operator never leaves it
            return _kernels.haptic_law(arch.law, y[0], v_o, y[1], y[2], f_f, g.k_po, g.k_do,
                                       g.k_fo, k_hat, b_hat, -1.0, -1.0, math.inf)

        def deriv(tt, y):
            v_o, f_f = inputs(tt)
            f_h = fh_of(y, tt)
            rate = _kernels.tool_rate_law(y[0], v_o, f_h, y[1], f_f, g.k_pf, g.k_ff, 0.0)
            a_f = (p.k_f * (y[3] - y[1]) + p.b_f * (rate - y[2])) / p.m_f
            return np.array([v_o, y[2], a_f, rate])

        for k in range(n + 1):
            tt = k * dt
            fh_out[k] = fh_of(y, tt)
            vf_out[k] = y[2]
            if k == n:
                break
            k1 = deriv(tt, y)
            k2 = deriv(tt + 0.5 * dt, y + 0.5 * dt * k1)
            k3 = deriv(tt + 0.5 * dt, y + 0.5 * dt * k2)
            k4 = deriv(tt + dt, y + dt * k3)
            y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        return fh_out, -vf_out

    def phasor(sig):
        tk = t[keep]
        X = np.column_stack([np.sin(omega * tk), np.cos(omega * tk), np.ones_like(tk), tk])
        coef, *_ = np.linalg.lstsq(X, sig[keep], rcond=None)
        # a sin + b cos = Im[(a + j b) e^{j w t}]
        return coef[0] + 1j * coef[1]

    H = np.zeros((2, 2), dtype=complex)
    fh, mvf = run(amplitude, 0.0)
    H[0, 0] = phasor(fh) / amplitude
    H[1, 0] = phasor(mvf) / amplitude
    fh, mvf = run(0.0, force_amplitude)
    H[0, 1] = phasor(fh) / force_amplitude
    H[1, 1] = phasor(mvf) / force_amplitude
    return H

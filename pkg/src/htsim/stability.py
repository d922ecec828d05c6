"""Closed-loop state-space assembly, stability tests and robustness bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import VF, VO, XA, XF, XO, XV
from .architectures import FORCE_TAGS, MESH_TAGS, Architecture, GainSet
from .errors import ConfigError, PreconditionError, SingularError
from .numerics import eigenvalues, matrix_measure, spectral_norm
from .plant import ParameterSet

TABLE_VI_PARAMS = ("k_p", "b_p", "b_f", "m_f", "m_o", "b_o", "k_a", "k_o1", "k_o2")


@dataclass
class ClosedLoop:
    """Linearised loop x' = A0 x(t) + A1 x(t-T) + A2 x(t-2T) + B x_o*."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    blocks: dict = field(default_factory=dict)


def _unit(i):
    e = np.zeros(6)
    e[i] = 1.0
    return e


def _infer_tag(g: GainSet):
    if g.k_p_hat is not None or g.b_p_hat is not None:
        return "MFP"
    if g.k_po > 0:
        return "PP"
    return "FPPF"


def assemble(p: ParameterSet, g, contact=True, tag=None):
    """Closed-loop matrices for parameters ``p`` and an Architecture or GainSet.

    Contact is linearised about a surface at the origin (``contact=False`` drops
    the surface).  Deadband, saturation, clamping and low-pass filtering are
    not represented.  A bare GainSet is read as the mesh law when an impedance
    estimate is given, PP when k_po > 0, and force reflection otherwise.
    """
    if p.m_o <= 0 or p.m_f <= 0:
        raise SingularError("masses must be positive")
    if isinstance(g, Architecture):
        tag = g.tag
        gains = g.effective_gains()
    else:
        gains = g
        tag = tag or _infer_tag(g)
    k_p = p.k_p if contact else 0.0
    b_p = p.b_p if contact else 0.0

    e = [_unit(i) for i in range(6)]
    f_f = -k_p * e[XF] - b_p * e[VF]
    # haptic force split into local (delay 0) and received (delay T) parts
    if tag == "PP":
        fh0 = -gains.k_po * e[XO] - gains.k_do * e[VO]
        fh1 = gains.k_po * e[XF] + gains.k_do * e[VF]
    elif tag in MESH_TAGS:
        k_hat = k_p if gains.k_p_hat is None else (gains.k_p_hat if contact else 0.0)
        b_hat = b_p if gains.b_p_hat is None else gains.b_p_hat
        fh0 = -k_hat * e[XO] - b_hat * e[VO]
        fh1 = np.zeros(6)
    elif tag in FORCE_TAGS:
        fh0 = -gains.k_do * e[VO]
        fh1 = gains.k_fo * f_f
    else:
        raise ConfigError(f"unknown tag {tag!r}")
    # virtual-tool rate by delay order
    xv = [
        -gains.k_pf * e[XF] + gains.k_ff * f_f,
        e[VO] + gains.k_pf * e[XO] - gains.k_ff * fh0,
        -gains.k_ff * fh1,
    ]
    A = [np.zeros((6, 6)) for _ in range(3)]
    A0, A1, A2 = A
    A0[XO, VO] = 1.0
    A0[VO, XO] = -p.k_o1 / p.m_o
    A0[VO, VO] = -(p.b_o + p.k_o2) / p.m_o
    A0[VO, XA] = p.k_a / p.m_o
    A0[VO] += fh0 / p.m_o
    A1[VO] += fh1 / p.m_o
    A0[XA, XO] = -1.0
    A0[XF, VF] = 1.0
    A0[VF, XF] = -p.k_f / p.m_f
    A0[VF, VF] = -p.b_f / p.m_f
    A0[VF, XV] = p.k_f / p.m_f
    for n in range(3):
        A[n][VF] += (p.b_f / p.m_f) * xv[n]
        A[n][XV] += xv[n]

    B = np.zeros((6, 1))
    B[XA, 0] = 1.0
    C = np.zeros((6, 6))
    C[0, XO] = 1.0
    C[1, VO] = 1.0
    C[2, XO], C[2, VO], C[2, XA] = -p.k_o1, -p.k_o2, p.k_a
    C[3, XF] = 1.0
    C[4, VF] = 1.0
    C[5, XF], C[5, VF] = -k_p, -b_p

    blocks = dict(
        A_o=np.array([[0, 1, 0], [-p.k_o1 / p.m_o, -(p.b_o + p.k_o2) / p.m_o, p.k_a / p.m_o],
                      [-1, 0, 0]], dtype=float),
        A_f=np.array([[0, 1], [-p.k_f / p.m_f, -p.b_f / p.m_f]]),
        B_f1=np.array([[0.0], [p.k_f / p.m_f]]),
        B_f2=np.array([[0.0], [p.b_f / p.m_f]]),
        C_o=C[0:3, 0:3].copy(),
        C_f=C[3:6, 3:5].copy(),
        E_o=np.array([[0.0], [1.0 / p.m_o], [0.0]]),
        K_oo=np.array([gains.k_po, gains.k_do, 0.0]),
        K_fo=np.array([gains.k_po, gains.k_do, gains.k_fo]),
        K_of=np.array([gains.k_pf, 1.0, 0.0]),
        K_ff=np.array([gains.k_pf, 0.0, -gains.k_ff]),
    )
    return ClosedLoop(A=A0 + A1 + A2, B=B, C=C, A0=A0, A1=A1, A2=A2, blocks=blocks)


@dataclass
class StabilityVerdict:
    stable: bool
    margin: float
    eigenvalues: np.ndarray
    structural_zero: bool

    def __bool__(self):
        return self.stable


def _conserved_ratio(A):
    """c such that row XV of A equals c * row XO, if any (x_v - c x_o is conserved)."""
    rxo = A[XO]
    rxv = A[XV]
    j = int(np.argmax(np.abs(rxo)))
    if rxo[j] == 0.0:
        return None
    c = rxv[j] / rxo[j]
    scale = max(np.max(np.abs(rxv)), np.max(np.abs(rxo)), 1e-300)
    if np.max(np.abs(rxv - c * rxo)) <= 1e-12 * scale:
        return c
    return None


def is_stable(cl, tol=0.0):
    """Eigenvalue verdict on the undelayed matrix.

    When the virtual tool merely copies operator velocity, x_v - c*x_o is an
    exactly conserved quantity (a structural zero eigenvalue).  That mode is
    deflated before the verdict; the full spectrum is still reported.
    """
    A = cl.A if isinstance(cl, ClosedLoop) else np.asarray(cl, dtype=float)
    lam = eigenvalues(A)
    structural = False
    reduced = A
    if A.shape == (6, 6):
        c = _conserved_ratio(A)
        if c is not None:
            structural = True
            reduced = A[:5, :5].copy()
            reduced[:, XO] += c * A[:5, XV]
    lam_r = eigenvalues(reduced)
    top = float(np.max(lam_r.real))
    return StabilityVerdict(stable=top < -tol, margin=-top, eigenvalues=lam,
                            structural_zero=structural)


def routh_h21(p: ParameterSet, k_pf):
    """Routh-Hurwitz test of the cubic m_f s^3 + b_f s^2 + (k_f + k_pf b_f) s + k_pf k_f."""
    if p.m_f <= 0:
        raise PreconditionError("m_f must be positive")
    return routh_margin(p, k_pf) > 0


def routh_margin(p: ParameterSet, k_pf):
    return p.b_f * (p.k_f + k_pf * p.b_f) - p.m_f * k_pf * p.k_f


def h21_cubic(p: ParameterSet, k_pf):
    """Coefficients (highest first) of the h21 denominator polynomial."""
    return np.array([p.m_f, p.b_f, p.k_f + k_pf * p.b_f, k_pf * p.k_f])


def mori_cheres(cl: ClosedLoop):
    """mu(A0) + ||A1|| + ||A2||; negative certifies delay-independent stability."""
    value = matrix_measure(cl.A0) + spectral_norm(cl.A1) + spectral_norm(cl.A2)
    return value, value < 0


# ---------------------------------------------------------------- robustness

@dataclass
class Boundary:
    param: str
    direction: str
    value: float
    unbounded: bool


def _stable_at(p, g, name, value, contact):
    return is_stable(assemble(p.with_value(name, value), g, contact=contact)).stable


def stability_boundary(p: ParameterSet, g, param_name, direction, rel_tol=1e-4,
                       up_factor=100.0, down_factor=1e-6, contact=True):
    """Value of ``param_name`` where the loop first loses stability.

    Scans geometrically from the nominal value (others fixed) and bisects the
    first stable/unstable bracket to ``rel_tol``.  If no crossing occurs before
    the cap the cap is returned with ``unbounded=True``.
    """
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    if param_name not in ParameterSet.names():
        raise ConfigError(f"unknown parameter {param_name!r}")
    nominal = getattr(p, param_name)
    if not is_stable(assemble(p, g, contact=contact)).stable:
        raise PreconditionError("nominal system is unstable")
    positive_only = param_name in ("m_f", "m_o", "k_f")
    if nominal == 0.0:
        if direction == "down":
            return Boundary(param_name, direction, 0.0, True)
        grid = np.geomspace(1e-6, up_factor, 161)
    elif direction == "up":
        grid = nominal * np.geomspace(1.0, up_factor, 161)[1:]
    else:
        grid = nominal * np.geomspace(1.0, down_factor, 241)[1:]
    last_ok = nominal
    for v in grid:
        if positive_only and v <= 0:
            break
        if not _stable_at(p, g, param_name, v, contact):
            lo, hi = last_ok, v  # lo stable, hi unstable
            while abs(hi - lo) > rel_tol * max(abs(hi), abs(lo)):
                mid = math.sqrt(lo * hi) if lo > 0 and hi > 0 else 0.5 * (lo + hi)
                if _stable_at(p, g, param_name, mid, contact):
                    lo = mid
                else:
                    hi = mid
            return Boundary(param_name, direction, 0.5 * (lo + hi), False)
        last_ok = v
    return Boundary(param_name, direction, float(grid[-1]), True)


@dataclass
class RobustnessRow:
    parameter: str
    nominal: float
    min: float
    max: float
    percent_variation: float
    min_unbounded: bool
    max_unbounded: bool


def robustness_table(p: ParameterSet, g, params=TABLE_VI_PARAMS, contact=True):
    rows = []
    for name in params:
        lo = stability_boundary(p, g, name, "down", contact=contact)
        hi = stability_boundary(p, g, name, "up", contact=contact)
        nominal = getattr(p, name)
        pct = 100.0 * (hi.value - lo.value) / (2.0 * nominal) if nominal > 0 else math.inf
        rows.append(RobustnessRow(name, nominal, lo.value, hi.value, pct,
                                  lo.unbounded, hi.unbounded))
    return rows

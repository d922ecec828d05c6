"""The seven coupling laws between operator and follower."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

from . import _kernels
from .errors import ConfigError, SingularError
from .plant import Surface

TAGS = ("PP", "FP", "FPP", "FPPF", "M", "MP", "MFP")
MESH_TAGS = ("M", "MP", "MFP")
FORCE_TAGS = ("FP", "FPP", "FPPF")

# gains each tag is allowed to use; everything else is forced to zero
ACTIVE = {
    "PP": ("k_po", "k_do"),
    "FP": ("k_fo", "k_do"),
    "FPP": ("k_fo", "k_do", "k_pf"),
    "FPPF": ("k_fo", "k_do", "k_pf", "k_ff"),
    "M": ("k_p_hat", "b_p_hat"),
    "MP": ("k_p_hat", "b_p_hat", "k_pf"),
    "MFP": ("k_p_hat", "b_p_hat", "k_pf", "k_ff"),
}

DEFAULT_GAINS = dict(k_po=200.0, k_do=5.0, k_fo=0.8, k_pf=10.0, k_ff=0.02)
DEFAULT_F_SAT = 7.0
DEFAULT_D_MAX = 0.03
DEFAULT_D_ERR = 0.001
MFP_AXES = ("both", "normal", "tangent")


@dataclass(frozen=True)
class GainSet:
    """Coupling gains.  ``k_p_hat``/``b_p_hat`` of None mean "use the surface's"."""

    k_po: float = 0.0
    k_do: float = 0.0
    k_fo: float = 0.0
    k_pf: float = 0.0
    k_ff: float = 0.0
    k_p_hat: Optional[float] = None
    b_p_hat: Optional[float] = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None and f.name in ("k_p_hat", "b_p_hat"):
                continue
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ConfigError(f"gain {f.name} must be a finite number, got {v!r}")
            if v < 0:
                raise ConfigError(f"gain {f.name} must be >= 0, got {v}")

    @classmethod
    def names(cls):
        return tuple(f.name for f in fields(cls))

    def to_dict(self):
        return asdict(self)

    def impedance_estimate(self, surf: Surface):
        k = surf.k_p if self.k_p_hat is None else self.k_p_hat
        b = surf.b_p if self.b_p_hat is None else self.b_p_hat
        return k, b


@dataclass(frozen=True)
class Architecture:
    tag: str
    gains: GainSet
    force_lowpass: Optional[float] = None
    f_sat: float = DEFAULT_F_SAT
    d_max: float = DEFAULT_D_MAX
    d_err: float = DEFAULT_D_ERR
    mfp_axis: str = "both"

    @property
    def law(self):
        if self.tag == "PP":
            return _kernels.LAW_PP
        if self.tag in MESH_TAGS:
            return _kernels.LAW_MESH
        return _kernels.LAW_FP

    @property
    def is_mesh(self):
        return self.tag in MESH_TAGS

    def effective_gains(self):
        """Gains actually applied, after the MFP axis selection."""
        g = self.gains
        if self.tag == "MFP" and self.mfp_axis == "normal":
            g = replace(g, k_pf=0.0)
        elif self.tag == "MFP" and self.mfp_axis == "tangent":
            g = replace(g, k_ff=0.0)
        return g

    def to_dict(self):
        return {
            "tag": self.tag,
            "gains": self.gains.to_dict(),
            "force_lowpass_tau_s": self.force_lowpass,
            "f_sat_n": self.f_sat,
            "d_max_m": self.d_max,
            "d_err_m": self.d_err,
            "mfp_axis": self.mfp_axis,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        allowed = {"tag", "gains", "force_lowpass_tau_s", "f_sat_n", "d_max_m", "d_err_m",
                   "mfp_axis"}
        unknown = sorted(set(d) - allowed)
        if unknown:
            raise ConfigError(f"unknown architecture field(s): {', '.join(unknown)}")
        if "tag" not in d:
            raise ConfigError("architecture.tag is required")
        gains = d.get("gains") or {}
        if not isinstance(gains, dict):
            raise ConfigError("architecture.gains must be an object")
        unknown = sorted(set(gains) - set(GainSet.names()))
        if unknown:
            raise ConfigError(f"unknown gain field(s): {', '.join(unknown)}")
        opts = {}
        for key, name in (("force_lowpass_tau_s", "force_lowpass"), ("f_sat_n", "f_sat"),
                          ("d_max_m", "d_max"), ("d_err_m", "d_err"), ("mfp_axis", "mfp_axis")):
            if key in d:
                opts[name] = d[key]
        return make_architecture(d["tag"], gains, **opts)


def make_architecture(tag, overrides=None, *, force_lowpass=None, f_sat=DEFAULT_F_SAT,
                      d_max=DEFAULT_D_MAX, d_err=DEFAULT_D_ERR, mfp_axis="both"):
    """Gain pattern for ``tag`` with defaults, then ``overrides``.

    Overriding a gain the tag does not use with a non-zero value is an error.
    """
    if tag not in TAGS:
        raise ConfigError(f"unknown architecture tag {tag!r}; expected one of {TAGS}")
    overrides = dict(overrides or {})
    unknown = sorted(set(overrides) - set(GainSet.names()))
    if unknown:
        raise ConfigError(f"unknown gain field(s): {', '.join(unknown)}")
    active = ACTIVE[tag]
    vals = {name: (DEFAULT_GAINS.get(name, 0.0) if name in active else 0.0)
            for name in ("k_po", "k_do", "k_fo", "k_pf", "k_ff")}
    vals["k_p_hat"] = None
    vals["b_p_hat"] = None
    for name, v in overrides.items():
        if name not in active:
            if v is None or v == 0:
                continue
            raise ConfigError(f"gain {name} must be zero for architecture {tag}")
        vals[name] = v
    gains = GainSet(**vals)
    if force_lowpass is not None:
        if not (isinstance(force_lowpass, (int, float)) and force_lowpass >= 0
                and math.isfinite(force_lowpass)):
            raise ConfigError("force_lowpass_tau_s must be a finite number >= 0")
        if force_lowpass == 0:
            force_lowpass = None
    if force_lowpass is not None and tag not in FORCE_TAGS:
        raise ConfigError(f"force low-pass only applies to {FORCE_TAGS}")
    for name, v in (("f_sat_n", f_sat), ("d_err_m", d_err)):
        if not isinstance(v, (int, float)) or not v >= 0:
            raise ConfigError(f"{name} must be a number >= 0")
    if not isinstance(d_max, (int, float)) or not d_max > 0:
        raise ConfigError("d_max_m must be > 0")
    if mfp_axis not in MFP_AXES:
        raise ConfigError(f"mfp_axis must be one of {MFP_AXES}")
    if mfp_axis != "both" and tag != "MFP":
        raise ConfigError("mfp_axis only applies to MFP")
    return Architecture(tag=tag, gains=gains, force_lowpass=force_lowpass, f_sat=float(f_sat),
                        d_max=float(d_max), d_err=float(d_err), mfp_axis=mfp_axis)


def haptic_force(arch: Architecture, y_f_delayed, y_o, surf: Surface, f_ref=None):
    """Force applied to the operator's haptic device, saturated at ``f_sat``.

    ``y_f_delayed`` is (x_f, v_f, f_f) as received; ``y_o`` is (x_o, v_o).
    ``f_ref`` replaces the reflected f_f (e.g. its low-passed value).
    """
    x_f, v_f, f_f = y_f_delayed
    x_o, v_o = y_o
    g = arch.effective_gains()
    k_hat, b_hat = g.impedance_estimate(surf)
    return _kernels.haptic_law(arch.law, x_o, v_o, x_f, v_f, f_f if f_ref is None else f_ref,
                               g.k_po, g.k_do, g.k_fo, k_hat, b_hat, surf.x0,
                               float(surf.normal), arch.f_sat)


def deadband(e, d_err):
    """Soft-zero deadband: sign(e) * max(0, |e| - d_err)."""
    return _kernels.deadband(e, d_err)


def virtual_tool_rate(arch: Architecture, y_o_delayed, y_f):
    """Virtual-tool velocity from delayed (x_o, v_o, f_h) and local (x_f, v_f, f_f).

    The force term drives the tool along the force error so the follower's
    contact force approaches the operator's haptic force.
    """
    x_o, v_o, f_h = y_o_delayed
    x_f, _v_f, f_f = y_f
    g = arch.effective_gains()
    return _kernels.tool_rate_law(x_o, v_o, f_h, x_f, f_f, g.k_pf, g.k_ff, arch.d_err)


def clamp_tool(arch: Architecture, x_v, x_o_delayed):
    """Keep the virtual tool within ``d_max`` of the received operator position."""
    return min(max(x_v, x_o_delayed - arch.d_max), x_o_delayed + arch.d_max)


def mm_steady_state_gain(k_p, k_p_hat, k_pf, k_ff):
    """Steady-state f_f/f_h of model-mediated coupling with an impedance estimate."""
    den = k_pf - k_ff * k_p
    if den == 0 or k_p_hat == 0:
        raise SingularError("steady-state gain is singular (k_pf - k_ff*k_p == 0)")
    return (k_p / k_p_hat) * (k_pf - k_ff * k_p_hat) / den

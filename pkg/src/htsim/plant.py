"""Operator, follower and surface models."""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, fields, replace

from . import _kernels
from .errors import ConfigError, PoleError, SingularError

N_PER_MM = 1000.0


@dataclass(frozen=True)
class ParameterSet:
    """Physical constants in SI units (N, m, s, kg)."""

    k_p: float = 10.0
    b_p: float = 1.0
    m_p: float = 0.02  # stored only; no equation uses it
    k_f: float = 1.0
    b_f: float = 0.275
    m_f: float = 0.02
    m_o: float = 0.1
    b_o: float = 0.1
    k_a: float = 100.0
    k_o1: float = 0.0
    k_o2: float = 80.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ConfigError(f"parameter {f.name} must be a finite number, got {v!r}")
            if v < 0:
                raise ConfigError(f"parameter {f.name} must be >= 0, got {v}")
        for name in ("m_f", "m_o", "k_f"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"parameter {name} must be > 0")

    @classmethod
    def names(cls):
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = sorted(set(d) - set(cls.names()))
        if unknown:
            raise ConfigError(f"unknown parameter field(s): {', '.join(unknown)}")
        return cls(**{k: float(v) if isinstance(v, int) and not isinstance(v, bool) else v
                      for k, v in d.items()})

    def to_dict(self):
        return asdict(self)

    def with_value(self, name, value):
        if name not in self.names():
            raise ConfigError(f"unknown parameter {name!r}")
        return replace(self, **{name: float(value)})


@dataclass(frozen=True)
class FollowerState:
    x_f: float = 0.0
    v_f: float = 0.0


@dataclass(frozen=True)
class OperatorState:
    x_o: float = 0.0
    v_o: float = 0.0
    x_a: float = 0.0


@dataclass(frozen=True)
class Surface:
    """Flat surface at ``x0``; the material fills the side opposite ``normal``.

    With ``normal=+1`` contact means ``x < x0``.
    """

    x0: float = 0.0
    k_p: float = 10.0
    b_p: float = 1.0
    normal: int = 1

    def __post_init__(self):
        if self.normal not in (1, -1):
            raise ConfigError("surface normal must be +1 or -1")
        if self.k_p < 0 or self.b_p < 0:
            raise ConfigError("surface stiffness and damping must be >= 0")

    @classmethod
    def from_params(cls, p: ParameterSet, x0=0.0, normal=1):
        return cls(x0=x0, k_p=p.k_p, b_p=p.b_p, normal=normal)

    def penetration(self, x):
        return (self.x0 - x) * self.normal

    def in_contact(self, x):
        return self.penetration(x) > 0.0


def follower_deriv(s: FollowerState, x_v, v_v, p: ParameterSet):
    """(x_f', v_f') of the follower tracking the virtual tool."""
    if p.m_f == 0:
        raise SingularError("follower mass is zero")
    return (s.v_f, (p.k_f * (x_v - s.x_f) + p.b_f * (v_v - s.v_f)) / p.m_f)


def follower_force(s: FollowerState, surf: Surface, in_contact=None):
    """Surface reaction on the follower tool; zero out of contact.

    ``in_contact=None`` decides contact from the position.
    """
    if in_contact is None:
        return _kernels.contact_force(s.x_f, s.v_f, surf.k_p, surf.b_p, surf.x0,
                                      float(surf.normal))
    if not in_contact:
        return 0.0
    return -(surf.k_p * (s.x_f - surf.x0) + surf.b_p * s.v_f)


def operator_deriv(s: OperatorState, x_o_star, f_h, p: ParameterSet):
    """(x_o', v_o', x_a') of the servo-controlled operator."""
    if p.m_o == 0:
        raise SingularError("operator mass is zero")
    dv = (-p.k_o1 * s.x_o - (p.b_o + p.k_o2) * s.v_o + p.k_a * s.x_a + f_h) / p.m_o
    return (s.v_o, dv, x_o_star - s.x_o)


def operator_equilibrium(x_o, f_h, p: ParameterSet):
    """Operator state at rest at ``x_o`` under a constant haptic force."""
    x_a = (p.k_o1 * x_o - f_h) / p.k_a if p.k_a > 0 else 0.0
    return OperatorState(x_o=x_o, v_o=0.0, x_a=x_a)


def gf_eval(p: ParameterSet, s):
    """Follower transfer function (b_f s + k_f) / (m_f s^2 + b_f s + k_f)."""
    s = complex(s)
    if math.isinf(abs(s)):
        return 0j
    den = p.m_f * s * s + p.b_f * s + p.k_f
    scale = p.m_f * abs(s) ** 2 + p.b_f * abs(s) + p.k_f
    if abs(den) <= 1e-14 * scale:
        raise PoleError(f"G_f evaluated at a pole s={s}")
    return (p.b_f * s + p.k_f) / den


def follower_poles(p: ParameterSet):
    """Roots of m_f s^2 + b_f s + k_f."""
    disc = cmath.sqrt(p.b_f * p.b_f - 4.0 * p.m_f * p.k_f)
    return ((-p.b_f + disc) / (2 * p.m_f), (-p.b_f - disc) / (2 * p.m_f))

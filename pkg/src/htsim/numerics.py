"""Small dense linear algebra, integration, delay lines, filtering, lag estimation."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionError, IntegrationError, NumericalError, UndefinedLagError


def _as_matrix(m, square=True):
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix must be square, got {a.shape[0]}x{a.shape[1]}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix has non-finite entries")
    return a


def rk4_step(state, deriv, t, dt):
    """One classical Runge-Kutta step of ``x' = deriv(t, x)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(state, dtype=float)

    def f(tt, xx):
        d = np.asarray(deriv(tt, xx), dtype=float)
        if d.shape != x.shape:
            raise DimensionError(f"derivative shape {d.shape} != state shape {x.shape}")
        if not np.all(np.isfinite(d)):
            raise IntegrationError(f"non-finite derivative at t={tt!r}", t=tt)
        return d

    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class DelayLine:
    """Time-stamped scalar samples read back ``delay`` seconds late.

    Samples older than ``capacity`` behind the newest one are discarded, but one
    sample before the retention window is always kept so reads stay bracketed.
    """

    delay: float = 0.0
    capacity: float = math.inf
    times: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("delay must be >= 0")

    def push(self, t, value):
        if self.times and t <= self.times[-1]:
            raise ValueError("timestamps must be strictly increasing")
        self.times.append(float(t))
        self.values.append(float(value))
        if math.isfinite(self.capacity):
            horizon = t - max(self.capacity, self.delay)
            cut = bisect.bisect_left(self.times, horizon) - 1
            if cut > 0:
                del self.times[:cut]
                del self.values[:cut]

    def read(self, t):
        return delay_read(self, t)


def delay_read(line: DelayLine, t):
    """Value of the line's signal at ``t - delay`` (linear interpolation).

    Before the first sample the first value is held; the read time is capped at
    the newest stored sample.
    """
    if not line.times:
        raise ValueError("delay line is empty")
    tr = t - line.delay
    times = line.times
    vals = line.values
    if tr <= times[0]:
        return vals[0]
    if tr >= times[-1]:
        return vals[-1]
    i = bisect.bisect_right(times, tr) - 1
    t0, t1 = times[i], times[i + 1]
    if tr == t0:
        return vals[i]
    w = (tr - t0) / (t1 - t0)
    return vals[i] + w * (vals[i + 1] - vals[i])


def eigenvalues(m):
    """All eigenvalues of a real square matrix (dimension <= 16)."""
    a = _as_matrix(m)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n > 16:
        raise DimensionError("eigenvalues supports dimension <= 16")
    # unit scale keeps the deflation tests clear of underflow and overflow
    s = float(np.max(np.abs(a)))
    if s == 0.0:
        return np.zeros(n, dtype=complex)
    wr, wi, ok = _kernels.eig_real(a / s)
    if not ok:
        raise NumericalError("QR iteration did not converge")
    return s * (wr + 1j * wi)


def matrix_measure(m):
    """Logarithmic 2-norm: half the largest eigenvalue of ``m + m.T``."""
    a = _as_matrix(m)
    return 0.5 * float(np.max(eigenvalues(a + a.T).real))


def spectral_norm(m):
    """Largest singular value."""
    a = _as_matrix(m, square=False)
    if a.size == 0:
        return 0.0
    g = a.T @ a if a.shape[0] >= a.shape[1] else a @ a.T
    lam = float(np.max(eigenvalues(g).real))
    return math.sqrt(max(lam, 0.0))


@dataclass
class LowPassState:
    """Single-pole IIR filter state."""

    tau: float
    y_prev: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")


def lowpass_step(f: LowPassState, u, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    f.y_prev = f.y_prev + (dt / (f.tau + dt)) * (u - f.y_prev)
    return f.y_prev


def xcorr_lag(a, b, dt, max_lag):
    """Lag (s) maximising the correlation of ``a`` and ``b``; positive if b lags a."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError("signals must be 1-D and of equal length")
    L = int(round(max_lag / dt))
    if a.size < 2 * L or a.size < 2:
        raise ValueError("signals shorter than 2*max_lag")
    if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        raise UndefinedLagError("lag is undefined for a constant signal")
    scan = _kernels.xcorr_scan(a, b, L)
    if not np.any(np.isfinite(scan)):
        raise UndefinedLagError("no overlap with non-zero variance")
    return (int(np.argmax(scan)) - L) * dt

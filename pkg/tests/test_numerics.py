import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm

from htsim import _kernels
from htsim.errors import DimensionError, IntegrationError, UndefinedLagError
from htsim.numerics import (DelayLine, LowPassState, delay_read, eigenvalues, lowpass_step,
                            matrix_measure, rk4_step, spectral_norm, xcorr_lag)

LINEAR = np.array([[0.0, 1.0], [-4.0, -0.4]])


def _integrate(dt, t_end=2.0):
    x = np.array([1.0, 0.0])
    n = int(round(t_end / dt))
    for k in range(n):
        x = rk4_step(x, lambda t, y: LINEAR @ y, k * dt, dt)
    return x


def test_rk4_exact_on_linear_ode_and_fourth_order():
    exact = expm(LINEAR * 2.0) @ np.array([1.0, 0.0])
    errs = [np.linalg.norm(_integrate(dt) - exact) for dt in (0.04, 0.02, 0.01)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 3.8


def test_rk4_single_step_of_xdot_equals_x():
    # one step from 1 with dt=0.1 reproduces the degree-4 Taylor polynomial
    got = rk4_step(np.array([1.0]), lambda t, y: y, 0.0, 0.1)[0]
    assert got == pytest.approx(1 + 0.1 + 0.1 ** 2 / 2 + 0.1 ** 3 / 6 + 0.1 ** 4 / 24, abs=1e-15)


def test_rk4_rejects_bad_derivatives():
    with pytest.raises(IntegrationError):
        rk4_step(np.zeros(2), lambda t, y: np.array([np.nan, 0.0]), 0.0, 0.1)
    with pytest.raises(DimensionError):
        rk4_step(np.zeros(2), lambda t, y: np.zeros(3), 0.0, 0.1)
    with pytest.raises(ValueError):
        rk4_step(np.zeros(2), lambda t, y: y, 0.0, 0.0)


def test_eigenvalues_known_matrices():
    assert np.sort(eigenvalues(np.diag([3.0, -1.0, 2.0])).real) == pytest.approx([-1, 2, 3])
    rot = eigenvalues([[0.0, -2.0], [2.0, 0.0]])
    assert np.sort(rot.imag) == pytest.approx([-2, 2])
    assert np.abs(rot.real).max() < 1e-14
    assert eigenvalues(np.zeros((0, 0))).size == 0


def test_eigenvalues_match_lapack_on_companion_matrices():
    rng = np.random.default_rng(3)
    for n in range(1, 17):
        c = rng.normal(size=n)
        comp = np.zeros((n, n))
        comp[0] = -c
        comp[1:, :-1] += np.eye(n - 1)
        ours = np.sort_complex(eigenvalues(comp))
        ref = np.sort_complex(np.linalg.eigvals(comp))
        assert np.allclose(ours, ref, atol=1e-7 * max(1, np.abs(ref).max()))


def test_eigenvalues_dimension_limits():
    with pytest.raises(DimensionError):
        eigenvalues(np.zeros((17, 17)))
    with pytest.raises(DimensionError):
        eigenvalues(np.zeros((2, 3)))


square = st.integers(1, 8).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-10, 10, allow_nan=False)))


@settings(max_examples=150, deadline=None)
@given(square)
def test_eigenvalue_trace_and_determinant_identities(a):
    lam = eigenvalues(a)
    scale = max(1.0, np.abs(a).max()) ** a.shape[0]
    assert abs(lam.sum() - np.trace(a)) <= 1e-8 * max(1.0, np.abs(a).max()) * a.shape[0]
    assert abs(np.prod(lam) - np.linalg.det(a)) <= 1e-7 * scale
    # complex eigenvalues of a real matrix come in conjugate pairs
    assert np.allclose(np.sort_complex(lam), np.sort_complex(lam.conj()), atol=1e-6 * math.sqrt(scale))


@settings(max_examples=100, deadline=None)
@given(square)
def test_matrix_measure_bounds_spectral_abscissa(a):
    assert matrix_measure(a) >= float(np.max(eigenvalues(a).real)) - 1e-9 * max(1, np.abs(a).max())


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10_000))
def test_spectral_norm_matches_svd(r, c, seed):
    a = np.random.default_rng(seed).normal(size=(r, c))
    assert spectral_norm(a) == pytest.approx(np.linalg.norm(a, 2), rel=1e-9)


def test_matrix_measure_symmetric_is_largest_eigenvalue():
    a = np.array([[2.0, 1.0], [1.0, -3.0]])
    assert matrix_measure(a) == pytest.approx(np.linalg.eigvalsh(a).max())


def test_delay_line_reads_and_holds():
    line = DelayLine(delay=0.25)
    for k in range(11):
        line.push(0.1 * k, float(k))
    assert line.read(0.0) == 0.0                      # before the first sample: hold
    assert line.read(0.55) == pytest.approx(3.0)      # 0.30 s -> sample 3
    assert line.read(0.60) == pytest.approx(3.5)      # interpolated
    assert line.read(5.0) == 10.0                     # capped at the newest
    with pytest.raises(ValueError):
        line.push(1.0, 0.0)
    with pytest.raises(ValueError):
        delay_read(DelayLine(), 0.0)
    with pytest.raises(ValueError):
        DelayLine(delay=-1.0)


def test_delay_line_capacity_keeps_reads_bracketed():
    line = DelayLine(delay=0.2, capacity=0.3)
    for k in range(100):
        line.push(0.01 * k, 0.01 * k)
    assert line.times[0] <= 0.99 - 0.3
    assert line.read(0.99) == pytest.approx(0.79)


def test_lowpass_step_response():
    f = LowPassState(tau=0.1)
    dt = 1e-4
    for _ in range(int(0.1 / dt)):
        y = lowpass_step(f, 1.0, dt)
    assert y == pytest.approx(1 - math.exp(-1), abs=1e-3)
    with pytest.raises(ValueError):
        LowPassState(tau=0.0)


def _shifted(shift_samples, n=4000, seed=0):
    rng = np.random.default_rng(seed)
    base = np.convolve(rng.normal(size=n + 600), np.ones(40) / 40, mode="same")
    a = base[300:300 + n]
    b = base[300 - shift_samples:300 - shift_samples + n]
    return a, b


@pytest.mark.parametrize("shift", [0, 1, 17, 250, -80])
def test_xcorr_lag_recovers_constructed_shift(shift):
    a, b = _shifted(shift)
    assert xcorr_lag(a, b, 1e-3, 0.5) == pytest.approx(shift * 1e-3, abs=1e-3)


def test_xcorr_lag_constant_signal_is_undefined():
    with pytest.raises(UndefinedLagError):
        xcorr_lag(np.ones(100), np.arange(100.0), 0.01, 0.2)


def test_xcorr_scan_is_pearson_correlation():
    a, b = _shifted(33, n=600)
    scan = _kernels.xcorr_scan(a, b, 50)
    for k in (-20, 0, 33):
        x, y = (a[:len(a) - k], b[k:]) if k >= 0 else (a[-k:], b[:k])
        assert scan[k + 50] == pytest.approx(np.corrcoef(x, y)[0, 1], rel=1e-9)

from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htsim.architectures import TAGS, make_architecture
from htsim.errors import PoleError, SingularError
from htsim.frequency import (IDEAL, frequency_grid, hybrid_eval, hybrid_general, hybrid_response,
                             passive_on_grid, perfect_delay_hybrid, perfect_delay_response,
                             probe_two_port, scattering_matrix, scattering_norm,
                             scattering_norms, transparency_error)


def test_grid():
    w = frequency_grid()
    assert len(w) == 200 and w[0] == pytest.approx(1e-2) and w[-1] == pytest.approx(1e2)
    with pytest.raises(ValueError):
        frequency_grid(1.0, 0.5)


def test_force_reflection_limits_at_zero_delay(table1):
    arch = make_architecture("FPPF", {"k_fo": 1.0})
    resp = hybrid_response(arch, table1, 0.0)
    assert np.max(np.abs(resp.element(2, 2))) < 1e-12
    assert np.max(np.abs(resp.element(1, 2) - 1)) < 1e-12
    low = hybrid_eval(arch, table1, 0.0, 1e-2)
    assert abs(low[0, 0]) < 0.05 and abs(low[1, 0] + 1) < 0.05


@pytest.mark.parametrize("T", [0.0, 0.25, 1.0])
def test_perfect_delay_is_lossless(T):
    norms = scattering_norms(perfect_delay_response(T))
    assert np.max(np.abs(norms - 1.0)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 5), st.floats(1e-3, 1e3))
def test_perfect_delay_norm_any_point(T, w):
    assert scattering_norm(perfect_delay_hybrid(T, w)) == pytest.approx(1.0, abs=1e-9)


def test_scattering_of_ideal_and_of_resistor():
    # ideal transparent two-port reflects nothing back: S is the swap matrix
    assert scattering_norm(IDEAL) == pytest.approx(1.0)
    # a pure damper in port 1 and open port 2 is passive
    H = np.array([[2.0, 0.0], [0.0, 0.5]], dtype=complex)
    assert scattering_norm(H) <= 1.0
    # negative resistance is active
    assert scattering_norm(np.array([[-0.5, 0.0], [0.0, 0.5]], dtype=complex)) > 1.0
    with pytest.raises(SingularError):
        scattering_matrix(-np.eye(2))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=8, max_size=8))
def test_closed_form_norm_matches_svd(v):
    H = np.array(v[:4]).reshape(2, 2) + 1j * np.array(v[4:]).reshape(2, 2)
    try:
        S = scattering_matrix(H)
    except SingularError:
        return
    assert scattering_norm(H) == pytest.approx(np.linalg.norm(S, 2), rel=1e-7, abs=1e-9)


def _general(arch, p, T, w):
    g = arch.effective_gains()
    flipped = SimpleNamespace(k_po=g.k_po, k_do=g.k_do, k_fo=g.k_fo, k_pf=g.k_pf,
                              k_ff=-g.k_ff)
    return hybrid_general(flipped, p, T, 1j * w)


@pytest.mark.parametrize("tag,over", [("PP", {}), ("FP", {"k_do": 0}), ("FPP", {"k_do": 0}),
                                      ("FPPF", {"k_do": 0})])
@pytest.mark.parametrize("T", [0.0, 0.05])
def test_closed_forms_agree_with_general_form(tag, over, T, table1):
    arch = make_architecture(tag, over)
    for w in (0.03, 0.7, 9.0):
        assert np.allclose(hybrid_eval(arch, table1, T, w), _general(arch, table1, T, w),
                           rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("tag", ["PP", "FPPF", "MP", "MFP"])
@pytest.mark.parametrize("w", [0.5, 4.0])
def test_closed_forms_agree_with_time_domain_probe(tag, w, table1):
    over = {"k_do": 0.0} if tag in ("FP", "FPP", "FPPF") else {}
    arch = make_architecture(tag, over)
    measured = probe_two_port(arch, table1, w)
    predicted = hybrid_eval(arch, table1, 0.0, w)
    assert np.allclose(measured, predicted, rtol=2e-3, atol=2e-3 * np.abs(predicted).max())


def test_pole_is_reported(table1):
    with pytest.raises(PoleError):
        hybrid_eval(make_architecture("FPPF"), table1, 0.0, 0.0)


def test_transparency_error_of_ideal_and_delayed():
    ideal = perfect_delay_response(0.0)
    m = transparency_error(ideal)
    assert max(m.sup.values()) < 1e-12
    late = transparency_error(perfect_delay_response(0.5))
    assert late.magnitude_sup["h12"] < 1e-12 and late.phase_sup["h12"] > 0.5


@pytest.mark.parametrize("k_hat,b_hat", [(None, None), (2.0, 0.3)])
def test_mesh_family_renders_the_local_impedance(k_hat, b_hat, table1):
    arch = make_architecture("MFP", {"k_p_hat": k_hat, "b_p_hat": b_hat})
    k = table1.k_p if k_hat is None else k_hat
    b = table1.b_p if b_hat is None else b_hat
    for w in (0.1, 3.0):
        H = hybrid_eval(arch, table1, 0.4, w)
        assert H[0, 0] == pytest.approx(-(b + k / (1j * w)))
        assert H[0, 1] == 0


@pytest.mark.parametrize("tag", TAGS)
def test_passivity_verdict_runs_for_every_architecture(tag, table1):
    resp = hybrid_response(make_architecture(tag), table1, 0.1)
    assert isinstance(passive_on_grid(resp), bool)

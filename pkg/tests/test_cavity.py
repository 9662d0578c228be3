import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from entsim import cavity as Cv
from entsim.errors import ConfigError


def jc_passage(gtau_a, gtau_b):
    """Atom (upper |B>, lower |A>) crossing two single-photon cavities, by matrix exponentials."""
    sm = np.array([[0, 1], [0, 0]], dtype=complex)  # |A><B| with basis (A, B)
    a = np.array([[0, 1], [0, 0]], dtype=complex)
    i2 = np.eye(2)

    def kron3(x, y, z):
        return np.kron(np.kron(x, y), z)

    h_a = kron3(sm.conj().T, a, i2) + kron3(sm, a.conj().T, i2)
    h_b = kron3(sm.conj().T, i2, a) + kron3(sm, i2, a.conj().T)
    psi = np.zeros(8, dtype=complex)
    psi[4] = 1.0  # |B, 0, 0>
    psi = expm(-1j * h_b * gtau_b) @ expm(-1j * h_a * gtau_a) @ psi
    return psi[[4, 1, 2]]  # |B,0,0>, |A,0,1>, |A,1,0>


@pytest.mark.parametrize("ga, gb", [(0.5, 0.5), (0.8, 0.64), (1.3, 0.2)])
def test_passage_matches_jaynes_cummings(ga, gb):
    res = Cv.state_after_passage(ga, gb)
    np.testing.assert_allclose(res.amplitudes, jc_passage(ga, gb), atol=1e-13)
    assert res.norm == pytest.approx(1.0)
    succ = res.amplitudes[1:]
    want = abs(np.sum(succ)) ** 2 / (2 * np.sum(np.abs(succ) ** 2))
    assert res.fidelity_on_success == pytest.approx(want)


def test_closed_forms_agree_with_passage():
    for g in (0.1, 0.5, 1.0):
        res = Cv.state_after_passage(g, g)
        assert Cv.fidelity_ideal(g) == pytest.approx(res.fidelity_on_success)
        assert Cv.success_probability(g) == pytest.approx(res.p_success)
        assert Cv.fidelity_asymmetric(g, 0.0) == pytest.approx(Cv.fidelity_ideal(g))
        assert Cv.success_probability_asymmetric(g, 0.3) == pytest.approx(
            Cv.state_after_passage(g, 0.7 * g).p_success)


def test_endpoints_and_monotonicity():
    assert Cv.success_probability(0.0) == 0.0
    assert Cv.fidelity_ideal(0.0) == pytest.approx(1.0)
    g = np.linspace(0, np.pi / 2, 200)
    assert np.all(np.diff(Cv.success_probability(g)) > 0)


def test_quoted_values():
    assert Cv.success_probability(0.5) == pytest.approx(0.4069, abs=1e-4)
    assert Cv.fidelity_ideal(0.5) == pytest.approx(0.99577, abs=1e-5)
    assert Cv.fidelity_asymmetric(0.8, 0.2) == pytest.approx(0.934, abs=1e-3)


def test_asymmetric_maximum_at_small_negative_epsilon():
    eps = np.linspace(-0.5, 0.5, 20001)
    f = Cv.fidelity_asymmetric(0.5, eps)
    best = eps[np.argmax(f)]
    assert -0.3 < best < 0


def test_waist_from_mirrors():
    geo = Cv.CavityGeometry(lam=1e-6, D0=0.1, D1=0.1, L=1e-3, R_curv=1e-3)
    assert geo.w0 == pytest.approx(np.sqrt(1e-6 * 1e-3 / (2 * np.pi)))


def test_geometry_validation():
    with pytest.raises(ConfigError):
        Cv.CavityGeometry(lam=1e-3, D0=0.1, D1=0.1)
    with pytest.raises(ConfigError):
        Cv.CavityGeometry(lam=1e-3, D0=0.1, D1=0.1, L=3e-3, R_curv=1e-3)
    with pytest.raises(ConfigError):
        Cv.AtomPath(phi=2.0)


PATHS = [Cv.AtomPath(), Cv.AtomPath(y0=1e-3, z0=2e-4, phi=0.01, theta=0.002),
         Cv.AtomPath(y0=-2e-3, z0=-1e-4, phi=-0.02, theta=0.004, v=300)]


@pytest.mark.parametrize("path", PATHS)
@pytest.mark.parametrize("cavity", [0, 1])
def test_interaction_time_matches_quadrature(path, cavity):
    geo = Cv.paris_geometry()
    a = Cv.effective_interaction_time(geo, path, cavity)
    b = Cv.effective_interaction_time_quad(geo, path, cavity)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-15)


def test_on_axis_interaction_time():
    geo = Cv.paris_geometry()
    assert Cv.effective_interaction_time(geo, Cv.AtomPath(v=250), 0) == pytest.approx(np.sqrt(np.pi) * geo.w0 / 250)
    assert Cv.epsilon_exact(geo, Cv.AtomPath()) == pytest.approx(0.0, abs=1e-15)


def test_epsilon_estimate_residual_is_fourth_order():
    geo = Cv.paris_geometry()
    res = []
    for s in (5e-5, 2.5e-5, 1.25e-5):
        ang = s / geo.D1
        p = Cv.AtomPath(y0=s, z0=s, phi=ang, theta=ang)
        res.append(Cv.epsilon_exact(geo, p) - Cv.epsilon_estimate(geo, p))
    assert res[0] / res[1] == pytest.approx(16, rel=0.03)
    assert res[1] / res[2] == pytest.approx(16, rel=0.03)


def test_collimation_worst_case():
    eps = Cv.collimation_worst_case(Cv.paris_geometry(), 0.25e-3)
    assert eps == pytest.approx(0.1878, abs=1e-4)
    assert eps <= 0.2


def test_detection_run_probability():
    assert Cv.detection_run_probability(0.4, 0.407) == pytest.approx(0.4 ** (1 / 0.407))
    with pytest.raises(ValueError):
        Cv.detection_run_probability(0.4, 0.0)


@settings(max_examples=50, deadline=None)
@given(g=st.floats(0.01, 1.5), e=st.floats(-0.5, 0.9))
def test_asymmetric_fidelity_bounded(g, e):
    f = Cv.fidelity_asymmetric(g, e)
    assert 0.5 - 1e-12 <= f <= 1.0 + 1e-12
    ref = Cv.state_after_passage(g, g * (1 - e)).fidelity_on_success
    assert f == pytest.approx(ref, abs=1e-12)

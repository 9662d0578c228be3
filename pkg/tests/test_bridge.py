from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entsim import bridge as Br
from entsim import distill as D
from entsim import fock as F
from entsim import gaussian as G
from entsim.errors import ConfigError, NumericalError, UnphysicalStateError


def random_gamma(rng, mixed=True):
    """Random physical two-mode covariance: local squeezing/rotations, a splitter, thermal noise."""
    nb = rng.uniform(0, 0.5, 2) if mixed else np.zeros(2)
    gamma = np.diag(np.repeat(2 * nb + 1, 2))
    ops = [G.make_squeezer(rng.uniform(-0.6, 0.6)).on_modes([0], 2),
           G.make_squeezer(rng.uniform(-0.6, 0.6)).on_modes([1], 2),
           G.make_phase_shift(rng.uniform(0, 2 * np.pi)).on_modes([0], 2)]
    T = rng.uniform(0.2, 1.0)
    ops.append(G.make_beam_splitter(T, np.sqrt(1 - T * T)))
    ops.append(G.make_phase_shift(rng.uniform(0, 2 * np.pi)).on_modes([1], 2))
    state = G.GaussianState(gamma)
    for op in ops:
        state = G.apply(op, state)
    return state.covariance


@pytest.mark.parametrize("phi", [0.0, 0.7])
def test_tmss_to_fock(backend, phi):
    rho = Br.gaussian_to_fock(G.make_tmss(0.5, phi).covariance, 6, backend)
    want = F.tmss_fock(0.5, phi, 6).to_density()
    np.testing.assert_allclose(rho.entries, want.entries, atol=1e-13)


def test_vacuum_element_formula(rng):
    for _ in range(10):
        g = random_gamma(rng)
        rho = Br.gaussian_to_fock(g, 2)
        assert rho.entries[0, 0, 0, 0].real == pytest.approx(4 / np.sqrt(np.linalg.det(g + np.eye(4))), abs=1e-10)


def test_recursion_matches_moment_route(rng):
    g = random_gamma(rng)
    rho = Br.gaussian_to_fock(g, 3)
    for idx in [(0, 0, 0, 0), (1, 0, 1, 0), (1, 1, 0, 0), (2, 0, 0, 0), (2, 1, 1, 2), (3, 1, 2, 2), (0, 3, 1, 2)]:
        assert rho.entries[idx] == pytest.approx(Br.gaussian_fock_element(g, *idx), abs=1e-12)


def test_moment_bound_enforced():
    with pytest.raises(ConfigError):
        Br.gaussian_fock_element(np.eye(4), 4, 4, 4, 4)


def test_isserlis_matches_wick_table(backend, rng):
    g = random_gamma(rng)
    cov = Br.moment_covariance(g)
    tab = Br.gaussian_moments(cov, 4, backend)
    for powers in [(2, 0, 0, 0), (1, 1, 0, 0), (2, 2, 0, 0), (1, 1, 1, 1), (3, 1, 0, 2), (0, 2, 2, 2)]:
        assert tab[powers] == pytest.approx(Br.isserlis_moment(cov, powers), abs=1e-12)
    assert tab[1, 0, 0, 0] == 0.0


def test_round_trip_gamma_fock_gamma(rng):
    for _ in range(10):
        g = random_gamma(rng)
        rho = Br.gaussian_to_fock(g, 3)
        back = Br.sigma_to_covariance(Br.sigma_from_state(rho))
        np.testing.assert_allclose(back, g, atol=1e-9)


def test_sigma_maps_inverse(rng):
    g = random_gamma(rng)
    np.testing.assert_allclose(Br.sigma_to_covariance(Br.covariance_to_sigma(g)), g, atol=1e-10)


def test_unphysical_gamma_rejected():
    with pytest.raises(UnphysicalStateError):
        Br.gaussian_to_fock(0.5 * np.eye(4), 2)


def test_fock_trace_converges(rng):
    g = random_gamma(rng, mixed=False)
    assert Br.gaussian_to_fock(g, 14).trace == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("tau", [0.3, 0.75])
def test_absorb_channel_matches_gaussian_loss(tau):
    r = 0.4
    n = 24
    fock_loss = D.apply_channel(F.tmss_fock(r, 0.0, n).to_density(), D.ChannelSpec("absorb", tau))
    gauss = Br.gaussian_to_fock(G.absorb(G.make_tmss(r), tau).covariance, n)
    sl = (slice(0, 6),) * 4
    np.testing.assert_allclose(fock_loss.entries[sl], gauss.entries[sl], atol=1e-10)


def test_characteristic_function_of_vacuum():
    xi = np.array([0.3, -1.1])
    want = np.exp(-xi @ xi / 4)
    assert Br.characteristic_function(F.fock_state(0, 8).to_density(), xi) == pytest.approx(want, abs=1e-12)


def test_characteristic_function_two_mode(rng):
    g = random_gamma(rng)
    rho = Br.gaussian_to_fock(g, 16)
    xi = np.array([0.2, -0.4, 0.5, 0.1])
    # W(xi) = exp(i (Sigma xi) . R)
    s = G.symplectic_form(2) @ xi
    want = np.exp(-s @ g @ s / 4)
    assert Br.characteristic_function(rho, xi) == pytest.approx(want, abs=1e-6)


def test_wigner_vacuum_is_gaussian():
    x, p, W = Br.wigner(F.fock_state(0, 4).to_density())
    want = Br.gaussian_wigner(np.eye(2), np.zeros(2), x, p)
    assert np.max(np.abs(W - want)) < 1e-6


def test_wigner_of_single_photon_is_negative():
    _, _, W = Br.wigner(F.fock_state(1, 4).to_density(), n_points=41)
    assert W[20, 20] == pytest.approx(-1 / np.pi, abs=1e-5)


@pytest.mark.parametrize("alpha, peak", [(0.8, (1, 0)), (0.8j, (0, 1))])
def test_wigner_coherent_orientation(alpha, peak):
    k = np.arange(31)
    amps = np.exp(-abs(alpha) ** 2 / 2) * alpha ** k / np.sqrt([float(factorial(int(i))) for i in k])
    rho = F.FockDensityMatrix(np.outer(amps, amps.conj()))
    x, p, W = Br.wigner(rho, xmax=5, n_points=101)
    i, j = np.unravel_index(np.argmax(W), W.shape)
    centre = np.sqrt(2) * 0.8
    assert (x[i], p[j]) == pytest.approx((peak[0] * centre, peak[1] * centre), abs=0.06)


def test_wigner_norm_check_raises_on_coarse_grid():
    with pytest.raises(NumericalError):
        Br.wigner(F.fock_state(0, 2).to_density(), xmax=1.0, n_points=11)


def test_single_mode_moments_and_nongaussianity():
    red = F.partial_trace(F.tmss_fock(0.4, 0.0, 30), 1)
    gamma, d = Br.single_mode_moments(red)
    np.testing.assert_allclose(gamma, np.cosh(0.8) * np.eye(2), atol=1e-10)
    assert Br.nongaussianity(red) < 1e-5
    assert Br.nongaussianity(F.fock_state(1, 4).to_density()) > 0.1


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_fock_state_is_positive(seed):
    g = random_gamma(np.random.default_rng(seed))
    rho = Br.gaussian_to_fock(g, 5)
    assert rho.is_hermitian()
    assert rho.eigenvalues().min() > -1e-12

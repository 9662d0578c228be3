"""Conversions between covariance matrices and Fock-space elements.

The Weyl operator W(xi) is taken as the displacement D(z) with
z = (xi_1 + i xi_2)/sqrt2. For a centered Gaussian state the characteristic
function is chi(xi) = exp(-xi^T Sigma Gamma Sigma^T xi / 4), and Fock elements
are Gaussian integrals of products of Weyl matrix elements.
"""
from __future__ import annotations

from math import comb, factorial, lgamma, sqrt

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import eval_genlaguerre

from . import kernels
from .errors import ConfigError, NumericalError, SingularMatrixError, UnphysicalStateError
from .fock import FockDensityMatrix, as_density, partial_trace
from .gaussian import GaussianState, is_physical, symplectic_form

DEFAULT_MOMENT_BOUND = 12
SIGMA_KEYS = ("1010", "0101", "1001", "2000", "0200", "1100")


def _gamma(x) -> np.ndarray:
    return x.covariance if isinstance(x, GaussianState) else np.asarray(x, dtype=float)


def b_matrix(gamma) -> np.ndarray:
    """B = (Gamma + 1)^{-1}."""
    g = _gamma(gamma)
    return np.linalg.inv(g + np.eye(g.shape[0]))


# -- Weyl matrix elements ---------------------------------------------------

def weyl_element(m: int, n: int, xi) -> complex:
    """<m| W(xi) |n> for a single mode."""
    return complex(weyl_matrix(max(m, n), xi)[m, n])


def weyl_matrix(cutoff: int, xi) -> np.ndarray:
    """Matrix <m|W(xi)|n> for m, n <= cutoff; ``xi`` may carry leading grid axes.

    Returns an array of shape xi.shape[:-1] + (cutoff+1, cutoff+1).
    """
    xi = np.asarray(xi, dtype=float)
    z = (xi[..., 0] + 1j * xi[..., 1]) / np.sqrt(2.0)
    t = np.abs(z) ** 2
    env = np.exp(-t / 2)
    out = np.empty(z.shape + (cutoff + 1, cutoff + 1), dtype=complex)
    for m in range(cutoff + 1):
        for n in range(cutoff + 1):
            if m >= n:
                k = m - n
                pref = np.exp(0.5 * (lgamma(n + 1) - lgamma(m + 1)))
                out[..., m, n] = pref * z ** k * eval_genlaguerre(n, k, t) * env
            else:
                k = n - m
                pref = np.exp(0.5 * (lgamma(m + 1) - lgamma(n + 1)))
                out[..., m, n] = pref * (-np.conj(z)) ** k * eval_genlaguerre(m, k, t) * env
    return out


def _weyl_polynomial(m: int, n: int) -> tuple[float, np.ndarray]:
    """Coefficients P[i, j] of x^i y^j with <m|W|n> = pref * P(x, y) * e^{-|z|^2/2}."""
    if m >= n:
        k, low, sgn = m - n, n, 1.0
        pref = sqrt(factorial(n) / factorial(m))
    else:
        k, low, sgn = n - m, m, -1.0
        pref = sqrt(factorial(m) / factorial(n))
    deg = k + 2 * low
    # z^k or (-conj z)^k with z = (x + i y)/sqrt2
    zk = np.zeros((deg + 1, deg + 1), dtype=complex)
    for j in range(k + 1):
        zk[k - j, j] = comb(k, j) * (sgn ** (k - j)) * (1j ** j) / 2 ** (k / 2)
    # L_low^{(k)}(|z|^2), |z|^2 = (x^2 + y^2)/2
    lag = np.zeros((deg + 1, deg + 1), dtype=complex)
    for q in range(low + 1):
        c = (-1) ** q * comb(low + k, low - q) / factorial(q) / 2 ** q
        for u in range(q + 1):
            lag[2 * u, 2 * (q - u)] += c * comb(q, u)
    poly = np.zeros((deg + 1, deg + 1), dtype=complex)
    for i, j in zip(*np.nonzero(zk)):
        poly[i:, j:] += zk[i, j] * lag[:deg + 1 - i, :deg + 1 - j]
    return pref, poly


# -- moments ---------------------------------------------------------------

def moment_covariance(gamma) -> np.ndarray:
    """Covariance 2 Sigma B Sigma^T of the xi-integrand."""
    g = _gamma(gamma)
    sig = symplectic_form(g.shape[0] // 2)
    return 2.0 * sig @ b_matrix(g) @ sig.T


def isserlis_moment(cov, powers) -> float:
    """E[prod xi_i^{p_i}] by explicit enumeration of pair partitions.

    Cost grows as (2k-1)!! for total degree 2k; kept as a reference for the
    recursive evaluation used in production.
    """
    labels = [i for i, p in enumerate(powers) for _ in range(p)]
    if len(labels) % 2:
        return 0.0

    def rec(items):
        if not items:
            return 1.0
        first, rest = items[0], items[1:]
        total = 0.0
        for j in range(len(rest)):
            c = cov[first, rest[j]]
            if c != 0.0:
                total += c * rec(rest[:j] + rest[j + 1:])
        return total

    return float(rec(labels))


def gaussian_moments(cov, max_power: int, backend=None) -> np.ndarray:
    """Table E[xi_1^i xi_2^j xi_3^k xi_4^l] for all powers <= max_power."""
    return np.real(kernels.wick_table(np.asarray(cov, dtype=float), (max_power,) * 4, backend))


def _check_gamma(g, tol=1e-9):
    if g.shape != (4, 4):
        raise ValueError("two-mode covariance matrix expected")
    if not is_physical(g, tol):
        raise UnphysicalStateError("covariance matrix is not physical")


def gaussian_fock_element(gamma, a: int, b: int, c: int, d: int,
                          moment_bound: int = DEFAULT_MOMENT_BOUND, _moments=None) -> complex:
    """<a, b| rho |c, d> of the centered two-mode Gaussian state with covariance Gamma.

    The Weyl-element integrand is expanded into monomials in xi and reduced
    to Gaussian moments of covariance 2 Sigma B Sigma^T.
    """
    g = _gamma(gamma)
    _check_gamma(g)
    total = a + b + c + d
    if total > moment_bound:
        raise ConfigError(f"element degree {total} exceeds the moment bound {moment_bound}")
    if total % 2:
        return 0.0j
    rho0 = 4.0 / np.sqrt(np.linalg.det(g + np.eye(4)))
    p1, poly1 = _weyl_polynomial(a, c)
    p2, poly2 = _weyl_polynomial(b, d)
    need = max(poly1.shape[0], poly2.shape[0]) - 1
    mom = _moments if _moments is not None else gaussian_moments(moment_covariance(g), need)
    n1, n2 = poly1.shape[0], poly2.shape[0]
    val = np.einsum("ij,ijkl,kl->", poly1, mom[:n1, :n1, :n2, :n2], poly2)
    return complex(rho0 * p1 * p2 * val)


# -- full conversion --------------------------------------------------------

_W = np.array([[1, 1j, 0, 0], [0, 0, 1, 1j], [1, -1j, 0, 0], [0, 0, 1, -1j]]) / np.sqrt(2)


def generating_kernel(gamma) -> tuple[float, np.ndarray]:
    """(rho_0000, A) with <alpha|rho|beta> e^{(|alpha|^2+|beta|^2)/2} = rho_0000 exp(v^T A v / 2).

    v = (alpha_1*, alpha_2*, beta_1, beta_2). A follows from the Husimi
    covariance Q = W (Gamma + 1) W^dag / 2 of (a_1, a_2, a_1^dag, a_2^dag).
    """
    g = _gamma(gamma)
    q = 0.5 * _W @ (g + np.eye(4)) @ _W.conj().T
    x = np.block([[np.zeros((2, 2)), np.eye(2)], [np.eye(2), np.zeros((2, 2))]])
    m = (np.eye(4) - np.linalg.inv(q)) @ x
    A = 0.5 * (m + m.T)
    rho0 = 1.0 / np.sqrt(np.real(np.linalg.det(q)))
    return float(rho0), A


def gaussian_to_fock(gamma, cutoff: int, backend=None) -> FockDensityMatrix:
    """Fock matrix of the centered Gaussian state up to ``cutoff`` per mode.

    Uses the generating-function recursion for all elements at once; the
    element-by-element moment route gives the same numbers at low degree but
    loses precision at high photon numbers.
    """
    g = _gamma(gamma)
    _check_gamma(g)
    rho0, A = generating_kernel(g)
    H = kernels.wick_table(A, (cutoff,) * 4, backend)
    lf = np.array([lgamma(k + 1) for k in range(cutoff + 1)])
    w = np.exp(-0.5 * (lf[:, None, None, None] + lf[None, :, None, None]
                       + lf[None, None, :, None] + lf[None, None, None, :]))
    # H is indexed (alpha_1*, alpha_2*, beta_1, beta_2) = (a, b, c, d)
    ent = rho0 * H * w
    ent = 0.5 * (ent + np.conj(ent.transpose(2, 3, 0, 1)))
    rho = FockDensityMatrix(ent)
    return FockDensityMatrix(ent, max(0.0, 1.0 - rho.trace))


# -- six-element parametrization -------------------------------------------

def sigma_from_b(B) -> dict:
    """Normalized elements sigma = rho/rho_0000 from B = (Gamma+1)^{-1}."""
    B = np.asarray(B, dtype=float)
    b = lambda i, j: B[i - 1, j - 1]  # noqa: E731  (1-based as in the literature)
    r2 = 1.0 / np.sqrt(2.0)
    return {
        "1010": complex(1 - b(1, 1) - b(2, 2)),
        "0101": complex(1 - b(3, 3) - b(4, 4)),
        "1001": complex(-b(1, 3) - b(2, 4), b(1, 4) - b(2, 3)),
        "2000": complex(r2 * (-b(1, 1) + b(2, 2)), -2 * r2 * b(1, 2)),
        "0200": complex(r2 * (-b(3, 3) + b(4, 4)), -2 * r2 * b(3, 4)),
        "1100": complex(-b(1, 3) + b(2, 4), -(b(1, 4) + b(2, 3))),
    }


def covariance_to_sigma(gamma) -> dict:
    return sigma_from_b(b_matrix(gamma))


# Unknowns u = (B11, B22, B12, B33, B44, B34, B13, B24, B14, B23).
def _sigma_linear_map():
    rows = []
    rhs = []
    r2 = 1.0 / np.sqrt(2.0)

    def row(**coef):
        names = ["B11", "B22", "B12", "B33", "B44", "B34", "B13", "B24", "B14", "B23"]
        return [coef.get(n, 0.0) for n in names]

    # sigma - constant = M u, split into real/imag parts
    rows += [row(B11=-1, B22=-1)]; rhs += [("1010", "re", 1.0)]  # noqa: E702
    rows += [row(B33=-1, B44=-1)]; rhs += [("0101", "re", 1.0)]  # noqa: E702
    rows += [row(B13=-1, B24=-1)]; rhs += [("1001", "re", 0.0)]  # noqa: E702
    rows += [row(B14=1, B23=-1)]; rhs += [("1001", "im", 0.0)]  # noqa: E702
    rows += [row(B11=-r2, B22=r2)]; rhs += [("2000", "re", 0.0)]  # noqa: E702
    rows += [row(B12=-2 * r2)]; rhs += [("2000", "im", 0.0)]  # noqa: E702
    rows += [row(B33=-r2, B44=r2)]; rhs += [("0200", "re", 0.0)]  # noqa: E702
    rows += [row(B34=-2 * r2)]; rhs += [("0200", "im", 0.0)]  # noqa: E702
    rows += [row(B13=-1, B24=1)]; rhs += [("1100", "re", 0.0)]  # noqa: E702
    rows += [row(B14=-1, B23=-1)]; rhs += [("1100", "im", 0.0)]  # noqa: E702
    return np.array(rows), rhs


_SIGMA_M, _SIGMA_RHS = _sigma_linear_map()


def sigma_to_covariance(sigma) -> np.ndarray:
    """Gamma from the six normalized elements (dict keyed like '1010' or a sequence).

    Solves the linear relations for B's ten independent entries, then
    Gamma = B^{-1} - 1.
    """
    if not isinstance(sigma, dict):
        sigma = dict(zip(SIGMA_KEYS, sigma))
    missing = set(SIGMA_KEYS) - set(sigma)
    if missing:
        raise ValueError(f"missing sigma elements {sorted(missing)}")
    y = np.array([(getattr(complex(sigma[key]), "real" if part == "re" else "imag")) - const
                  for key, part, const in _SIGMA_RHS])
    u = np.linalg.solve(_SIGMA_M, y)
    B11, B22, B12, B33, B44, B34, B13, B24, B14, B23 = u
    B = np.array([
        [B11, B12, B13, B14],
        [B12, B22, B23, B24],
        [B13, B23, B33, B34],
        [B14, B24, B34, B44],
    ])
    if abs(np.linalg.det(B)) < 1e-14 * max(1.0, np.max(np.abs(B))) ** 4:
        raise SingularMatrixError("B matrix is singular; the elements describe the null state")
    return np.linalg.inv(B) - np.eye(4)


def sigma_from_state(rho: FockDensityMatrix) -> dict:
    e = rho.entries
    r0 = e[0, 0, 0, 0]
    return {k: complex(e[tuple(int(ch) for ch in k)] / r0) for k in SIGMA_KEYS}


# -- phase-space functions --------------------------------------------------

def characteristic_function(state, xi) -> complex | np.ndarray:
    """chi(xi) = Tr[rho W(xi)] of the normalized state; xi has 2 or 4 trailing entries."""
    rho = as_density(state)
    xi = np.asarray(xi, dtype=float)
    n = rho.cutoff
    e = rho.entries / rho.trace
    if rho.n_modes == 1:
        if xi.shape[-1] != 2:
            raise ValueError("single-mode characteristic function takes a 2-vector")
        w = weyl_matrix(n, xi)
        val = np.einsum("ac,...ca->...", e, w)
    else:
        if xi.shape[-1] != 4:
            raise ValueError("two-mode characteristic function takes a 4-vector")
        w1 = weyl_matrix(n, xi[..., :2])
        w2 = weyl_matrix(n, xi[..., 2:])
        val = np.einsum("abcd,...ca,...db->...", e, w1, w2)
    return complex(val) if np.ndim(val) == 0 else val


def wigner(state, xmax: float = 4.0, n_points: int = 81, eta_max: float = 10.0,
           eta_points: int = 201, check_norm: bool = True):
    """Wigner function of a single-mode state on an n_points^2 grid over [-xmax, xmax]^2.

    W(X, P) = (2 pi)^{-2} int exp(-i (eta_2 X - eta_1 P)) chi(eta) d^2 eta, evaluated by
    trapezoidal quadrature on an eta-grid over [-eta_max, eta_max]^2.
    Returns (x, p, W) with W[i, j] = W(x[i], p[j]).
    """
    rho = as_density(state)
    if rho.n_modes != 1:
        raise ValueError("wigner needs a single-mode state; take partial_trace first")
    eta = np.linspace(-eta_max, eta_max, eta_points)
    h = eta[1] - eta[0]
    wt = np.full(eta_points, h)
    wt[0] = wt[-1] = h / 2
    e1, e2 = np.meshgrid(eta, eta, indexing="ij")
    chi = characteristic_function(rho, np.stack([e1, e2], axis=-1))
    x = np.linspace(-xmax, xmax, n_points)
    p = np.linspace(-xmax, xmax, n_points)
    # the Weyl elements are those of D(z), z = (eta_1 + i eta_2)/sqrt2 = exp(i(eta_2 X - eta_1 P))
    ex = np.exp(-1j * np.outer(x, eta)) * wt    # [X, eta_2]
    ep = np.exp(1j * np.outer(p, eta)) * wt     # [P, eta_1]
    field = ep @ chi @ ex.T                      # [P, X]
    W = np.real(field.T) / (2 * np.pi) ** 2
    if check_norm:
        dx = x[1] - x[0]
        norm = trapezoid(trapezoid(W, dx=dx, axis=1), dx=dx)
        if abs(norm - 1.0) > 1e-3:
            raise NumericalError(f"Wigner grid too coarse: integral {norm:.6f} deviates from 1 by more than 1e-3")
    return x, p, W


def single_mode_moments(rho: FockDensityMatrix) -> np.ndarray:
    """Covariance matrix of a single-mode state from <a^dag a> and <a^2>."""
    e = rho.entries / rho.trace
    n = rho.cutoff
    k = np.arange(n + 1)
    nbar = float(np.real(np.sum(k * np.diagonal(e))))
    a1 = complex(np.sum(np.sqrt(k[1:]) * np.diagonal(e, offset=1)))      # <a>
    a2 = complex(np.sum(np.sqrt(k[2:] * k[1:-1]) * np.diagonal(e, offset=2)))  # <a^2>
    # Gamma in (X, P) from <a^2>, <a^dag a> with displacement removed
    da2 = a2 - a1 ** 2
    dn = nbar - abs(a1) ** 2
    gxx = 2 * dn + 1 + 2 * da2.real
    gpp = 2 * dn + 1 - 2 * da2.real
    gxp = 2 * da2.imag
    d = np.sqrt(2) * np.array([a1.real, a1.imag])
    return np.array([[gxx, gxp], [gxp, gpp]]), d


def gaussian_wigner(gamma, d, x, p) -> np.ndarray:
    X, P = np.meshgrid(x, p, indexing="ij")
    v = np.stack([X - d[0], P - d[1]], axis=-1)
    inv = np.linalg.inv(gamma)
    q = np.einsum("...i,ij,...j->...", v, inv, v)
    return np.exp(-q) / (np.pi * np.sqrt(np.linalg.det(gamma)))


def nongaussianity(state, mode_kept: int = 0, **grid) -> float:
    """L2 distance between the Wigner function of one mode and its moment-matched Gaussian."""
    rho = as_density(state)
    if rho.n_modes == 2:
        rho = partial_trace(rho, 1 - mode_kept)
    x, p, W = wigner(rho, **grid)
    gamma, d = single_mode_moments(rho)
    G = gaussian_wigner(gamma, d, x, p)
    dx = x[1] - x[0]
    return float(np.sqrt(np.sum((W - G) ** 2) * dx * dx))

"""Gaussian states in the covariance-matrix picture.

Conventions: X = (a + a^dag)/sqrt2, P = -i(a - a^dag)/sqrt2, quadratures ordered
(X1, P1, X2, P2, ...), covariance Gamma_jk = <{dR_j, dR_k}> so the vacuum has
Gamma = identity. All logarithms are base 2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnphysicalStateError

DEFAULT_TOL = 1e-9


def symplectic_form(n_modes: int) -> np.ndarray:
    """Direct sum of ``n_modes`` copies of [[0, 1], [-1, 0]]."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _check_square_even(m: np.ndarray, name: str) -> int:
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
        raise ValueError(f"{name} must be a square matrix of even dimension, got shape {m.shape}")
    return m.shape[0] // 2


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Covariance matrix plus displacement vector of an n-mode Gaussian state."""

    covariance: np.ndarray
    displacement: np.ndarray | None = None

    def __post_init__(self):
        gamma = np.array(self.covariance, dtype=float)
        n = _check_square_even(gamma, "covariance")
        scale = max(1.0, np.max(np.abs(gamma)))
        if np.max(np.abs(gamma - gamma.T)) > 1e-9 * scale:
            raise ValueError("covariance matrix is not symmetric")
        gamma = 0.5 * (gamma + gamma.T)
        d = np.zeros(2 * n) if self.displacement is None else np.array(self.displacement, dtype=float)
        if d.shape != (2 * n,):
            raise ValueError(f"displacement must have length {2 * n}")
        gamma.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "covariance", gamma)
        object.__setattr__(self, "displacement", d)

    @property
    def n_modes(self) -> int:
        return self.covariance.shape[0] // 2

    def __repr__(self):
        return f"GaussianState(n_modes={self.n_modes})"


@dataclass(frozen=True, eq=False)
class SymplecticOp:
    """Real symplectic matrix S with S^T Sigma S = Sigma."""

    matrix: np.ndarray

    def __post_init__(self):
        s = np.array(self.matrix, dtype=float)
        n = _check_square_even(s, "symplectic matrix")
        sig = symplectic_form(n)
        scale = max(1.0, np.linalg.norm(s) ** 2)
        if np.max(np.abs(s.T @ sig @ s - sig)) > 1e-9 * scale:
            raise ValueError("matrix does not preserve the symplectic form")
        s.setflags(write=False)
        object.__setattr__(self, "matrix", s)

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def __matmul__(self, other: "SymplecticOp") -> "SymplecticOp":
        return SymplecticOp(self.matrix @ other.matrix)

    def on_modes(self, modes, n_modes: int) -> "SymplecticOp":
        """Embed this operation into an ``n_modes`` system acting on ``modes``."""
        modes = list(modes)
        if len(modes) != self.n_modes or len(set(modes)) != len(modes):
            raise ValueError("mode list does not match the operation size")
        if any(m < 0 or m >= n_modes for m in modes):
            raise ValueError("mode index out of range")
        idx = np.array([[2 * m, 2 * m + 1] for m in modes]).ravel()
        big = np.eye(2 * n_modes)
        big[np.ix_(idx, idx)] = self.matrix
        return SymplecticOp(big)


# -- constructors -----------------------------------------------------------

def vacuum(n_modes: int = 1) -> GaussianState:
    return GaussianState(np.eye(2 * n_modes))


def thermal(nbar: float) -> GaussianState:
    """Single-mode thermal state with mean photon number ``nbar``."""
    if nbar < 0:
        raise ValueError("mean photon number must be non-negative")
    return GaussianState((2 * nbar + 1) * np.eye(2))


def coherent(alpha: complex) -> GaussianState:
    alpha = complex(alpha)
    return GaussianState(np.eye(2), np.sqrt(2) * np.array([alpha.real, alpha.imag]))


def squeezed_vacuum(r: float) -> GaussianState:
    """Vacuum squeezed in P for r > 0: Gamma = diag(e^{2r}, e^{-2r})."""
    return apply(make_squeezer(r), vacuum(1))


def make_tmss(r: float, phi: float = 0.0) -> GaussianState:
    """Two-mode squeezed vacuum with Schmidt amplitudes (-e^{i phi} tanh r)^n.

    At phi = 0 the X-X correlation is -sinh 2r and the P-P correlation +sinh 2r.
    A nonzero phi rotates both modes by phi/2.
    """
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    gamma = np.array([
        [c, 0.0, -s, 0.0],
        [0.0, c, 0.0, s],
        [-s, 0.0, c, 0.0],
        [0.0, s, 0.0, c],
    ])
    state = GaussianState(gamma)
    if phi:
        rot = make_phase_shift(phi / 2)
        both = rot.on_modes([0], 2) @ rot.on_modes([1], 2)
        state = apply(both, state)
    return state


def make_phase_shift(phi: float) -> SymplecticOp:
    """Rotation R(phi) = [[cos, -sin], [sin, cos]] generated by exp(i phi n)."""
    c, s = np.cos(phi), np.sin(phi)
    return SymplecticOp(np.array([[c, -s], [s, c]]))


def make_beam_splitter(T: float, R: float, tol: float = 1e-12) -> SymplecticOp:
    """Real beam splitter ((T 1, -R 1), (R 1, T 1)) on two modes."""
    if abs(T * T + R * R - 1.0) > tol:
        raise ValueError(f"beam splitter requires T^2 + R^2 = 1, got {T * T + R * R!r}")
    eye = np.eye(2)
    return SymplecticOp(np.block([[T * eye, -R * eye], [R * eye, T * eye]]))


def make_squeezer(r: float) -> SymplecticOp:
    return SymplecticOp(np.diag([np.exp(r), np.exp(-r)]))


# -- transformations --------------------------------------------------------

def apply(op: SymplecticOp, state: GaussianState, modes=None) -> GaussianState:
    """Gamma -> S Gamma S^T, d -> S d. ``modes`` embeds a smaller op."""
    if modes is not None:
        op = op.on_modes(modes, state.n_modes)
    if op.n_modes != state.n_modes:
        raise ValueError("operation and state act on different numbers of modes")
    s = op.matrix
    return GaussianState(s @ state.covariance @ s.T, s @ state.displacement)


def _mode_mask(n_modes: int, modes) -> np.ndarray:
    if modes is None:
        modes = range(n_modes)
    modes = list(modes)
    if any(m < 0 or m >= n_modes for m in modes):
        raise ValueError("mode index out of range")
    mask = np.zeros(2 * n_modes, dtype=bool)
    for m in modes:
        mask[2 * m:2 * m + 2] = True
    return mask


def absorb(state: GaussianState, tau: float, modes=None) -> GaussianState:
    """Pure-loss channel with transmission ``tau`` on ``modes`` (default all).

    Equivalent to mixing each selected mode with vacuum at T = sqrt(tau) and
    discarding the reflected port.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {tau!r}")
    mask = _mode_mask(state.n_modes, modes)
    scale = np.where(mask, np.sqrt(tau), 1.0)
    gamma = state.covariance * np.outer(scale, scale)
    gamma[mask, mask] += 1.0 - tau
    return GaussianState(gamma, state.displacement * scale)


def reduced(state: GaussianState, modes) -> GaussianState:
    """Marginal state of the listed modes."""
    idx = np.array([[2 * m, 2 * m + 1] for m in modes]).ravel()
    return GaussianState(state.covariance[np.ix_(idx, idx)], state.displacement[idx])


def partial_transpose(state: GaussianState, modes) -> GaussianState:
    """Time reversal (P -> -P) on ``modes``."""
    flip = np.ones(2 * state.n_modes)
    for m in modes:
        flip[2 * m + 1] = -1.0
    return GaussianState(state.covariance * np.outer(flip, flip), state.displacement * flip)


# -- measures ---------------------------------------------------------------

def _gamma_of(x) -> np.ndarray:
    return x.covariance if isinstance(x, GaussianState) else np.asarray(x, dtype=float)


def is_physical(state, tol: float = DEFAULT_TOL) -> bool:
    """True iff Gamma + i Sigma is positive semidefinite (to ``-tol``)."""
    gamma = _gamma_of(state)
    n = _check_square_even(gamma, "covariance")
    eig = np.linalg.eigvalsh(gamma + 1j * symplectic_form(n))
    return bool(eig.min() >= -tol)


def _require_physical(gamma: np.ndarray, tol: float = DEFAULT_TOL):
    if not is_physical(gamma, tol):
        raise UnphysicalStateError("covariance matrix violates the uncertainty relation")


def symplectic_eigenvalues(gamma, pair_tol: float = 1e-8) -> np.ndarray:
    """Moduli of the eigenvalues of Sigma Gamma, one per conjugate pair, ascending."""
    gamma = _gamma_of(gamma)
    n = _check_square_even(gamma, "covariance")
    ev = np.sort(np.abs(np.linalg.eigvals(symplectic_form(n) @ gamma)))
    a, b = ev[0::2], ev[1::2]
    if np.any(np.abs(a - b) > pair_tol * np.maximum(1.0, b)):
        raise np.linalg.LinAlgError("eigenvalues of Sigma Gamma do not come in pairs")
    return 0.5 * (a + b)


def log_negativity_gaussian(state: GaussianState, partition=(0,), tol: float = DEFAULT_TOL) -> float:
    """E_N = sum_k max(-log2 g'_k, 0) over the partially transposed spectrum."""
    _require_physical(state.covariance, tol)
    gp = symplectic_eigenvalues(partial_transpose(state, partition).covariance)
    return float(np.sum(np.maximum(-np.log2(gp), 0.0)))


def _entropy_term(g: np.ndarray) -> np.ndarray:
    g = np.maximum(g, 1.0)
    plus, minus = (g + 1) / 2, (g - 1) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = plus * np.log2(plus) - np.where(minus > 0, minus * np.log2(np.where(minus > 0, minus, 1.0)), 0.0)
    return t


def vn_entropy_gaussian(gamma, tol: float = DEFAULT_TOL) -> float:
    gamma = _gamma_of(gamma)
    _require_physical(gamma, tol)
    return float(np.sum(_entropy_term(symplectic_eigenvalues(gamma))))


def linear_entropy_gaussian(gamma, tol: float = DEFAULT_TOL) -> float:
    """1 - purity, with purity = det(Gamma)^{-1/2}."""
    gamma = _gamma_of(gamma)
    _require_physical(gamma, tol)
    return float(1.0 - 1.0 / np.sqrt(np.linalg.det(gamma)))


def lossy_tmss_log_negativity(r: float, tau: float) -> float:
    """Closed form for a TMSS sent through loss tau on both modes."""
    return float(-np.log2(1.0 - tau * (1.0 - np.exp(-2.0 * r))))

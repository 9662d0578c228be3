"""Truncated Fock-space states of one or two optical modes.

Two-mode density matrices are stored as 4-index arrays ``rho[a, b, c, d]`` for
the element <a, b| rho |c, d>; single-mode ones as ``rho[a, c]``. The matrix view
flattens ket and bra indices row-major, so basis state |a, b> sits at a*(N+1)+b.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb, factorial, sqrt

import numpy as np

from .errors import CutoffOverflowError, PositivityError

DEFAULT_CUTOFF = 10
DEFAULT_TRUNCATION_BOUND = 1e-6
EIG_CLIP = -1e-10
DUMP_THRESHOLD = 1e-14

REAL_ANTISYMMETRIC = "real-antisymmetric"
SYMMETRIC_I = "symmetric-i"


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    entries: np.ndarray
    truncated_weight: float = 0.0

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        if e.ndim not in (2, 4) or len(set(e.shape)) != 1:
            raise ValueError(f"entries must be a (N+1)^2 or (N+1)^4 array, got shape {e.shape}")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n_modes(self) -> int:
        return self.entries.ndim // 2

    @property
    def cutoff(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** self.n_modes

    @cached_property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix())))

    def matrix(self) -> np.ndarray:
        return self.entries.reshape(self.dim, self.dim)

    @classmethod
    def from_matrix(cls, mat, n_modes: int, truncated_weight: float = 0.0):
        mat = np.asarray(mat)
        side = int(round(mat.shape[0] ** (1.0 / n_modes)))
        return cls(mat.reshape((side,) * (2 * n_modes)), truncated_weight)

    def normalized(self) -> "FockDensityMatrix":
        tr = self.trace
        if not tr > 0:
            raise PositivityError("state has non-positive trace")
        return FockDensityMatrix(self.entries / tr, self.truncated_weight)

    def with_cutoff(self, cutoff: int) -> "FockDensityMatrix":
        """Zero-pad or truncate to a new cutoff (truncation drops the weight)."""
        n = self.cutoff
        shape = (cutoff + 1,) * self.entries.ndim
        out = np.zeros(shape, dtype=complex)
        k = min(n, cutoff) + 1
        out[(slice(0, k),) * self.entries.ndim] = self.entries[(slice(0, k),) * self.entries.ndim]
        lost = max(self.trace - float(np.real(np.trace(out.reshape((cutoff + 1) ** self.n_modes, -1)))), 0.0)
        return FockDensityMatrix(out, self.truncated_weight + lost)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        m = self.matrix()
        return bool(np.max(np.abs(m - m.conj().T)) <= tol * max(1.0, np.max(np.abs(m))))

    def eigenvalues(self) -> np.ndarray:
        m = self.matrix()
        return np.linalg.eigvalsh(0.5 * (m + m.conj().T))

    def purity(self) -> float:
        m = self.matrix() / self.trace
        return float(np.real(np.vdot(m, m)))

    def __repr__(self):
        return f"FockDensityMatrix(n_modes={self.n_modes}, cutoff={self.cutoff}, trace={self.trace:.6g})"


@dataclass(frozen=True, eq=False)
class FockPureVector:
    amplitudes: np.ndarray
    truncated_weight: float = 0.0

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.ndim not in (1, 2) or len(set(a.shape)) != 1:
            raise ValueError(f"amplitudes must be (N+1,) or (N+1, N+1), got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("amplitudes must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def n_modes(self) -> int:
        return self.amplitudes.ndim

    @property
    def cutoff(self) -> int:
        return self.amplitudes.shape[0] - 1

    @cached_property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "FockPureVector":
        return FockPureVector(self.amplitudes / self.norm, self.truncated_weight)

    def to_density(self) -> FockDensityMatrix:
        a = self.amplitudes
        return FockDensityMatrix(np.multiply.outer(a, a.conj()), self.truncated_weight)


def as_density(state) -> FockDensityMatrix:
    return state.to_density() if isinstance(state, FockPureVector) else state


# -- constructors -----------------------------------------------------------

def fock_state(ns, cutoff: int) -> FockPureVector:
    """Number state |n1[, n2]> at the given cutoff."""
    ns = (ns,) if np.isscalar(ns) else tuple(ns)
    a = np.zeros((cutoff + 1,) * len(ns), dtype=complex)
    a[ns] = 1.0
    return FockPureVector(a)


def schmidt_state(alphas, cutoff: int | None = None) -> FockPureVector:
    """Unnormalized sum_n alpha_n |n, n>."""
    alphas = np.asarray(alphas, dtype=complex)
    n = len(alphas) - 1 if cutoff is None else cutoff
    a = np.zeros((n + 1, n + 1), dtype=complex)
    k = min(len(alphas), n + 1)
    a[np.arange(k), np.arange(k)] = alphas[:k]
    return FockPureVector(a)


def tmss_fock(r: float, phi: float = 0.0, cutoff: int = DEFAULT_CUTOFF) -> FockPureVector:
    """sech r sum_n (-e^{i phi} tanh r)^n |n, n>, truncated at ``cutoff``."""
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    t = np.tanh(r)
    n = np.arange(cutoff + 1)
    amps = (-np.exp(1j * phi) * t) ** n / np.cosh(r)
    return FockPureVector(np.diag(amps), truncated_weight=float(t ** (2 * (cutoff + 1))))


def product_state(rho1: FockDensityMatrix, rho2: FockDensityMatrix) -> FockDensityMatrix:
    if rho1.n_modes != 1 or rho2.n_modes != 1 or rho1.cutoff != rho2.cutoff:
        raise ValueError("product_state needs two single-mode states with equal cutoff")
    return FockDensityMatrix(np.einsum("ac,bd->abcd", rho1.entries, rho2.entries))


# -- linear optics ----------------------------------------------------------

def _bs_coefficients(T, R, convention):
    if convention == REAL_ANTISYMMETRIC:
        return np.array([[T, R], [-R, T]], dtype=complex)
    if convention == SYMMETRIC_I:
        return np.array([[T, 1j * R], [1j * R, T]], dtype=complex)
    raise ValueError(f"unknown beam-splitter convention {convention!r}")


def beam_splitter_matrix(T: float, R: float, cutoff_in: int, cutoff_out: int | None = None,
                         convention: str = REAL_ANTISYMMETRIC, tol: float = 1e-12) -> np.ndarray:
    """Fock matrix U[n1', n2', n1, n2] of a lossless two-mode beam splitter.

    Creation operators map as a1^dag -> u11 a1^dag + u12 a2^dag and
    a2^dag -> u21 a1^dag + u22 a2^dag, with u = [[T, R], [-R, T]] for the
    real-antisymmetric convention and [[T, iR], [iR, T]] for symmetric-i.
    """
    if abs(T * T + abs(R) ** 2 - 1.0) > tol:
        raise ValueError("beam splitter requires T^2 + |R|^2 = 1")
    if cutoff_out is None:
        cutoff_out = cutoff_in
    u = _bs_coefficients(T, R, convention)
    U = np.zeros((cutoff_out + 1, cutoff_out + 1, cutoff_in + 1, cutoff_in + 1), dtype=complex)
    fact = [float(factorial(k)) for k in range(2 * cutoff_in + 1)]
    for n1 in range(cutoff_in + 1):
        for n2 in range(cutoff_in + 1):
            norm = 1.0 / sqrt(fact[n1] * fact[n2])
            for j in range(n1 + 1):
                cj = comb(n1, j) * u[0, 0] ** (n1 - j) * u[0, 1] ** j
                for k in range(n2 + 1):
                    o1 = n1 - j + n2 - k
                    o2 = j + k
                    if o1 > cutoff_out or o2 > cutoff_out:
                        continue
                    ck = comb(n2, k) * u[1, 0] ** (n2 - k) * u[1, 1] ** k
                    U[o1, o2, n1, n2] += cj * ck * norm * sqrt(fact[o1] * fact[o2])
    return U


def beam_splitter_fock(state, T: float, R: float, mode_pair=(0, 1),
                       phase_convention: str = REAL_ANTISYMMETRIC,
                       max_truncation: float = DEFAULT_TRUNCATION_BOUND):
    """Apply a beam splitter to a two-mode pure vector or density matrix.

    The cutoff is kept; weight pushed above it is added to ``truncated_weight``
    and a ``CutoffOverflowError`` is raised when it exceeds ``max_truncation``.
    """
    if state.n_modes != 2:
        raise ValueError("beam splitter needs a two-mode state")
    if tuple(mode_pair) not in ((0, 1), (1, 0)):
        raise ValueError("mode_pair must be (0, 1) or (1, 0)")
    n = state.cutoff
    U = beam_splitter_matrix(T, R, n, n, phase_convention)
    if tuple(mode_pair) == (1, 0):
        U = U.transpose(1, 0, 3, 2)
    if isinstance(state, FockPureVector):
        out = np.einsum("ABab,ab->AB", U, state.amplitudes)
        lost = max(state.norm ** 2 - float(np.sum(np.abs(out) ** 2)), 0.0)
        rel = lost / state.norm ** 2 if state.norm > 0 else 0.0
        result = FockPureVector(out, state.truncated_weight + rel)
    else:
        out = np.einsum("ABab,abcd,CDcd->ABCD", U, state.entries, U.conj())
        result = FockDensityMatrix(out)
        lost = max(state.trace - result.trace, 0.0)
        rel = lost / state.trace if state.trace > 0 else 0.0
        result = FockDensityMatrix(out, state.truncated_weight + rel)
    if rel > max_truncation:
        raise CutoffOverflowError(f"beam splitter pushed weight {rel:.3g} above cutoff {n}")
    return result


# -- measurements and reductions -------------------------------------------

def vacuum_povm(eta: float, cutoff: int) -> np.ndarray:
    """Diagonal of the no-click POVM element sum_k (1-eta)^k |k><k|."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta!r}")
    k = np.arange(cutoff + 1)
    return np.where(k == 0, 1.0, (1.0 - eta) ** k)


def project_vacuum(state, mode: int, eta: float = 1.0):
    """No-click outcome of a detector with efficiency ``eta`` on ``mode``.

    Returns the unnormalized state of the remaining modes and the probability
    (its trace divided by the input trace).
    """
    rho = as_density(state)
    if mode not in range(rho.n_modes):
        raise ValueError(f"invalid mode index {mode!r}")
    w = vacuum_povm(eta, rho.cutoff)
    e = rho.entries
    if rho.n_modes == 1:
        val = np.sum(w * np.diagonal(e))
        out = FockDensityMatrix(np.array([[val]]))
        return out, float(np.real(val)) / rho.trace
    if mode == 0:
        red = np.einsum("k,kbkd->bd", w, e)
    else:
        red = np.einsum("k,akck->ac", w, e)
    out = FockDensityMatrix(red, rho.truncated_weight)
    return out, out.trace / rho.trace


def partial_trace(state, mode: int) -> FockDensityMatrix:
    """Trace out ``mode`` of a two-mode state."""
    rho = as_density(state)
    if rho.n_modes != 2:
        raise ValueError("partial trace needs a two-mode state")
    if mode == 1:
        return FockDensityMatrix(np.einsum("abcb->ac", rho.entries), rho.truncated_weight)
    if mode == 0:
        return FockDensityMatrix(np.einsum("abad->bd", rho.entries), rho.truncated_weight)
    raise ValueError(f"invalid mode index {mode!r}")


def partial_transpose(state) -> FockDensityMatrix:
    """Swap ket and bra indices of the second mode."""
    rho = as_density(state)
    return FockDensityMatrix(rho.entries.transpose(0, 3, 2, 1), rho.truncated_weight)


def log_negativity_fock(state) -> float:
    """log2 of the trace norm of the partial transpose of the normalized state."""
    rho = as_density(state)
    if rho.n_modes != 2:
        raise ValueError("log negativity needs a two-mode state")
    m = partial_transpose(rho).matrix() / rho.trace
    ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return float(np.log2(np.sum(np.abs(ev))))


def vn_entropy_fock(state) -> float:
    """von Neumann entropy (bits) of the normalized state."""
    rho = as_density(state)
    ev = rho.eigenvalues() / rho.trace
    if ev.min() < EIG_CLIP:
        raise PositivityError(f"state has eigenvalue {ev.min():.3g} below {EIG_CLIP}")
    ev = ev[ev > 0]
    return float(max(0.0, -np.sum(ev * np.log2(ev))))


def fidelity_with(state, target) -> float:
    """<psi| rho |psi> for normalized rho and psi."""
    rho = as_density(state)
    psi = target.amplitudes if isinstance(target, FockPureVector) else np.asarray(target, dtype=complex)
    v = psi.reshape(-1)
    val = np.real(np.vdot(v, rho.matrix() @ v)) / (rho.trace * np.real(np.vdot(v, v)))
    return float(min(max(val, 0.0), 1.0))


def mean_photon_numbers(state) -> np.ndarray:
    rho = as_density(state)
    n = np.arange(rho.cutoff + 1)
    if rho.n_modes == 1:
        return np.array([np.real(np.sum(n * np.diagonal(rho.entries))) / rho.trace])
    diag = np.real(np.einsum("abab->ab", rho.entries)) / rho.trace
    return np.array([np.sum(n[:, None] * diag), np.sum(n[None, :] * diag)])


def max_abs_difference(x: FockDensityMatrix, y: FockDensityMatrix) -> float:
    """Elementwise distance on the common block."""
    k = min(x.cutoff, y.cutoff) + 1
    sl = (slice(0, k),) * x.entries.ndim
    return float(np.max(np.abs(x.entries[sl] - y.entries[sl])))


# -- dump format ------------------------------------------------------------

def to_dump(state) -> dict:
    """JSON-ready dict {n_modes, cutoff, entries: [[a,b,c,d,re,im], ...]}."""
    rho = as_density(state)
    rows = []
    for idx in zip(*np.nonzero(np.abs(rho.entries) > DUMP_THRESHOLD)):
        v = rho.entries[idx]
        rows.append([int(i) for i in idx] + [float(v.real), float(v.imag)])
    return {"n_modes": rho.n_modes, "cutoff": rho.cutoff, "entries": rows}


def from_dump(data: dict) -> FockDensityMatrix:
    from .errors import ConfigError

    if not isinstance(data, dict):
        raise ConfigError("state dump must be a JSON object")
    unknown = set(data) - {"n_modes", "cutoff", "entries"}
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in state dump")
    for key in ("n_modes", "cutoff", "entries"):
        if key not in data:
            raise ConfigError(f"missing key {key!r} in state dump")
    n_modes, cutoff = data["n_modes"], data["cutoff"]
    if n_modes not in (1, 2):
        raise ConfigError("key 'n_modes' must be 1 or 2")
    if not isinstance(cutoff, int) or cutoff < 0:
        raise ConfigError("key 'cutoff' must be a non-negative integer")
    e = np.zeros((cutoff + 1,) * (2 * n_modes), dtype=complex)
    for row in data["entries"]:
        if len(row) != 2 * n_modes + 2:
            raise ConfigError(f"key 'entries' has a row of length {len(row)}, expected {2 * n_modes + 2}")
        idx = tuple(int(i) for i in row[:2 * n_modes])
        if any(i < 0 or i > cutoff for i in idx):
            raise ConfigError(f"key 'entries' has index {idx} beyond cutoff {cutoff}")
        e[idx] = complex(row[-2], row[-1])
    return FockDensityMatrix(e)

"""Procrustean concentration and the Gaussification protocol.

Protocol steps take trace-normalized states and return trace-normalized
outputs together with the success probability. The literature's convention of
fixing rho_0000 = 1 is available through ``vacuum_normalized``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, lgamma

import numpy as np

from . import bridge, kernels
from .errors import CutoffOverflowError, NullStateError, SingularMatrixError
from .fock import (
    DEFAULT_CUTOFF,
    DEFAULT_TRUNCATION_BOUND,
    FockDensityMatrix,
    FockPureVector,
    as_density,
    log_negativity_fock,
    schmidt_state,
    vn_entropy_fock,
)
from .gaussian import is_physical

CHANNEL_KINDS = ("none", "absorb", "dephase", "phase_diffuse")


@dataclass(frozen=True)
class ChannelSpec:
    """Decoherence acting on the stored pulses between iterations.

    ``absorb``: transmission theta in [0, 1]; ``dephase``: off-diagonal factor
    kappa in [0, 1]; ``phase_diffuse``: phase spread upsilon in radians.
    """

    kind: str = "none"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        p = float(self.param)
        if self.kind in ("absorb", "dephase") and not 0.0 <= p <= 1.0:
            raise ValueError(f"{self.kind} parameter must lie in [0, 1], got {p!r}")
        if self.kind == "phase_diffuse" and (p < 0 or not np.isfinite(p)):
            raise ValueError("phase_diffuse parameter must be a non-negative angle")

    @property
    def is_identity(self) -> bool:
        return (self.kind == "none" or (self.kind == "absorb" and self.param == 1.0)
                or (self.kind == "dephase" and self.param == 1.0)
                or (self.kind == "phase_diffuse" and self.param == 0.0))


@dataclass(frozen=True, eq=False)
class GaussifyStepResult:
    state: FockDensityMatrix
    probability: float
    truncated_weight: float


@dataclass(frozen=True)
class ProcrusteanConfig:
    r: float
    T: float
    tau: float = 1.0
    m: int = 1

    def __post_init__(self):
        if not 0.0 < self.T < 1.0:
            raise ValueError("transmittivity T must lie in (0, 1)")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.m < 0:
            raise ValueError("photon count m must be non-negative")


# -- helpers ----------------------------------------------------------------

def vacuum_normalized(rho: FockDensityMatrix) -> np.ndarray:
    """Elements rescaled so that rho_0000 = 1."""
    r0 = rho.entries[(0,) * rho.entries.ndim]
    if abs(r0) == 0:
        raise NullStateError("vacuum element vanishes")
    return rho.entries / r0


def support(entries: np.ndarray, tol: float = 0.0) -> int:
    """Largest photon number carrying a nonzero element."""
    mag = np.abs(entries)
    nz = np.nonzero(mag > tol)
    if len(nz[0]) == 0:
        return 0
    return int(max(int(np.max(ax)) for ax in nz))


def _trim(entries: np.ndarray) -> np.ndarray:
    k = support(entries) + 1
    return entries[(slice(0, k),) * entries.ndim]


def _as_two_mode(rho) -> FockDensityMatrix:
    rho = as_density(rho)
    if rho.n_modes != 2:
        raise ValueError("two-mode state expected")
    return rho


def mixed_example_state(lam: float, tau: float) -> FockDensityMatrix:
    """Small-squeezing output family of the Procrustean step on a lossy TMSS."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    eps = (1.0 - tau) / tau
    e = np.zeros((2, 2, 2, 2), dtype=complex)
    e[0, 0, 0, 0] = 1.0
    e[1, 1, 0, 0] = e[0, 0, 1, 1] = lam
    e[1, 1, 1, 1] = lam ** 2
    e[0, 1, 0, 1] = eps * lam ** 2
    return FockDensityMatrix(e).normalized()


def topure_example_state(eps: float) -> FockDensityMatrix:
    """Mixed input whose Gaussification limit is a pure TMSS with tanh r = -eps/2."""
    e = np.zeros((2, 2, 2, 2), dtype=complex)
    e[0, 0, 0, 0] = 1.0
    e[1, 1, 0, 0] = e[0, 0, 1, 1] = eps / 2.0
    e[1, 1, 1, 1] = eps ** 2
    return FockDensityMatrix(e).normalized()


# -- Procrustean step -------------------------------------------------------

def procrustean_amplitudes(r: float, T: float, m: int, cutoff: int) -> np.ndarray:
    """alpha_n(m) for n = 0..cutoff; Bob's mode then holds n + 1 - m photons."""
    R = np.sqrt(1.0 - T * T)
    t = np.tanh(r)
    out = np.zeros(cutoff + 1)

    def c(n, k):
        return comb(n, k) if 0 <= k <= n else 0

    for n in range(cutoff + 1):
        if n + 1 - m < 0:
            continue
        bracket = -R ** 2 * np.sqrt(float(c(n, m)) * (n + 1 - m)) + T ** 2 * np.sqrt(float(c(n, m - 1)) * m)
        if bracket == 0.0:
            continue
        out[n] = (-t) ** n * T ** (n - m) * R ** (m - 1) * bracket
    return out


def procrustean_pure(r: float, T: float, m: int = 1, cutoff: int = DEFAULT_CUTOFF):
    """Bob mixes his TMSS mode with one photon at transmittivity T; m photons are counted.

    Returns (normalized output state, probability of the m-photon event).
    """
    ProcrusteanConfig(r, T, 1.0, m)
    alpha = procrustean_amplitudes(r, T, m, cutoff + m)
    prob = float(np.sum(alpha ** 2) / np.cosh(r) ** 2)
    amps = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    kept = 0.0
    for n, a in enumerate(alpha):
        nb = n + 1 - m
        if a != 0.0 and n <= cutoff and 0 <= nb <= cutoff:
            amps[n, nb] = a
            kept += a * a
    total = float(np.sum(alpha ** 2))
    if total == 0.0:
        return FockPureVector(amps), 0.0
    if kept == 0.0:
        raise CutoffOverflowError(f"the {m}-photon output lies entirely above cutoff {cutoff}")
    state = FockPureVector(amps / np.sqrt(kept), truncated_weight=max(0.0, 1 - kept / total))
    return state, prob


def procrustean_lambda(r: float, tau: float, T: float) -> float:
    t = np.tanh(r)
    den = T * (t * t * (tau - 1.0) ** 2 - 1.0)
    if den == 0.0:
        raise ZeroDivisionError("lambda denominator vanishes")
    return float((2 * T * T - 1.0) * t * tau / den)


def procrustean_mixed_elements(r: float, tau: float, T: float) -> FockDensityMatrix:
    """Zero/one-photon block of the one-photon Procrustean output on a lossy TMSS.

    Both modes pass a loss channel of transmission tau; elements are
    unnormalized with rho_0000 = 1. With t = tanh r and u = t^2 (1-tau)^2:
    rho_1100 = lambda, rho_1111 = lambda^2 (1+u), rho_0101 = eps lambda^2 (1-u),
    rho_1010 = t^2 tau (1-tau) / (1-u); the remaining block elements vanish.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    ProcrusteanConfig(r, T, tau, 1)
    t = np.tanh(r)
    u = t * t * (1.0 - tau) ** 2
    lam = procrustean_lambda(r, tau, T)
    eps = (1.0 - tau) / tau
    e = np.zeros((2, 2, 2, 2), dtype=complex)
    e[0, 0, 0, 0] = 1.0
    e[1, 1, 0, 0] = e[0, 0, 1, 1] = lam
    e[1, 1, 1, 1] = lam ** 2 * (1 + u)
    e[0, 1, 0, 1] = eps * lam ** 2 * (1 - u)
    e[1, 0, 1, 0] = t * t * tau * (1 - tau) / (1 - u)
    return FockDensityMatrix(e)


# -- Gaussification: pure ---------------------------------------------------

def gaussify_pure_step(alpha, cutoff: int | None = None):
    """alpha'_n = 2^{-n} sum_r C(n, r) alpha_r alpha_{n-r}.

    Returns (alpha', probability) with probability = ||alpha'||^2 / ||alpha||^4.
    ``cutoff`` truncates the output (default keeps all 2N+1 coefficients).
    """
    a = np.asarray(alpha, dtype=complex)
    if a.ndim != 1 or len(a) == 0:
        raise ValueError("alpha must be a non-empty 1-D sequence")
    if a[0] == 0:
        raise NullStateError("alpha_0 must be nonzero")
    n_in = len(a) - 1
    full = np.zeros(2 * n_in + 1, dtype=complex)
    for n in range(2 * n_in + 1):
        acc = 0.0j
        for r in range(max(0, n - n_in), min(n, n_in) + 1):
            acc += comb(n, r) * a[r] * a[n - r]
        full[n] = acc / 2.0 ** n
    prob = float(np.sum(np.abs(full) ** 2) / np.sum(np.abs(a) ** 2) ** 2)
    if cutoff is not None:
        full = full[:cutoff + 1]
    return full, prob


# -- Gaussification: mixed --------------------------------------------------

def _bilinear(rho: FockDensityMatrix, sigma: FockDensityMatrix, eta: float, out_cutoff,
              max_truncation, backend):
    if rho.cutoff != sigma.cutoff:
        raise ValueError("inputs must share the same cutoff")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("detector efficiency must lie in [0, 1]")
    for s in (rho, sigma):
        if not s.trace > 0:
            raise NullStateError("input state has zero trace")
    n_out = rho.cutoff if out_cutoff is None else int(out_cutoff)
    norm_in = rho.trace * sigma.trace
    n_sup = max(support(rho.entries), support(sigma.entries))
    a = rho.entries[(slice(0, n_sup + 1),) * 4]
    b = sigma.entries[(slice(0, n_sup + 1),) * 4]
    block_n = min(n_out, 2 * n_sup)
    dropped = 0.0
    if eta == 1.0:
        block = kernels.gaussify_block(a, b, block_n, backend)
        diag = kernels.gaussify_diagonal(a, b, 2 * n_sup, backend)
        total = float(np.real(np.sum(diag)))
    else:
        block, dropped = kernels.inefficient_block(a, b, eta, block_n, backend=backend)
        full, _ = kernels.inefficient_block(a, b, eta, 2 * n_sup, backend=backend) \
            if block_n < 2 * n_sup else (block, 0.0)
        total = float(np.real(np.einsum("abab->", full)))
    if not total > 0:
        raise NullStateError("protocol step has zero success probability")
    out = np.zeros((n_out + 1,) * 4, dtype=complex)
    out[(slice(0, block_n + 1),) * 4] = block
    out = 0.5 * (out + np.conj(out.transpose(2, 3, 0, 1)))
    out /= total
    kept = float(np.real(np.einsum("abab->", out)))
    lost = max(0.0, 1.0 - kept) + dropped
    prev = max(rho.truncated_weight, sigma.truncated_weight)
    if lost > max_truncation:
        raise CutoffOverflowError(
            f"output weight {lost:.3g} lies above cutoff {n_out}; raise the cutoff or the bound")
    return GaussifyStepResult(FockDensityMatrix(out, prev + lost), total / norm_in, prev + lost)


def gaussify_mixed_step(rho, out_cutoff: int | None = None,
                        max_truncation: float = DEFAULT_TRUNCATION_BOUND, backend=None):
    """One ideal Gaussification step on two copies of ``rho``.

    Elements of the returned block are exact (they only involve input
    elements of lower photon number); the probability uses the full output
    trace.
    """
    rho = _as_two_mode(rho)
    return _bilinear(rho, rho, 1.0, out_cutoff, max_truncation, backend)


def gaussify_step_asymmetric(rho, sigma, out_cutoff: int | None = None,
                             max_truncation: float = DEFAULT_TRUNCATION_BOUND, backend=None):
    """Step on one copy of ``rho`` and one of ``sigma``; probability = tr(out)/(tr rho tr sigma)."""
    rho, sigma = _as_two_mode(rho), _as_two_mode(sigma)
    if rho.cutoff != sigma.cutoff:
        raise ValueError("cutoff mismatch between the two inputs")
    return _bilinear(rho, sigma, 1.0, out_cutoff, max_truncation, backend)


def gaussify_step_inefficient(rho, eta: float, sigma=None, out_cutoff: int | None = None,
                              max_truncation: float = DEFAULT_TRUNCATION_BOUND, backend=None):
    """Step with no-click detectors of efficiency ``eta``."""
    rho = _as_two_mode(rho)
    sigma = rho if sigma is None else _as_two_mode(sigma)
    return _bilinear(rho, sigma, float(eta), out_cutoff, max_truncation, backend)


# -- decoherence channels ---------------------------------------------------

def apply_channel(rho, spec: ChannelSpec) -> FockDensityMatrix:
    """Apply a decoherence channel to both modes of a two-mode state."""
    rho = _as_two_mode(rho)
    if isinstance(spec, tuple):
        spec = ChannelSpec(*spec)
    e = rho.entries
    n = rho.cutoff
    idx = np.arange(n + 1)
    if spec.kind == "none":
        return rho
    if spec.kind == "dephase":
        a, b, c, d = np.meshgrid(idx, idx, idx, idx, indexing="ij")
        diag = (a == c) & (b == d)
        return FockDensityMatrix(np.where(diag, e, spec.param * e), rho.truncated_weight)
    if spec.kind == "phase_diffuse":
        a, b, c, d = np.meshgrid(idx, idx, idx, idx, indexing="ij")
        f = np.exp(-((a + b - c - d) ** 2) * spec.param ** 2 / 2.0)
        return FockDensityMatrix(e * f, rho.truncated_weight)
    theta = spec.param
    out = np.zeros_like(e)
    lb = np.array([[np.exp(0.5 * (lgamma(x + j + 1) - lgamma(x + 1) - lgamma(j + 1))) for x in range(n + 1)]
                   for j in range(n + 1)])  # sqrt C(x+j, j)
    if theta == 0.0:
        # everything decays to vacuum
        out[0, 0, 0, 0] = rho.trace
        return FockDensityMatrix(out, rho.truncated_weight)
    s = np.sqrt(theta) ** idx
    amp = s[:, None, None, None] * s[None, :, None, None] * s[None, None, :, None] * s[None, None, None, :]
    for j in range(n + 1):
        for k in range(n + 1):
            w = (1.0 - theta) ** (j + k)
            if w == 0.0:
                continue
            m = n + 1
            src = e[j:, k:, j:, k:]
            ma, mb = m - j, m - k
            fac = (lb[j, :ma][:, None, None, None] * lb[k, :mb][None, :, None, None]
                   * lb[j, :ma][None, None, :, None] * lb[k, :mb][None, None, None, :])
            out[:ma, :mb, :ma, :mb] += w * fac * src
    return FockDensityMatrix(out * amp, rho.truncated_weight)


# -- limit analysis ---------------------------------------------------------

def first_iteration_sigma(rho0) -> dict:
    """Six normalized elements after one step, which stay fixed thereafter."""
    rho0 = _as_two_mode(rho0)
    s = vacuum_normalized(rho0)

    def el(*i):
        return s[i] if max(i) <= rho0.cutoff else 0.0

    r1000, r0100, r0001 = el(1, 0, 0, 0), el(0, 1, 0, 0), el(0, 0, 0, 1)
    return {
        "1010": complex(el(1, 0, 1, 0) - abs(r1000) ** 2),
        "0101": complex(el(0, 1, 0, 1) - abs(r0100) ** 2),
        "1001": complex(el(1, 0, 0, 1) - r1000 * r0001),
        "2000": complex(el(2, 0, 0, 0) - r1000 ** 2 / np.sqrt(2.0)),
        "0200": complex(el(0, 2, 0, 0) - r0100 ** 2 / np.sqrt(2.0)),
        "1100": complex(el(1, 1, 0, 0) - r1000 * r0100),
    }


def gaussify_limit(rho0, tol: float = 1e-9):
    """(Gamma_limit, converges) for the iterated protocol started from ``rho0``."""
    rho0 = _as_two_mode(rho0)
    if abs(rho0.entries[0, 0, 0, 0]) == 0:
        raise NullStateError("vacuum element vanishes")
    gamma = bridge.sigma_to_covariance(first_iteration_sigma(rho0))
    return gamma, is_physical(gamma, tol)


def check_pure_convergence(rho0, tol: float = 1e-9) -> bool:
    rho0 = _as_two_mode(rho0)
    s = vacuum_normalized(rho0)

    def el(*i):
        return s[i] if max(i) <= rho0.cutoff else 0.0

    conds = [
        abs(el(1, 0, 1, 0) - abs(el(1, 0, 0, 0)) ** 2) <= tol,
        abs(el(0, 1, 0, 1) - abs(el(0, 1, 0, 0)) ** 2) <= tol,
        abs(el(1, 0, 0, 1) - el(1, 0, 0, 0) * el(0, 0, 0, 1)) <= tol,
    ]
    if not all(conds):
        return False
    try:
        gamma, ok = gaussify_limit(rho0, tol)
    except SingularMatrixError:
        return False
    return bool(ok and abs(np.linalg.det(gamma) - 1.0) <= max(tol, 1e-8))


# -- protocol driver --------------------------------------------------------

@dataclass
class IterationRecord:
    iteration: int
    log_negativity: float
    entropy: float
    probability: float
    distance_to_limit: float
    truncated_weight: float


@dataclass
class ProtocolTrace:
    records: list = field(default_factory=list)
    states: list = field(default_factory=list)
    gamma_limit: np.ndarray | None = None
    converges: bool | None = None

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


def _limit_distance(state: FockDensityMatrix, limit_sigma) -> float:
    if limit_sigma is None:
        return float("nan")
    s = vacuum_normalized(state)
    k = min(state.cutoff, limit_sigma.shape[0] - 1) + 1
    sl = (slice(0, k),) * 4
    return float(np.max(np.abs(s[sl] - limit_sigma[sl])))


def run_protocol(rho0, iterations: int, eta: float = 1.0, channel: ChannelSpec | None = None,
                 cutoff: int = DEFAULT_CUTOFF, channel_both: bool = False,
                 max_truncation: float = 1e-3, keep_states: bool = False, backend=None) -> ProtocolTrace:
    """Iterate the protocol, recording E_N, S_vN, step probability and distance to the limit.

    Iteration 0 records the input. The channel acts on one of the two copies
    (or both with ``channel_both``). Elements are tracked exactly on the
    cutoff block; weight that escapes above the cutoff is reported in
    ``truncated_weight`` and must stay below ``max_truncation``.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    rho = _as_two_mode(rho0)
    if isinstance(rho0, FockPureVector) or rho.cutoff != cutoff:
        rho = rho.with_cutoff(max(cutoff, support(rho.entries)))
    rho = rho.normalized()
    channel = channel or ChannelSpec()
    trace = ProtocolTrace()
    limit_sigma = None
    if channel.is_identity and eta == 1.0:
        try:
            gamma, ok = gaussify_limit(rho)
            trace.gamma_limit, trace.converges = gamma, ok
            if ok:
                limit_sigma = vacuum_normalized(bridge.gaussian_to_fock(gamma, rho.cutoff, backend))
        except SingularMatrixError:
            trace.converges = False

    def record(i, state, prob, lost):
        trace.records.append(IterationRecord(
            i, log_negativity_fock(state), vn_entropy_fock(state), prob,
            _limit_distance(state, limit_sigma), lost))
        if keep_states:
            trace.states.append(state)

    record(0, rho, 1.0, rho.truncated_weight)
    for i in range(1, iterations + 1):
        if channel.is_identity:
            first = second = rho
        else:
            second = apply_channel(rho, channel)
            first = second if channel_both else rho
        res = _bilinear(first, second, float(eta), rho.cutoff, max_truncation, backend)
        rho = FockDensityMatrix(res.state.entries / res.state.trace, res.truncated_weight)
        record(i, rho, res.probability, res.truncated_weight)
    return trace


def extrapolate_limit(states, order: int = 3) -> FockDensityMatrix:
    """Richardson estimate of the iteration limit from the last ``order + 1`` states.

    Vacuum-normalized elements approach their limit as a sum of 2^{-jk}
    terms in the iteration number k; the j = 1..order terms are eliminated.
    The result is trace-normalized and may carry tiny negative eigenvalues.
    """
    if order < 1 or len(states) < order + 1:
        raise ValueError("need at least order + 1 states")
    seq = [vacuum_normalized(as_density(s)) for s in states[-(order + 1):]]
    for j in range(1, order + 1):
        f = 2.0 ** j
        seq = [(f * seq[i + 1] - seq[i]) / (f - 1.0) for i in range(len(seq) - 1)]
    return FockDensityMatrix(seq[0]).normalized()


def schmidt_density(alphas, cutoff: int | None = None) -> FockDensityMatrix:
    """Normalized density matrix of sum_n alpha_n |n, n>."""
    return schmidt_state(alphas, cutoff).normalized().to_density()

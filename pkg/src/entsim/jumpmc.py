"""Quantum-jump Monte Carlo for two driven ions in two leaky cavities.

Each ion-cavity subsystem has levels A, B (and C in the full model) and a
truncated cavity mode. Subsystem basis index = level * (cutoff + 1) + n with
A = 0, B = 1, C = 2. A joint pure state is stored as a d x d matrix psi with
psi[i, j] the amplitude of |i>_1 |j>_2, so an operator X on subsystem 1 acts
as X @ psi and on subsystem 2 as psi @ X.T.

The excited level sits at energy -Delta so that, for Delta >> g, Omega, the
near-degenerate pair is shifted upward by (4 g^2 (n+1) + Omega^2)/(4 Delta).
All rates and times are in units of g.
"""
from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import kernels
from .errors import ConfigError, TimestepError

A, B, C = 0, 1, 2
MAX_STEP_DRIFT = 1e-3


@dataclass(frozen=True)
class IonCavityParams:
    g: float = 1.0
    Omega: float = 2.0
    Delta: float = 20.0
    kappa: float = 10.0
    gamma_A: float = 0.0
    gamma_B: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigError("cavity decay rate kappa must be positive")
        if self.Delta == 0:
            raise ConfigError("detuning must be nonzero")
        if self.gamma_A < 0 or self.gamma_B < 0:
            raise ConfigError("spontaneous emission rates must be non-negative")

    @property
    def x(self) -> complex:
        """Weak-driving admixture of |A,1> in the no-click steady state."""
        return -1j * self.g * self.Omega / (2.0 * self.Delta * self.kappa)

    @property
    def t_av(self) -> float:
        return t_av(self)


def t_av(params: IonCavityParams) -> float:
    """Mean waiting time kappa Delta^2 / (g^2 Omega^2) before the first click."""
    if params.Omega == 0 or params.g == 0:
        return float("inf")
    return params.kappa * params.Delta ** 2 / (abs(params.g) ** 2 * params.Omega ** 2)


# -- operators --------------------------------------------------------------

def _levels(model: str) -> int:
    if model == "full":
        return 3
    if model == "adiabatic":
        return 2
    raise ConfigError(f"unknown model {model!r}; use 'full' or 'adiabatic'")


def _ops(n_levels: int, cutoff: int):
    if cutoff < 1:
        raise ConfigError("cavity cutoff must be at least 1")
    nf = cutoff + 1
    a = np.diag(np.sqrt(np.arange(1, nf)), 1).astype(complex)
    eye_f = np.eye(nf)

    def proj(i, j):
        m = np.zeros((n_levels, n_levels), dtype=complex)
        m[i, j] = 1.0
        return m

    return a, eye_f, proj


def build_full_hamiltonian(params: IonCavityParams, cutoff: int = 2) -> np.ndarray:
    """Interaction-picture three-level Hamiltonian on (A, B, C) x Fock."""
    a, eye_f, proj = _ops(3, cutoff)
    coup = params.g * np.kron(proj(C, A), a) + 0.5 * params.Omega * np.kron(proj(C, B), eye_f)
    return -params.Delta * np.kron(proj(C, C), eye_f) + coup + coup.conj().T


def build_adiabatic_hamiltonian(params: IonCavityParams, cutoff: int = 2) -> np.ndarray:
    """Two-level Hamiltonian left after eliminating the far-detuned level."""
    a, eye_f, proj = _ops(2, cutoff)
    g, om, dl = params.g, params.Omega, params.Delta
    h = abs(g) ** 2 / dl * np.kron(proj(A, A), a.conj().T @ a)
    h = h + om ** 2 / (4 * dl) * np.kron(proj(B, B), eye_f)
    coup = om * g / (2 * dl) * np.kron(proj(B, A), a)
    return h + coup + coup.conj().T


def build_hamiltonian(params: IonCavityParams, cutoff: int = 2, model: str = "full") -> np.ndarray:
    if _levels(model) == 3:
        return build_full_hamiltonian(params, cutoff)
    return build_adiabatic_hamiltonian(params, cutoff)


def jump_operators(params: IonCavityParams, cutoff: int = 2, model: str = "full") -> dict:
    """Single-subsystem collapse operators: cavity leakage and (full model) spontaneous decay."""
    n_levels = _levels(model)
    a, eye_f, proj = _ops(n_levels, cutoff)
    ops = {"cavity": np.sqrt(2 * params.kappa) * np.kron(np.eye(n_levels), a)}
    if n_levels == 3:
        if params.gamma_A > 0:
            ops["spont_A"] = np.sqrt(2 * params.gamma_A) * np.kron(proj(A, C), eye_f)
        if params.gamma_B > 0:
            ops["spont_B"] = np.sqrt(2 * params.gamma_B) * np.kron(proj(B, C), eye_f)
    elif params.gamma_A or params.gamma_B:
        warnings.warn("spontaneous emission needs the full model; ignored in the adiabatic one",
                      stacklevel=2)
    return ops


def effective_hamiltonian(params: IonCavityParams, cutoff: int = 2, model: str = "full") -> np.ndarray:
    """H - i kappa a^dag a - i (gamma_A + gamma_B)|C><C| for one subsystem."""
    h = build_hamiltonian(params, cutoff, model).astype(complex)
    for op in jump_operators(params, cutoff, model).values():
        h = h - 0.5j * op.conj().T @ op
    return h


def joint_effective_hamiltonian(params, cutoff=2, model="full") -> np.ndarray:
    h = effective_hamiltonian(params, cutoff, model)
    eye = np.eye(h.shape[0])
    return np.kron(h, eye) + np.kron(eye, h)


def joint_jump_operators(params: IonCavityParams, cutoff: int = 2, model: str = "full") -> dict:
    """Jump operators on the joint space: the two detectors behind the 50:50
    splitter, J1 ~ i a_1 + a_2 and J2 ~ a_1 + i a_2, plus per-ion decay."""
    local = jump_operators(params, cutoff, model)
    cav = local.pop("cavity") / np.sqrt(2.0)
    eye = np.eye(cav.shape[0])
    out = {
        "D1": 1j * np.kron(cav, eye) + np.kron(eye, cav),
        "D2": np.kron(cav, eye) + 1j * np.kron(eye, cav),
    }
    for name, op in local.items():
        out[f"{name}_1"] = np.kron(op, eye)
        out[f"{name}_2"] = np.kron(eye, op)
    return out


def basis_state(level: int, n: int, cutoff: int = 2, model: str = "full") -> np.ndarray:
    v = np.zeros(_levels(model) * (cutoff + 1), dtype=complex)
    v[level * (cutoff + 1) + n] = 1.0
    return v


def steady_state_e1(params: IonCavityParams, cutoff: int = 2, model: str = "adiabatic") -> np.ndarray:
    """(x|A,1> + |B,0>)/sqrt(1 + |x|^2)."""
    x = params.x
    v = x * basis_state(A, 1, cutoff, model) + basis_state(B, 0, cutoff, model)
    return v / np.sqrt(1 + abs(x) ** 2)


# -- Bell targets -----------------------------------------------------------

def bell_target(which_detector: int, n_levels: int = 2) -> np.ndarray:
    """(|B,A> + i|A,B>)/sqrt2 for detector 1, (i|B,A> + |A,B>)/sqrt2 for detector 2."""
    t = np.zeros((n_levels, n_levels), dtype=complex)
    if which_detector == 1:
        t[B, A], t[A, B] = 1.0, 1j
    elif which_detector == 2:
        t[B, A], t[A, B] = 1j, 1.0
    else:
        raise ValueError("detector must be 1 or 2")
    return t.ravel() / np.sqrt(2.0)


def bell_fidelity(two_ion_state, which_detector) -> float:
    """Overlap of a two-ion state (vector or density matrix) with the detector's Bell target."""
    if which_detector is None:
        raise ValueError("no click recorded; fidelity undefined")
    s = np.asarray(two_ion_state, dtype=complex)
    n_levels = int(round(np.sqrt(s.shape[0])))
    if n_levels ** 2 != s.shape[0] or n_levels not in (2, 3):
        raise ValueError("two-ion state must live on 2x2 or 3x3 levels")
    t = bell_target(which_detector, n_levels)
    if s.ndim == 1:
        return float(abs(np.vdot(t, s)) ** 2 / np.vdot(s, s).real)
    return float(np.real(np.vdot(t, s @ t)) / np.real(np.trace(s)))


def ion_state(psi: np.ndarray, n_levels: int) -> np.ndarray:
    """Reduced two-ion density matrix (cavities traced out), normalized."""
    d = psi.shape[0]
    nf = d // n_levels
    t = psi.reshape(n_levels, nf, n_levels, nf)
    rho = np.einsum("anbm,cndm->abcd", t, t.conj()).reshape(n_levels ** 2, n_levels ** 2)
    return rho / np.real(np.trace(rho))


# -- Monte Carlo ------------------------------------------------------------

@dataclass(frozen=True)
class JumpConfig:
    params: IonCavityParams = field(default_factory=IonCavityParams)
    cutoff: int = 2
    dt: float | None = None
    T_wait: float = 100.0
    eta: float = 1.0
    dark_rate: float = 0.0
    n_traj: int = 1000
    seed: int = 0
    model: str = "full"
    stop_at_first_click: bool = False
    keep_states: bool = False

    def __post_init__(self):
        _levels(self.model)
        if self.n_traj < 1:
            raise ConfigError("n_traj must be at least 1")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError("detector efficiency must lie in [0, 1]")
        if self.dark_rate < 0 or not self.T_wait > 0:
            raise ConfigError("dark_rate must be >= 0 and T_wait > 0")
        if self.cutoff < 1:
            raise ConfigError("cavity cutoff must be at least 1")
        tav = t_av(self.params)
        if self.dt is None:
            object.__setattr__(self, "dt", tav / 1e5 if np.isfinite(tav) else 1e-3)
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if np.isfinite(tav) and self.dt > tav / 1e4 * (1 + 1e-12):
            raise ConfigError(f"dt = {self.dt:g} exceeds T_av/1e4 = {tav / 1e4:g}")

    @property
    def n_steps(self) -> int:
        return int(np.floor(self.T_wait / self.dt + 1e-9))


@dataclass
class TrajectoryRecord:
    index: int
    outcome: str  # "click", "no_click" (nothing happened) or "lost" (excitation left unseen)
    t_click: float | None = None
    detector: int | None = None
    fidelity: float | None = None
    n_clicks: int = 0
    n_jumps: int = 0
    dark_click: bool = False
    click_ion_state: np.ndarray | None = None
    final_state: np.ndarray | None = None

    def to_json(self) -> dict:
        return {"traj": self.index, "outcome": self.outcome, "t_click": self.t_click,
                "detector": self.detector, "fidelity": self.fidelity}


@dataclass
class MCStats:
    n_traj: int
    p_success: float
    p_success_err: float
    mean_fidelity: float
    mean_fidelity_err: float
    mean_first_click_time: float
    mean_first_click_time_err: float
    mean_fidelity_single_click: float
    mean_fidelity_single_click_err: float
    counts: dict

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _mean_err(x):
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return float("nan"), float("nan")
    if len(x) == 1:
        return float(x[0]), float("nan")
    return float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(len(x)))


def aggregate(records, track_multi: bool) -> MCStats:
    n = len(records)
    clicks = [r for r in records if r.outcome == "click"]
    p = len(clicks) / n
    fid, fid_err = _mean_err([r.fidelity for r in clicks])
    tm, tm_err = _mean_err([r.t_click for r in clicks])
    if track_multi:
        f1, f1_err = _mean_err([r.fidelity for r in clicks if r.n_clicks == 1])
    else:
        f1, f1_err = float("nan"), float("nan")
    counts = {k: sum(r.outcome == k for r in records) for k in ("click", "no_click", "lost")}
    return MCStats(n, p, float(np.sqrt(p * (1 - p) / n)), fid, fid_err, tm, tm_err, f1, f1_err, counts)


class _Propagator:
    """Powers of the single-subsystem no-jump step U = exp(-i H_eff dt)."""

    def __init__(self, h_eff: np.ndarray, dt: float):
        self.U = expm(-1j * h_eff * dt)
        w, v = np.linalg.eig(self.U)
        self._eig = None
        if np.linalg.cond(v) < 1e8:
            self._eig = (w, v, np.linalg.inv(v))
        self._cache = {}

    def power(self, k: int) -> np.ndarray:
        if k in self._cache:
            return self._cache[k]
        if self._eig is not None:
            w, v, vi = self._eig
            m = (v * w ** k) @ vi
        else:
            m = np.linalg.matrix_power(self.U, k)
        if len(self._cache) < 64:
            self._cache[k] = m
        return m

    def evolve(self, psi: np.ndarray, k: int) -> np.ndarray:
        if k == 0:
            return psi
        m = self.power(k)
        return m @ psi @ m.T


class _Engine:
    def __init__(self, cfg: JumpConfig, backend=None):
        self.cfg = cfg
        self.n_levels = _levels(cfg.model)
        h = effective_hamiltonian(cfg.params, cfg.cutoff, cfg.model)
        self.prop = _Propagator(h, cfg.dt)
        self.local = jump_operators(cfg.params, cfg.cutoff, cfg.model)
        self.cav = self.local.pop("cavity") / np.sqrt(2.0)
        self.cav_t = self.cav.T
        self.spont = [(name, op) for name, op in self.local.items()]
        phi0 = basis_state(B, 0, cfg.cutoff, cfg.model)
        self.psi0 = np.outer(phi0, phi0)
        single = kernels.norm_curve(self.prop.U, phi0, cfg.n_steps, backend)
        self.curve = single ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = self.curve[1:] / self.curve[:-1]
        ratio = ratio[np.isfinite(ratio)]
        self.first_drift = float(1.0 - ratio.min()) if len(ratio) else 0.0
        self._neg_curve = -self.curve

    def _check_drift(self, before: float, after: float, t: float):
        if before > 0 and 1.0 - after / before > MAX_STEP_DRIFT:
            raise TimestepError(
                f"norm drops by {1 - after / before:.3g} in one step near t = {t:g}; reduce dt")

    def _find_jump_first(self, r: float, max_k: int):
        k = int(np.searchsorted(self._neg_curve, -r, side="right"))
        return k if k <= max_k else None

    def _norm(self, psi):
        return float(np.vdot(psi, psi).real)

    def _find_jump(self, psi: np.ndarray, r: float, max_k: int):
        if max_k <= 0:
            return None
        if self._norm(self.prop.evolve(psi, max_k)) >= r:
            return None
        lo, hi = 0, max_k  # norm(lo) >= r > norm(hi)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self._norm(self.prop.evolve(psi, mid)) < r:
                hi = mid
            else:
                lo = mid
        return hi

    def _jump_weights(self, psi):
        out = []
        d1 = 1j * self.cav @ psi + psi @ self.cav_t
        d2 = self.cav @ psi + 1j * psi @ self.cav_t
        out.append(("D1", d1))
        out.append(("D2", d2))
        for name, op in self.spont:
            out.append((name + "_1", op @ psi))
            out.append((name + "_2", psi @ op.T))
        return out

    def run_one(self, i: int) -> TrajectoryRecord:
        cfg = self.cfg
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(i,))))
        n_steps = cfg.n_steps
        n_dark = rng.poisson(cfg.dark_rate * cfg.T_wait) if cfg.dark_rate > 0 else 0
        dark_steps = np.sort(np.ceil(rng.uniform(0.0, cfg.T_wait, n_dark) / cfg.dt).astype(np.int64))
        dark_steps = dark_steps[dark_steps <= n_steps]
        dark_ptr = 0
        rec = TrajectoryRecord(i, "no_click")
        psi, k0, first = self.psi0, 0, True

        def register(step, state, detector, dark):
            rec.n_clicks += 1
            if rec.t_click is None:
                rec.t_click = step * cfg.dt
                rec.detector = detector
                rec.dark_click = dark
                ions = ion_state(state / np.sqrt(self._norm(state)), self.n_levels)
                rec.fidelity = bell_fidelity(ions, detector)
                if cfg.keep_states:
                    rec.click_ion_state = ions

        while True:
            r = rng.random()
            remaining = n_steps - k0
            if first:
                kj = self._find_jump_first(r, remaining)
                if self.first_drift > MAX_STEP_DRIFT:
                    self._check_drift(1.0, 1.0 - self.first_drift, 0.0)
            else:
                kj = self._find_jump(psi, r, remaining)
                if remaining > 0:
                    self._check_drift(self._norm(psi), self._norm(self.prop.evolve(psi, 1)), k0 * cfg.dt)
            end = k0 + (kj if kj is not None else remaining)
            while dark_ptr < len(dark_steps) and dark_steps[dark_ptr] <= end:
                ds = int(dark_steps[dark_ptr])
                dark_ptr += 1
                if kj is not None and ds == end:
                    # the real jump in the same step is handled first
                    dark_ptr -= 1
                    break
                register(ds, self.prop.evolve(psi, ds - k0), int(rng.integers(1, 3)), True)
                if cfg.stop_at_first_click:
                    break
            if rec.n_clicks and cfg.stop_at_first_click:
                break
            if kj is None:
                psi = self.prop.evolve(psi, remaining)
                break
            before = self.prop.evolve(psi, kj - 1)
            psi = self.prop.evolve(psi, kj)
            if not first:
                self._check_drift(self._norm(before), self._norm(psi), end * cfg.dt)
            cands = self._jump_weights(psi)
            w = np.array([self._norm(c) for _, c in cands])
            u = rng.random() * w.sum()
            idx = min(int(np.searchsorted(np.cumsum(w), u, side="right")), len(w) - 1)
            name, new = cands[idx]
            psi = new / np.sqrt(w[idx])
            rec.n_jumps += 1
            k0, first = end, False
            if name in ("D1", "D2") and rng.random() < cfg.eta:
                register(end, psi, 1 if name == "D1" else 2, False)
                if cfg.stop_at_first_click:
                    break
        if rec.n_clicks:
            rec.outcome = "click"
        elif rec.n_jumps:
            rec.outcome = "lost"
        if cfg.keep_states:
            rec.final_state = psi / np.sqrt(self._norm(psi))
        return rec


def run_trajectories(config: JumpConfig, threads: int = 1, backend=None, log=None):
    """Run ``config.n_traj`` independent trajectories; returns (records, MCStats).

    Trajectory i draws from its own stream SeedSequence(seed, spawn_key=(i,)),
    so results do not depend on ``threads``. The no-jump evolution uses the
    exact step exp(-i H_eff dt); a jump is placed in the first step whose
    no-jump norm falls below a uniform draw, which has the same law as an
    independent jump lottery in every step. ``log`` takes an open text file
    and receives one JSON line per trajectory.
    """
    eng = _Engine(config, backend)
    idx = range(config.n_traj)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(eng.run_one, idx, chunksize=64))
    else:
        records = [eng.run_one(i) for i in idx]
    if log is not None:
        for rec in records:
            log.write(json.dumps(rec.to_json()) + "\n")
    return records, aggregate(records, not config.stop_at_first_click)


# -- master-equation oracle -------------------------------------------------

def lindblad_generator(params: IonCavityParams, cutoff: int = 2, model: str = "full") -> np.ndarray:
    """Superoperator of one subsystem acting on row-major vec(rho)."""
    h = effective_hamiltonian(params, cutoff, model)
    eye = np.eye(h.shape[0])
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.conj()))
    for op in jump_operators(params, cutoff, model).values():
        gen = gen + np.kron(op, op.conj())
    return gen


def master_equation_state(params: IonCavityParams, t: float, cutoff: int = 2, model: str = "full") -> np.ndarray:
    """Unconditional joint state at time t from |B,0>|B,0>.

    Summed over both detectors the jump terms equal independent leakage from
    each cavity, so the joint state stays a product of two identical factors.
    """
    d = _levels(model) * (cutoff + 1)
    phi0 = basis_state(B, 0, cutoff, model)
    rho0 = np.outer(phi0, phi0.conj()).ravel()
    rho = (expm(lindblad_generator(params, cutoff, model) * t) @ rho0).reshape(d, d)
    return np.kron(rho, rho)


def average_final_state(records) -> np.ndarray:
    states = [r.final_state for r in records]
    if any(s is None for s in states):
        raise ValueError("run with keep_states=True to average final states")
    acc = 0
    for s in states:
        v = s.ravel()
        acc = acc + np.outer(v, v.conj())
    return acc / len(states)

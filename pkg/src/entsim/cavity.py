"""An atom crossing two microwave cavities to leave them in a single-photon Bell state.

The atom enters in its upper level |B>, both cavities empty. Detecting it in
the lower level |A> heralds (up to normalization)
cos(g tau_B)|0,1> + |1,0> in the cavities; detecting |B> resets them to vacuum.
Couplings are taken real and positive. Geometry is in SI units.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class CavityGeometry:
    """Two identical Fabry-Perot cavities in a line after the collimator.

    ``L`` mirror separation, ``R_curv`` radius of curvature, ``lam`` field
    wavelength, ``D0`` collimator to cavity A centre, ``D1`` cavity A centre
    to cavity B centre. Metres throughout. ``w0`` is derived from L and R
    unless the mirrors are left unspecified (see :meth:`from_waist`).
    """

    lam: float
    D0: float
    D1: float
    L: float | None = None
    R_curv: float | None = None
    w0: float | None = None

    def __post_init__(self):
        if not (self.lam > 0 and self.D0 >= 0 and self.D1 >= 0):
            raise ConfigError("wavelength must be positive and distances non-negative")
        if self.L is not None or self.R_curv is not None:
            if self.L is None or self.R_curv is None:
                raise ConfigError("both L and R_curv are needed to derive the waist")
            if not 0 < self.L < 2 * self.R_curv:
                raise ConfigError("cavity geometry requires 0 < L < 2 R_curv")
            w0 = np.sqrt(self.lam * np.sqrt(self.L * (2 * self.R_curv - self.L)) / (2 * np.pi))
            if self.w0 is not None and not np.isclose(w0, self.w0, rtol=1e-9):
                raise ConfigError("given waist disagrees with the mirror geometry")
            object.__setattr__(self, "w0", float(w0))
        elif self.w0 is None or not self.w0 > 0:
            raise ConfigError("need either (L, R_curv) or a positive waist w0")

    @classmethod
    def from_waist(cls, w0: float, lam: float, D0: float, D1: float) -> "CavityGeometry":
        return cls(lam=lam, D0=D0, D1=D1, w0=w0)

    @property
    def k(self) -> float:
        return 2 * np.pi / self.lam


@dataclass(frozen=True)
class AtomPath:
    """Straight atomic path: offsets y0, z0 at the collimator exit, angles phi
    (in the x-y plane) and theta (x-z plane), speed v."""

    y0: float = 0.0
    z0: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    v: float = 500.0

    def __post_init__(self):
        if abs(self.phi) >= np.pi / 2 or abs(self.theta) >= np.pi / 2:
            raise ConfigError("path angles must lie strictly inside (-pi/2, pi/2)")
        if not self.v > 0:
            raise ConfigError("atomic speed must be positive")


@dataclass(frozen=True)
class PassageResult:
    amplitudes: np.ndarray  # on |B,0,0>, |A,0,1>, |A,1,0>
    fidelity_on_success: float
    p_success: float

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


BASIS_LABELS = ("B00", "A01", "A10")


def state_after_passage(gtau_a: float, gtau_b: float) -> PassageResult:
    ca, sa = np.cos(gtau_a), np.sin(gtau_a)
    cb, sb = np.cos(gtau_b), np.sin(gtau_b)
    amps = np.array([ca * cb, -1j * ca * sb, -1j * sa])
    p = 1.0 - (ca * cb) ** 2
    if p > 0:
        fid = float((ca * sb + sa) ** 2 / (2.0 * ((ca * sb) ** 2 + sa ** 2)))
    else:
        fid = float("nan")
    return PassageResult(amps, fid, float(p))


def fidelity_ideal(gtau):
    c = np.cos(gtau)
    return 0.5 + c / (c * c + 1.0)


def success_probability(gtau):
    return 1.0 - np.cos(gtau) ** 4


def fidelity_asymmetric(gtau, epsilon):
    """Fidelity when cavity B's interaction time is (1 - epsilon) times cavity A's."""
    c, s = np.cos(gtau), np.sin(gtau)
    sb = np.sin(gtau * (1.0 - epsilon))
    return 0.5 + c * s * sb / (c * c * sb * sb + s * s)


def success_probability_asymmetric(gtau, epsilon):
    return 1.0 - (np.cos(gtau) * np.cos(gtau * (1.0 - epsilon))) ** 2


def _offsets(geometry: CavityGeometry, path: AtomPath, cavity: int):
    if cavity not in (0, 1):
        raise ValueError("cavity index must be 0 (A) or 1 (B)")
    dist = geometry.D0 + (geometry.D1 if cavity else 0.0)
    return path.y0 + dist * np.tan(path.phi), path.z0 + dist * np.tan(path.theta)


def effective_interaction_time(geometry: CavityGeometry, path: AtomPath, cavity: int = 0) -> float:
    """Time integral of the mode function e^{-(x^2+y^2)/w0^2} cos(kz) along the path.

    The atom moves along x; the path crosses each cavity centre plane with
    transverse offsets dy, dz. Exact for the approximate mode function.
    """
    w0, k = geometry.w0, geometry.k
    tp, tt = np.tan(path.phi), np.tan(path.theta)
    cp, sp = np.cos(path.phi), np.sin(path.phi)
    dy, dz = _offsets(geometry, path, cavity)
    speed_x = path.v / np.sqrt(1.0 + tp * tp + tt * tt)
    env = np.sqrt(np.pi) * w0 * cp * np.exp(-(dy * cp / w0) ** 2)
    env *= np.exp(-(k * w0 * tt * cp) ** 2 / 4.0)
    return float(env * np.cos(k * dz - k * dy * tt * sp * cp) / speed_x)


def effective_interaction_time_quad(geometry: CavityGeometry, path: AtomPath, cavity: int = 0,
                                    n_radii: float = 6.0) -> float:
    """Numerical line integral of the same mode function, truncated at +-n_radii waists
    around the point of closest approach (relative truncation error ~ e^{-n_radii^2})."""
    from scipy.integrate import quad

    w0, k = geometry.w0, geometry.k
    tp, tt = np.tan(path.phi), np.tan(path.theta)
    dy, dz = _offsets(geometry, path, cavity)
    speed_x = path.v / np.sqrt(1.0 + tp * tp + tt * tt)
    centre = -dy * np.sin(path.phi) * np.cos(path.phi)
    half = n_radii * w0 * np.cos(path.phi)

    def f(x):
        y, z = dy + x * tp, dz + x * tt
        return np.exp(-(x * x + y * y) / w0 ** 2) * np.cos(k * z)

    val, _ = quad(f, centre - half, centre + half, limit=400, epsabs=0.0, epsrel=1e-12)
    return float(val / speed_x)


def epsilon_exact(geometry: CavityGeometry, path: AtomPath) -> float:
    """1 - tau_B/tau_A from the closed-form interaction times."""
    return 1.0 - (effective_interaction_time(geometry, path, 1)
                  / effective_interaction_time(geometry, path, 0))


def epsilon_estimate(geometry: CavityGeometry, path: AtomPath) -> float:
    """Second-order expansion of epsilon in the offsets and angles."""
    D0, D1, w0, lam = geometry.D0, geometry.D1, geometry.w0, geometry.lam
    a, b = D1 * path.phi, D1 * path.theta
    ty = a * a + a * 2 * D0 * path.phi + 2 * path.y0 * a
    tz = b * b + b * 2 * D0 * path.theta + 2 * path.z0 * b
    return float(ty / w0 ** 2 + 2 * np.pi ** 2 / lam ** 2 * tz)


def collimation_worst_case(geometry: CavityGeometry, spread: float) -> float:
    """epsilon estimate with y0 = z0 = D1 phi = D1 theta = ``spread``."""
    if geometry.D1 <= 0:
        raise ConfigError("collimation estimate needs D1 > 0")
    ang = spread / geometry.D1
    return epsilon_estimate(geometry, AtomPath(y0=spread, z0=spread, phi=ang, theta=ang))


def detection_run_probability(D: float, P: float) -> float:
    """Probability that a detector of efficiency D fires on each of the ~1/P runs."""
    if not 0.0 <= D <= 1.0:
        raise ValueError("detector efficiency must lie in [0, 1]")
    if not 0.0 < P <= 1.0:
        raise ValueError("success probability must lie in (0, 1]")
    return float(D ** (1.0 / P))


def paris_geometry(D0: float = 0.1, D1: float = 0.1) -> CavityGeometry:
    """Microwave set-up with w0 = 5.97 mm and lambda = 5.87 mm."""
    return CavityGeometry.from_waist(5.97e-3, 5.87e-3, D0, D1)

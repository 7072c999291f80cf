"""Steady-state response of a driven two-level emitter in a waveguide.

Closed-form steady state of the optical Bloch equations, the complex
transmission coefficient of the emitter-waveguide system for isotropic and
chiral (directional) coupling, analytic and numeric phase-shift extrema,
the critical photon flux, and the chiral switching thresholds.

Conventions: rates (``gamma``, ``gamma_dp``, ``omega_r``) and detunings are
angular frequencies in rad/ns.  The total coherence decay rate is
``gamma2 = gamma/2 + gamma_dp``.  The saturation denominator used throughout
is ``D = gamma2**2 + delta**2 + 4*(gamma2/gamma)*omega_r**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

ISOTROPIC = "isotropic"
CHIRAL = "chiral"

_GRID_POINTS = 2001
_GRID_HALF_WIDTH = 20.0  # in units of gamma2
_GOLDEN_REL_TOL = 1e-10


@dataclass(frozen=True)
class EmitterParams:
    """Static emitter and coupling parameters.

    Parameters
    ----------
    gamma : float
        Total decay rate, rad/ns.  Must be positive.
    gamma_dp : float
        Pure dephasing rate, rad/ns.  Must be non-negative.
    coupling : str
        ``"isotropic"`` (bidirectional emission, fraction ``beta`` into the
        guided mode) or ``"chiral"`` (``beta`` is the fraction emitted into
        the forward, transmitted mode).
    beta : float
        Coupling efficiency in [0, 1].  Interpreted per ``coupling``.
    f0 : float
        Transition frequency on the laser scan axis, GHz.
    phi0 : float
        Constant phase offset added to observed spectra, rad.  Applied only
        at the presentation layer; every function here returns raw arg(t).
    """

    gamma: float
    gamma_dp: float = 0.0
    coupling: str = ISOTROPIC
    beta: float = 1.0
    f0: float = 0.0
    phi0: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "gamma_dp", "beta", "f0", "phi0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.gamma_dp < 0:
            raise ValueError(f"gamma_dp must be >= 0, got {self.gamma_dp}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.coupling not in (ISOTROPIC, CHIRAL):
            raise ValueError(f"coupling must be 'isotropic' or 'chiral', got {self.coupling!r}")

    @classmethod
    def isotropic(cls, gamma, beta=1.0, gamma_dp=0.0, f0=0.0, phi0=0.0):
        return cls(gamma=gamma, gamma_dp=gamma_dp, coupling=ISOTROPIC, beta=beta, f0=f0, phi0=phi0)

    @classmethod
    def chiral(cls, gamma, beta_dir=1.0, gamma_dp=0.0, f0=0.0, phi0=0.0):
        return cls(gamma=gamma, gamma_dp=gamma_dp, coupling=CHIRAL, beta=beta_dir, f0=f0, phi0=phi0)

    @property
    def gamma2(self) -> float:
        """Total coherence decay rate gamma/2 + gamma_dp, rad/ns."""
        return self.gamma / 2.0 + self.gamma_dp

    @property
    def is_chiral(self) -> bool:
        return self.coupling == CHIRAL

    def with_(self, **kwargs) -> "EmitterParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class DriveState:
    """Laser drive at a single frequency point.

    ``delta`` is the laser-emitter detuning and ``omega_r`` the Rabi
    frequency, both rad/ns.  ``linear_response=True`` drops the omega_r**2
    saturation term exactly, which removes tolerance noise when comparing
    against low-power analytic results.
    """

    delta: float
    omega_r: float = 0.0
    linear_response: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.omega_r)):
            raise ValueError(f"drive values must be finite, got delta={self.delta!r}, omega_r={self.omega_r!r}")
        if self.omega_r < 0:
            raise ValueError(f"omega_r must be >= 0, got {self.omega_r}")

    @classmethod
    def linear(cls, delta) -> "DriveState":
        """Zero-power drive evaluated in the exact linear-response limit."""
        return cls(delta=delta, omega_r=0.0, linear_response=True)


@dataclass(frozen=True)
class BlochSteadyState:
    """Steady-state density matrix elements of the driven two-level system."""

    rho_ee: float
    rho_ge: complex


@dataclass(frozen=True)
class ScatterResponse:
    """Complex transmission amplitude and normalized transmitted intensity."""

    t: complex
    i_t: float


@dataclass(frozen=True)
class PhaseExtremum:
    """Low-power analytic phase extremum for isotropic coupling."""

    delta_plus: float
    delta_minus: float
    phi_max: float
    at_unit_beta_limit: bool = False


@dataclass(frozen=True)
class NumericExtremum:
    """Result of the numeric |arg t| maximization over detuning."""

    delta: float
    phi: float
    flat: bool = False

    @property
    def phi_abs(self) -> float:
        return abs(self.phi)


@dataclass(frozen=True)
class ChiralThresholds:
    """Drive, dephasing and coupling values where the resonant chiral
    transmission crosses zero (the pi -> 0 phase jump)."""

    omega_c: float
    gamma_dp_c: float
    beta_dir_c: float


def saturation_denominator(p: EmitterParams, delta, omega_r=0.0, linear_response=False):
    """D = gamma2**2 + delta**2 + 4*(gamma2/gamma)*omega_r**2 (array-safe)."""
    delta = np.asarray(delta, dtype=float)
    g2 = p.gamma2
    d = g2 * g2 + delta * delta
    if not linear_response:
        d = d + 4.0 * (g2 / p.gamma) * float(omega_r) ** 2
    return d


def steady_state_bloch(p: EmitterParams, d: DriveState) -> BlochSteadyState:
    """Closed-form steady state of the driven two-level emitter.

    rho_ee = 2*gamma2*omega_r**2 / (gamma*D)
    rho_ge = -omega_r*(i*gamma2 + delta) / D
    """
    g2 = p.gamma2
    denom = float(saturation_denominator(p, d.delta, d.omega_r, d.linear_response))
    rho_ee = 2.0 * g2 * d.omega_r**2 / (p.gamma * denom)
    rho_ge = -d.omega_r * (1j * g2 + d.delta) / denom
    return BlochSteadyState(rho_ee=rho_ee, rho_ge=complex(rho_ge))


def transmission(p: EmitterParams, delta, omega_r=0.0, linear_response=False):
    """Complex transmission t and normalized intensity I_t on a detuning grid.

    Isotropic coupling:
        t   = 1 - (beta*gamma/2)*(gamma2 + i*delta)/D
        I_t = 1 - beta*gamma*gamma2*(2 - beta)/(2*D)
    Chiral coupling (beta is the directional fraction):
        t   = 1 - beta*gamma*(gamma2 + i*delta)/D
        I_t = 1 + 2*beta*gamma*gamma2*(beta - 1)/D

    I_t >= |t|**2 always; the excess is the incoherently scattered light and
    vanishes only for gamma_dp = 0 in the linear-response limit.

    Returns
    -------
    (t, i_t) : complex ndarray (or scalar), float ndarray (or scalar)
    """
    delta_arr = np.asarray(delta, dtype=float)
    if not np.all(np.isfinite(delta_arr)):
        raise ValueError("delta must be finite")
    g2 = p.gamma2
    denom = saturation_denominator(p, delta_arr, omega_r, linear_response)
    if p.is_chiral:
        t = 1.0 - p.beta * p.gamma * (g2 + 1j * delta_arr) / denom
        i_t = 1.0 + 2.0 * p.beta * p.gamma * g2 * (p.beta - 1.0) / denom
    else:
        t = 1.0 - (p.beta * p.gamma / 2.0) * (g2 + 1j * delta_arr) / denom
        i_t = 1.0 - p.beta * p.gamma * g2 * (2.0 - p.beta) / (2.0 * denom)
    if np.ndim(delta) == 0:
        return complex(t), float(i_t)
    return t, i_t


def scatter_response(p: EmitterParams, d: DriveState) -> ScatterResponse:
    """Transmission response at a single drive point."""
    t, i_t = transmission(p, d.delta, d.omega_r, d.linear_response)
    return ScatterResponse(t=t, i_t=i_t)


def phase_extrema_analytic(p: EmitterParams) -> PhaseExtremum:
    """Low-power, dephasing-free phase extremum for isotropic coupling.

    delta_pm = +/- gamma*sqrt(1 - beta)/2
    |phi|_max = arctan(beta / (2*sqrt(1 - beta)))

    The beta = 1 limit returns phi_max = pi/2 with ``at_unit_beta_limit``
    set, since the closed form degenerates there.
    """
    if p.is_chiral:
        raise ValueError("analytic extremum is only derived for isotropic coupling")
    if p.gamma_dp != 0.0:
        raise ValueError("analytic extremum requires gamma_dp = 0 (validity domain)")
    if p.beta == 1.0:
        return PhaseExtremum(delta_plus=0.0, delta_minus=0.0, phi_max=np.pi / 2.0,
                             at_unit_beta_limit=True)
    root = math.sqrt(1.0 - p.beta)
    dplus = p.gamma * root / 2.0
    return PhaseExtremum(delta_plus=dplus, delta_minus=-dplus,
                         phi_max=math.atan(p.beta / (2.0 * root)))


def _golden_max(fun, lo, hi, rel_tol=_GOLDEN_REL_TOL):
    """Golden-section maximization of a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    scale = max(abs(lo), abs(hi), 1e-30)
    while (b - a) > rel_tol * scale:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (a + b) / 2.0


def phase_extrema_numeric(p: EmitterParams, omega_r=0.0, linear_response=False) -> NumericExtremum:
    """Locate the detuning that maximizes |arg t| for arbitrary parameters.

    A 2001-point grid scan over delta in [-20*gamma2, 20*gamma2] brackets the
    maximum, then golden-section refinement narrows it to 1e-10 relative
    bracket width.  For a flat response (beta = 0) the result carries
    ``flat=True``.  When the response is symmetric the positive-detuning
    extremum is returned.
    """
    g2 = p.gamma2
    grid = np.linspace(-_GRID_HALF_WIDTH * g2, _GRID_HALF_WIDTH * g2, _GRID_POINTS)
    t, _ = transmission(p, grid, omega_r, linear_response)
    phi = np.abs(np.angle(t))
    if np.max(phi) < 1e-15:
        return NumericExtremum(delta=0.0, phi=0.0, flat=True)
    # last argmax prefers the positive-detuning branch on symmetric responses
    idx = int(len(phi) - 1 - np.argmax(phi[::-1]))
    lo = grid[max(idx - 1, 0)]
    hi = grid[min(idx + 1, len(grid) - 1)]

    def objective(delta):
        t_val, _ = transmission(p, float(delta), omega_r, linear_response)
        return abs(np.angle(t_val))

    delta_star = _golden_max(objective, lo, hi)
    # arg t(-delta) = -arg t(delta) for every parameter set, so the extremum
    # is reported on the positive-detuning branch for determinism
    delta_star = abs(delta_star)
    t_star, _ = transmission(p, delta_star, omega_r, linear_response)
    return NumericExtremum(delta=float(delta_star), phi=float(np.angle(t_star)))


def critical_photon_flux(p: EmitterParams) -> float:
    """Mean photon number per lifetime at which the response saturates.

    n_c = (1 + 2*gamma_dp/gamma) / (4*beta**2), isotropic coupling only.
    """
    if p.is_chiral:
        raise ValueError("critical photon flux is defined for isotropic coupling")
    if p.beta == 0.0:
        raise ValueError("critical photon flux diverges at beta = 0 (no coupling)")
    return (1.0 + 2.0 * p.gamma_dp / p.gamma) / (4.0 * p.beta**2)


def chiral_thresholds(p: EmitterParams) -> ChiralThresholds:
    """Thresholds at which the resonant chiral transmission changes sign.

    Starting from the ideal directional emitter (t = -1 on resonance), the
    resonant transmission crosses zero, and the phase jumps from pi to 0,
    once any of these is reached: omega_r >= gamma/(2*sqrt(2)) (saturation),
    gamma_dp >= gamma/2 (dephasing), or beta_dir <= 1/2 (coupling).
    """
    if not p.is_chiral:
        raise ValueError("thresholds apply to chiral coupling")
    return ChiralThresholds(
        omega_c=p.gamma / (2.0 * math.sqrt(2.0)),
        gamma_dp_c=p.gamma / 2.0,
        beta_dir_c=0.5,
    )

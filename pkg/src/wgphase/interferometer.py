"""Mach-Zehnder fringe synthesis for the emitter-waveguide system.

The signal arm passes the emitter (transmission ``t``), the reference arm is
a local oscillator.  The expected detector rate at laser frequency ``f`` is
the full two-beam interference expression

    rate(f) = p_lo + p_sig*I_t(f) + dark
              + 2*v*sqrt(p_lo*p_sig)*|t(f)|*cos(2*pi*f*delta_l/c
                                                + phi_env + phi0 + arg t(f))

with ``t = 1, I_t = 1, phi0 = 0`` when the emitter is switched off.  The
coherent term carries |t| while the background carries I_t; the two differ
by the incoherently scattered light, and the inverse pipeline relies on
that distinction.  Traces store expected (or Poisson-sampled) counts per
bin, i.e. rate times integration time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .emitter import DriveState, EmitterParams, transmission
from .units import C_M_PER_S, detuning_angular

SCHEMA_TRACE = "wgphase.trace.v1"


@dataclass(frozen=True)
class ConstantPhase:
    """Fixed environmental phase offset, rad."""

    value: float = 0.0

    def series(self, n: int, integration_time: float) -> np.ndarray:
        return np.full(n, self.value)


@dataclass(frozen=True)
class RandomWalkPhase:
    """Gaussian random-walk drift, ``sigma`` rad per sample."""

    sigma: float
    seed: int = 0

    def series(self, n: int, integration_time: float) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([int(self.seed), 0x7761]))
        return np.cumsum(rng.normal(0.0, self.sigma, n))


@dataclass(frozen=True)
class SinusoidPhase:
    """Sinusoidal drift: amplitude rad, frequency Hz against sample time."""

    amplitude: float
    frequency: float
    phase: float = 0.0

    def series(self, n: int, integration_time: float) -> np.ndarray:
        times = np.arange(n) * integration_time
        return self.amplitude * np.sin(2.0 * np.pi * self.frequency * times + self.phase)


@dataclass(frozen=True)
class LockedDriftPhase:
    """Random-walk drift with the lock loop engaged; the residual after the
    PID correction is what reaches the interferometer."""

    sigma: float
    kp: float = 0.6
    ki: float = 4.0
    kd: float = 0.0
    seed: int = 0

    def series(self, n: int, integration_time: float) -> np.ndarray:
        drift = RandomWalkPhase(self.sigma, self.seed).series(n, integration_time)
        return lock_loop_residual(drift, {"kp": self.kp, "ki": self.ki, "kd": self.kd},
                                  integration_time)


EnvPhase = Union[ConstantPhase, RandomWalkPhase, SinusoidPhase, LockedDriftPhase]


@dataclass(frozen=True)
class InterferometerConfig:
    """Interferometer geometry, powers and acquisition settings.

    delta_l : path-length imbalance, m
    visibility : fringe contrast v in [0, 1]
    p_lo, p_sig : local-oscillator and signal-arm photon rates, counts/s
    integration_time : s per frequency sample
    phi_env : environmental phase model (defaults to zero)
    dark_rate : detector dark counts/s, default 0
    """

    delta_l: float = 2.78
    visibility: float = 0.65
    p_lo: float = 1e6
    p_sig: float = 1e4
    integration_time: float = 0.1
    phi_env: EnvPhase = field(default_factory=ConstantPhase)
    dark_rate: float = 0.0

    def __post_init__(self):
        if self.delta_l < 0:
            raise ValueError(f"delta_l must be >= 0, got {self.delta_l}")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility}")
        for name in ("p_lo", "p_sig", "dark_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.integration_time <= 0:
            raise ValueError(f"integration_time must be > 0, got {self.integration_time}")

    def fringe_period_ghz(self) -> float:
        """Fringe period in laser frequency, GHz (c / delta_l)."""
        if self.delta_l == 0:
            return np.inf
        return C_M_PER_S / self.delta_l / 1e9


@dataclass
class FringeTrace:
    """Sampled interferometer intensity versus laser frequency.

    ``freq`` is the strictly increasing laser grid in GHz and ``intensity``
    the counts per bin (expected values until shot noise is applied).
    ``meta`` carries the full synthesis context.
    """

    freq: np.ndarray
    intensity: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freq = np.asarray(self.freq, dtype=float)
        self.intensity = np.asarray(self.intensity, dtype=float)
        if self.freq.shape != self.intensity.shape:
            raise ValueError("freq and intensity must have the same shape")
        if self.freq.size and np.any(np.diff(self.freq) <= 0):
            raise ValueError("freq must be strictly increasing")
        if np.any(self.intensity < 0):
            raise ValueError("intensity must be non-negative")



def expected_rate(cfg: InterferometerConfig, p: EmitterParams, freq_ghz, qd_on: bool,
                  drive: Optional[DriveState] = None, phi_env=None):
    """Expected detector rate (counts/s) on a laser frequency grid."""
    freq_ghz = np.asarray(freq_ghz, dtype=float)
    if freq_ghz.size == 0:
        raise ValueError("frequency grid is empty")
    if not np.all(np.isfinite(freq_ghz)):
        raise ValueError("frequency grid contains non-finite values")
    if np.any(np.diff(freq_ghz) <= 0):
        raise ValueError("frequency grid must be strictly increasing")

    if phi_env is None:
        phi_env = cfg.phi_env.series(freq_ghz.size, cfg.integration_time)
    else:
        phi_env = np.broadcast_to(np.asarray(phi_env, dtype=float), freq_ghz.shape)

    if qd_on:
        omega_r = 0.0 if drive is None else drive.omega_r
        linear = True if drive is None else drive.linear_response
        t, i_t = transmission(p, detuning_angular(freq_ghz, p.f0), omega_r, linear)
        phi_qd = np.angle(t) + p.phi0
        amp = np.abs(t)
    else:
        i_t = np.ones_like(freq_ghz)
        phi_qd = np.zeros_like(freq_ghz)
        amp = np.ones_like(freq_ghz)

    geometric = 2.0 * np.pi * freq_ghz * 1e9 * cfg.delta_l / C_M_PER_S
    coherent = 2.0 * cfg.visibility * np.sqrt(cfg.p_lo * cfg.p_sig) * amp
    return (cfg.p_lo + cfg.p_sig * i_t + cfg.dark_rate
            + coherent * np.cos(geometric + phi_env + phi_qd))


def fringe_trace(cfg: InterferometerConfig, p: EmitterParams, sweep, qd_on: bool,
                 drive: Optional[DriveState] = None) -> FringeTrace:
    """Synthesize a noiseless fringe trace over a laser sweep (GHz).

    The drive defaults to the linear-response limit; pass a
    :class:`DriveState` to include saturation (its detuning field is ignored,
    the sweep sets the detuning per point).
    """
    sweep = np.asarray(sweep, dtype=float)
    rate = expected_rate(cfg, p, sweep, qd_on, drive=drive)
    counts = rate * cfg.integration_time
    meta = {
        "schema": SCHEMA_TRACE,
        "qd_on": bool(qd_on),
        "units": "expected_counts",
        "interferometer": _config_meta(cfg),
        "emitter": _emitter_meta(p),
        "drive": None if drive is None else {
            "omega_r": drive.omega_r, "linear_response": drive.linear_response},
    }
    return FringeTrace(freq=sweep, intensity=counts, meta=meta)


def apply_shot_noise(trace: FringeTrace, seed: int) -> FringeTrace:
    """Replace each bin by a Poisson draw with that bin's expected count.

    Counter-based seeding: bin ``i`` uses an independent Philox stream keyed
    by ``(seed, i)``, so the draw for a bin does not depend on evaluation
    order or on how the grid is chunked.
    """
    if not np.all(np.isfinite(trace.intensity)):
        raise ValueError("expected counts must be finite")
    means = trace.intensity
    counts = np.empty_like(means)
    key = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    for i, mu in enumerate(means):
        bg = np.random.Philox(key=key, counter=[np.uint64(i), 0, 0, 0])
        counts[i] = np.random.Generator(bg).poisson(mu)
    meta = dict(trace.meta)
    meta.update({"units": "counts", "shot_noise_seed": int(seed)})
    return FringeTrace(freq=trace.freq.copy(), intensity=counts, meta=meta)


class UnstableLoopError(RuntimeError):
    """PID gains drove the residual beyond 10x the drift amplitude."""


def lock_loop_residual(drift, gains, dt: float) -> np.ndarray:
    """Residual phase left by a discrete-time PID tracking a drift series.

    Each step the controller observes the current error
    ``e = drift - correction``, updates the actuator

        correction <- kp*e + ki*integral(e dt) + kd*de/dt

    and the residual recorded for that step is ``e``.  The residual series
    can be fed back into :func:`fringe_trace` as the environmental phase.

    Raises :class:`UnstableLoopError` when |residual| grows beyond 10x the
    drift amplitude.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    drift = np.asarray(drift, dtype=float)
    kp = float(gains.get("kp", 0.0))
    ki = float(gains.get("ki", 0.0))
    kd = float(gains.get("kd", 0.0))
    amplitude = float(np.max(np.abs(drift))) if drift.size else 0.0
    limit = 10.0 * amplitude if amplitude > 0 else np.inf

    residual = np.empty_like(drift)
    correction = 0.0
    integral = 0.0
    prev_err = 0.0
    for i, value in enumerate(drift):
        err = value - correction
        residual[i] = err
        if abs(err) > limit:
            raise UnstableLoopError(
                f"lock residual {err:.3g} rad exceeded 10x drift amplitude "
                f"{amplitude:.3g} rad at step {i} (unstable gains?)"
            )
        integral += err * dt
        derivative = (err - prev_err) / dt
        correction = kp * err + ki * integral + kd * derivative
        prev_err = err
    return residual


def _config_meta(cfg: InterferometerConfig) -> dict:
    env = cfg.phi_env
    env_meta = {"kind": type(env).__name__}
    for key, val in vars(env).items():
        env_meta[key] = val
    return {
        "delta_l_m": cfg.delta_l,
        "visibility": cfg.visibility,
        "p_lo_cps": cfg.p_lo,
        "p_sig_cps": cfg.p_sig,
        "integration_time_s": cfg.integration_time,
        "dark_cps": cfg.dark_rate,
        "env_phase": env_meta,
    }


def _emitter_meta(p: EmitterParams) -> dict:
    return {
        "gamma": p.gamma, "gamma_dp": p.gamma_dp, "coupling": p.coupling,
        "beta": p.beta, "f0_ghz": p.f0, "phi0": p.phi0,
    }

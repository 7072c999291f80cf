"""Spectral models and fits for extracted phasor data.

Channels are (frequency, value, sigma) triples tagged by what they measure:

* ``phase``     : on/off fringe phase shift, modeled as arg t + phi0
* ``intensity`` : background-corrected offset ratio, modeled as I_t
* ``amplitude`` : fringe amplitude ratio, modeled as |t|

Each dipole is modeled as an isolated resonance on its own detuning axis;
a product-of-transmissions combination is available for overlapping lines.
The joint two-dipole fit shares the pure dephasing rate and the constant
phase offset between dipoles; the saturation fit ties the Rabi frequency of
every power level to one calibration constant k through omega_r**2 = k*P.

Phase and |t| constrain the parameters only through beta*gamma/2 and
gamma2, so a fit fed nothing else cannot split the coupling from the decay
rate; the transmitted-intensity channel (I_t != |t|**2 once dephasing or
saturation is present) is what restores full identifiability.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import emitter
from .emitter import EmitterParams, transmission
from .extraction import PhasorPoint
from .lm import FitResult, lm_minimize
from .units import TWO_PI, detuning_angular, wrap_angle

PHASE = "phase"
INTENSITY = "intensity"
AMPLITUDE = "amplitude"

_MIN_POINTS_PER_CHANNEL = 5


@dataclass
class SpectrumChannel:
    """One measured spectrum: values with uncertainties on a frequency grid."""

    freq: np.ndarray
    values: np.ndarray
    sigma: np.ndarray
    kind: str = PHASE
    dipole: int = 1

    def __post_init__(self):
        self.freq = np.asarray(self.freq, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.kind not in (PHASE, INTENSITY, AMPLITUDE):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not (self.freq.shape == self.values.shape == self.sigma.shape):
            raise ValueError("freq, values and sigma must have matching shapes")
        if self.freq.size < _MIN_POINTS_PER_CHANNEL:
            raise ValueError(
                f"channel needs >= {_MIN_POINTS_PER_CHANNEL} points for identifiability, "
                f"got {self.freq.size}")
        if np.any(self.sigma < 0):
            raise ValueError("sigma must be non-negative")


@dataclass
class SpectrumDataset:
    """A set of channels measured at one drive power."""

    channels: List[SpectrumChannel]
    power: Optional[float] = None

    def dipoles(self) -> List[int]:
        return sorted({ch.dipole for ch in self.channels})

    @classmethod
    def from_phasors(cls, points: Sequence[PhasorPoint], dipole: int = 1,
                     power: Optional[float] = None, intensity_from: str = "offset",
                     freq_window=None) -> "SpectrumDataset":
        """Build phase + intensity channels from extracted phasor points.

        ``intensity_from`` selects the offset ratio (I_t) or the amplitude
        ratio (|t|) as the intensity-like channel.  ``freq_window`` is an
        optional (lo, hi) restriction in GHz.
        """
        pts = list(points)
        if freq_window is not None:
            lo, hi = freq_window
            pts = [q for q in pts if lo <= q.freq <= hi]
        freq = np.array([q.freq for q in pts])
        phase = SpectrumChannel(
            freq=freq,
            values=np.array([q.phase_shift for q in pts]),
            sigma=np.array([q.phase_err for q in pts]),
            kind=PHASE, dipole=dipole)
        if intensity_from == "offset":
            vals = np.array([q.offset_ratio for q in pts])
            errs = np.array([q.offset_err for q in pts])
            kind = INTENSITY
        elif intensity_from == "amplitude":
            vals = np.array([q.amp_ratio for q in pts])
            errs = np.array([q.amp_err for q in pts])
            kind = AMPLITUDE
        else:
            raise ValueError("intensity_from must be 'offset' or 'amplitude'")
        second = SpectrumChannel(freq=freq, values=vals, sigma=errs, kind=kind, dipole=dipole)
        return cls(channels=[phase, second], power=power)


def channel_model(ch: SpectrumChannel, p: EmitterParams, omega_r=0.0,
                  linear_response=None) -> np.ndarray:
    """Model values for one channel given emitter parameters."""
    if linear_response is None:
        linear_response = omega_r == 0.0
    t, i_t = transmission(p, detuning_angular(ch.freq, p.f0), omega_r, linear_response)
    if ch.kind == PHASE:
        return np.angle(t) + p.phi0
    if ch.kind == INTENSITY:
        return i_t
    return np.abs(t)


def two_dipole_model(ch: SpectrumChannel, p1: EmitterParams, p2: EmitterParams,
                     omega_r=0.0, combine: str = "isolated") -> np.ndarray:
    """Channel model for a pair of dipoles.

    ``isolated`` evaluates only the channel's own dipole; ``product``
    multiplies the two complex transmissions (for overlapping resonances).
    """
    if combine == "isolated":
        return channel_model(ch, p1 if ch.dipole == 1 else p2, omega_r)
    if combine != "product":
        raise ValueError("combine must be 'isolated' or 'product'")
    linear = omega_r == 0.0
    t1, i1 = transmission(p1, detuning_angular(ch.freq, p1.f0), omega_r, linear)
    t2, i2 = transmission(p2, detuning_angular(ch.freq, p2.f0), omega_r, linear)
    if ch.kind == PHASE:
        return np.angle(t1 * t2) + p1.phi0
    if ch.kind == INTENSITY:
        return i1 * i2
    return np.abs(t1 * t2)


def _weights(ch: SpectrumChannel) -> np.ndarray:
    # inverse-variance; low-contrast points keep their (large) fitted sigma
    sig = np.where(ch.sigma > 0, ch.sigma, np.inf)
    finite = np.isfinite(ch.values) & np.isfinite(sig)
    w = np.where(finite & (sig > 0), 1.0 / np.where(sig > 0, sig, 1.0), 0.0)
    return w


def _residual_block(ch: SpectrumChannel, model: np.ndarray) -> np.ndarray:
    w = _weights(ch)
    diff = model - ch.values
    if ch.kind == PHASE:
        diff = wrap_angle(diff)
    return np.where(w > 0, diff * w, 0.0)


def initial_guess(dataset: SpectrumDataset, dipole: int) -> dict:
    """Deterministic starting point for one dipole from its own channels.

    gamma2 comes from the intensity-dip full width, beta from the dip depth
    (assuming no dephasing), gamma_dp from the shortfall of the observed
    phase extremum against the dephasing-free prediction, and phi0 from the
    far-detuned mean of the phase channel.
    """
    phase_ch = _find_channel(dataset, PHASE, dipole)
    int_ch = _find_channel(dataset, INTENSITY, dipole) or _find_channel(dataset, AMPLITUDE, dipole)
    src = int_ch if int_ch is not None else phase_ch
    if src is None:
        raise ValueError(f"no channels for dipole {dipole}")

    if int_ch is not None:
        vals = int_ch.values if int_ch.kind == INTENSITY else int_ch.values**2
        i_dip = int(np.argmin(vals))
        f0 = float(int_ch.freq[i_dip])
        depth = float(np.clip(1.0 - vals[i_dip], 1e-3, 0.999))
        half = 1.0 - depth / 2.0
        below = vals <= half
        if np.any(below):
            fwhm_ghz = float(int_ch.freq[below][-1] - int_ch.freq[below][0])
        else:
            fwhm_ghz = float(int_ch.freq[-1] - int_ch.freq[0]) / 4.0
        gamma2 = max(TWO_PI * fwhm_ghz / 2.0, 1e-3)
    else:
        i_dip = int(np.argmax(np.abs(phase_ch.values - np.median(phase_ch.values))))
        f0 = float(phase_ch.freq[i_dip])
        depth = 0.5
        gamma2 = max(TWO_PI * (phase_ch.freq[-1] - phase_ch.freq[0]) / 8.0, 1e-3)

    beta = float(np.clip(1.0 - np.sqrt(1.0 - depth), 0.05, 1.0))
    gamma = 2.0 * gamma2
    gamma_dp = 0.0

    phi0 = 0.0
    if phase_ch is not None:
        n_edge = max(phase_ch.freq.size // 10, 2)
        edges = np.r_[phase_ch.values[:n_edge], phase_ch.values[-n_edge:]]
        phi0 = float(np.mean(edges))
        # dephasing shrinks the phase extremum below the gamma_dp = 0 value
        observed = float(np.max(np.abs(phase_ch.values - phi0)))
        s = beta * gamma / 2.0
        if observed > 1e-6:
            tan_obs = np.tan(min(observed, np.pi / 2 - 1e-6))
            g2_eff = 0.5 * s * (1.0 + np.sqrt(1.0 + 1.0 / tan_obs**2))
            gamma_dp = float(np.clip(g2_eff - gamma / 2.0, 0.0, None))
    return {"beta": beta, "gamma": gamma, "gamma_dp": gamma_dp, "f0": f0, "phi0": phi0}


def _find_channel(dataset: SpectrumDataset, kind: str, dipole: int):
    for ch in dataset.channels:
        if ch.kind == kind and ch.dipole == dipole:
            return ch
    return None


def fit_two_dipole_spectra(data: SpectrumDataset, init: Optional[dict] = None,
                           bounds: Optional[dict] = None, combine: str = "isolated",
                           max_iter: int = 500) -> FitResult:
    """Joint weighted fit of phase and intensity spectra of up to two dipoles.

    Free parameters are (beta_i, gamma_i, f0_i) per present dipole plus the
    shared gamma_dp and phi0.  With channels for a single dipole present the
    fit reduces to a single-resonance fit.  Returns ``converged=False``
    with a flat-direction diagnostic for non-identifiable inputs.
    """
    dipoles = data.dipoles()
    if not dipoles:
        raise ValueError("dataset has no channels")

    names, x0, lo, hi = [], [], [], []
    for d in dipoles:
        guess = initial_guess(data, d)
        if init:
            for key in ("beta", "gamma", "f0"):
                guess[key] = init.get(f"{key}{d}", init.get(key, guess[key]))
        names += [f"beta{d}", f"gamma{d}", f"f0{d}"]
        x0 += [guess["beta"], guess["gamma"], guess["f0"]]
        lo += [0.0, 1e-6, guess["f0"] - 50.0]
        hi += [1.0, None, guess["f0"] + 50.0]
    shared = initial_guess(data, dipoles[0])
    gamma_dp0 = init.get("gamma_dp", shared["gamma_dp"]) if init else shared["gamma_dp"]
    phi00 = init.get("phi0", shared["phi0"]) if init else shared["phi0"]
    names += ["gamma_dp", "phi0"]
    x0 += [gamma_dp0, phi00]
    lo += [0.0, -np.pi]
    hi += [None, np.pi]
    if bounds:
        for i, name in enumerate(names):
            if name in bounds:
                lo[i], hi[i] = bounds[name]
    x0 = [min(max(v, l if l is not None else -np.inf), h if h is not None else np.inf)
          for v, l, h in zip(x0, lo, hi)]

    def unpack(x):
        params = {}
        for i, d in enumerate(dipoles):
            b, g, f0 = x[3 * i: 3 * i + 3]
            params[d] = EmitterParams.isotropic(
                gamma=max(g, 1e-9), beta=float(np.clip(b, 0, 1)), gamma_dp=max(x[-2], 0.0),
                f0=f0, phi0=x[-1])
        return params

    def residual(x):
        params = unpack(x)
        blocks = []
        for ch in data.channels:
            if combine == "product" and len(dipoles) == 2:
                model = two_dipole_model(ch, params[dipoles[0]], params[dipoles[1]],
                                         combine="product")
            else:
                model = channel_model(ch, params[ch.dipole])
            blocks.append(_residual_block(ch, model))
        return np.concatenate(blocks)

    result = lm_minimize(residual, x0, bounds=(lo, hi), names=names, max_iter=max_iter)
    if result.flat_directions:
        result.converged = False
        result.message += "; non-identifiable: flat directions " + ", ".join(result.flat_directions)
    return result


def fit_saturation_series(datasets: Sequence[SpectrumDataset], init: Optional[dict] = None,
                          bounds: Optional[dict] = None, max_iter: int = 500) -> FitResult:
    """Global fit of spectra taken at several drive powers.

    Parameters (beta, gamma, gamma_dp, phi0, k) are shared across datasets;
    dataset j is driven at omega_r = sqrt(k * P_j).  Needs >= 3 power
    levels, otherwise k is not identifiable.
    """
    datasets = list(datasets)
    powers = [ds.power for ds in datasets]
    if any(pw is None for pw in powers):
        raise ValueError("every dataset needs a recorded power level")
    if len({float(pw) for pw in powers}) < 3:
        raise ValueError(
            "k is unidentifiable: need >= 3 distinct power levels, "
            f"got {sorted({float(pw) for pw in powers})}")

    lowest = min(range(len(datasets)), key=lambda i: powers[i])
    guess = initial_guess(datasets[lowest], datasets[lowest].dipoles()[0])
    if init:
        guess.update({k: v for k, v in init.items() if k in guess})
    k0 = init.get("k", 0.0) if init else 0.0
    names = ["beta", "gamma", "gamma_dp", "phi0", "k"]
    x0 = [guess["beta"], guess["gamma"], guess["gamma_dp"], guess["phi0"], k0]
    f0 = guess["f0"] if not init or "f0" not in init else init["f0"]
    lo = [0.0, 1e-6, 0.0, -np.pi, 0.0]
    hi = [1.0, None, None, np.pi, None]
    if bounds:
        for i, name in enumerate(names):
            if name in bounds:
                lo[i], hi[i] = bounds[name]
    x0 = [min(max(v, l if l is not None else -np.inf), h if h is not None else np.inf)
          for v, l, h in zip(x0, lo, hi)]

    def residual(x):
        beta, gamma, gamma_dp, phi0, k = x
        p = EmitterParams.isotropic(gamma=max(gamma, 1e-9), beta=float(np.clip(beta, 0, 1)),
                                    gamma_dp=max(gamma_dp, 0.0), f0=f0, phi0=phi0)
        blocks = []
        for ds in datasets:
            omega = float(np.sqrt(max(k, 0.0) * ds.power))
            for ch in ds.channels:
                blocks.append(_residual_block(ch, channel_model(ch, p, omega)))
        return np.concatenate(blocks)

    result = lm_minimize(residual, x0, bounds=(lo, hi), names=names, max_iter=max_iter)
    if result["k"] <= lo[4] + 1e-12:
        result.message += "; k pinned at lower bound (series shows no saturation)"
        if "k" not in result.flat_directions:
            result.flat_directions.append("k")
    return result


def predict_phase_vs_power(p: EmitterParams, k: float, powers) -> np.ndarray:
    """Signed extremal phase shift versus drive power, omega_r = sqrt(k*P)."""
    if k <= 0:
        raise ValueError(f"calibration constant k must be > 0, got {k}")
    powers = np.asarray(powers, dtype=float)
    phi = np.empty_like(powers)
    for i, pw in enumerate(powers):
        ext = emitter.phase_extrema_numeric(p, omega_r=float(np.sqrt(k * pw)))
        phi[i] = ext.phi
    return phi

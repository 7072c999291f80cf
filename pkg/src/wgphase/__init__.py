"""Forward and inverse modeling of single-emitter nonlinear phase shifts in
photonic waveguides: steady-state transmission of a driven two-level emitter
(isotropic and chiral coupling), Mach-Zehnder fringe synthesis, and recovery
of emitter parameters from fringe data."""

from .bloch import BlochConvergenceError, bloch_oracle_integrate, integrate_steady_states
from .emitter import (BlochSteadyState, ChiralThresholds, DriveState, EmitterParams,
                      NumericExtremum, PhaseExtremum, ScatterResponse, chiral_thresholds,
                      critical_photon_flux, phase_extrema_analytic, phase_extrema_numeric,
                      scatter_response, steady_state_bloch, transmission)
from .extraction import (NoFringeError, PhasorPoint, estimate_path_length_fft,
                         extract_phasor_series, window_phasors)
from .interferometer import (ConstantPhase, FringeTrace, InterferometerConfig,
                             LockedDriftPhase, RandomWalkPhase, SinusoidPhase,
                             UnstableLoopError, apply_shot_noise, expected_rate,
                             fringe_trace, lock_loop_residual)
from .lm import FitResult, lm_minimize
from .spectra import (SpectrumChannel, SpectrumDataset, channel_model,
                      fit_saturation_series, fit_two_dipole_spectra, initial_guess,
                      predict_phase_vs_power, two_dipole_model)

__version__ = "0.1.0"

__all__ = [
    "BlochConvergenceError", "BlochSteadyState", "ChiralThresholds", "ConstantPhase",
    "DriveState", "EmitterParams", "FitResult", "FringeTrace", "InterferometerConfig",
    "LockedDriftPhase", "NoFringeError", "NumericExtremum", "PhaseExtremum", "PhasorPoint",
    "RandomWalkPhase", "ScatterResponse", "SinusoidPhase", "SpectrumChannel",
    "SpectrumDataset", "UnstableLoopError", "apply_shot_noise", "bloch_oracle_integrate",
    "channel_model", "chiral_thresholds", "critical_photon_flux", "estimate_path_length_fft",
    "expected_rate", "extract_phasor_series", "fit_saturation_series",
    "fit_two_dipole_spectra", "fringe_trace", "initial_guess", "integrate_steady_states",
    "lm_minimize", "lock_loop_residual", "phase_extrema_analytic", "phase_extrema_numeric",
    "predict_phase_vs_power", "scatter_response", "steady_state_bloch", "transmission",
    "two_dipole_model", "window_phasors",
]

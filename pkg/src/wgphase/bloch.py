"""Time-domain integration of the optical Bloch equations.

Independent cross-check for the closed-form steady state in
:mod:`wgphase.emitter`: the rotating-frame master equation with decay
``gamma`` and pure dephasing ``gamma_dp`` is integrated from the ground
state with fixed-step classical Runge-Kutta until the state stops moving.

Sign convention matches the closed form: the drive enters with a negative
amplitude so that rho_ge -> -omega_r*(i*gamma2 + delta)/D.

State layout is ``[rho_ee, Re(rho_ge), Im(rho_ge)]``:

    d(rho_ee)/dt = -2*omega_r*Im(rho_ge) - gamma*rho_ee
    d(rho_ge)/dt = i*omega_r*(2*rho_ee - 1) - (gamma2 + i*delta)*rho_ge

Because the system is affine in the state, the steady state is an exact
fixed point of the Runge-Kutta map; the step size only controls stability
and how fast the transient decays.
"""

from __future__ import annotations

import numpy as np

from .emitter import BlochSteadyState, DriveState, EmitterParams

_REL_CHANGE_TOL = 1e-12
_CHECK_EVERY = 16


class BlochConvergenceError(RuntimeError):
    """Raised when the integration does not settle within the horizon."""

    def __init__(self, residual: float, horizon: float):
        self.residual = residual
        self.horizon = horizon
        super().__init__(
            f"Bloch integration did not converge within horizon {horizon:g} ns; "
            f"last relative change per step {residual:.3e}"
        )


def _derivative(state, gamma, gamma2, omega, delta):
    ee, re, im = state
    d_ee = -2.0 * omega * im - gamma * ee
    d_re = -gamma2 * re + delta * im
    d_im = omega * (2.0 * ee - 1.0) - gamma2 * im - delta * re
    return np.stack([d_ee, d_re, d_im])


def integrate_steady_states(gamma, gamma_dp, omega_r, delta, dt=None, horizon=None):
    """Vectorized RK4 relaxation to steady state for batches of parameters.

    All parameter arrays broadcast to a common shape.  Returns
    ``(rho_ee, rho_ge, converged, residual)`` where ``residual`` is the last
    relative change per step for each system.
    """
    gamma, gamma_dp, omega_r, delta = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(a, dtype=float)) for a in (gamma, gamma_dp, omega_r, delta))
    )
    if np.any(gamma <= 0) or np.any(gamma_dp < 0) or np.any(omega_r < 0):
        raise ValueError("require gamma > 0, gamma_dp >= 0, omega_r >= 0")
    if not all(np.all(np.isfinite(a)) for a in (gamma, gamma_dp, omega_r, delta)):
        raise ValueError("non-finite parameter in Bloch integration")
    gamma2 = gamma / 2.0 + gamma_dp

    # fastest system scale bounds the spectral radius; 0.5/scale keeps RK4
    # well inside its stability region
    scale = np.maximum.reduce([gamma, gamma2, omega_r, np.abs(delta), np.ones_like(gamma)])
    if dt is None:
        dt_arr = 0.5 / scale
    else:
        dt_arr = np.full_like(gamma, float(dt))
    if horizon is None:
        horizon_arr = 120.0 / np.minimum(gamma, gamma2)
    else:
        horizon_arr = np.full_like(gamma, float(horizon))
    max_steps = int(np.max(np.ceil(horizon_arr / dt_arr)))

    state = np.zeros((3,) + gamma.shape)
    converged = np.zeros(gamma.shape, dtype=bool)
    residual = np.full(gamma.shape, np.inf)
    h = dt_arr

    for step in range(1, max_steps + 1):
        prev = state
        k1 = _derivative(state, gamma, gamma2, omega_r, delta)
        k2 = _derivative(state + 0.5 * h * k1, gamma, gamma2, omega_r, delta)
        k3 = _derivative(state + 0.5 * h * k2, gamma, gamma2, omega_r, delta)
        k4 = _derivative(state + h * k3, gamma, gamma2, omega_r, delta)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % _CHECK_EVERY == 0 or step == max_steps:
            change = np.max(np.abs(state - prev), axis=0)
            norm = np.maximum(np.max(np.abs(state), axis=0), 1e-30)
            rel = change / norm
            newly = (rel < _REL_CHANGE_TOL) & ~converged
            residual = np.where(converged, residual, rel)
            converged |= newly
            if np.all(converged):
                break

    rho_ee = state[0]
    rho_ge = state[1] + 1j * state[2]
    return rho_ee, rho_ge, converged, residual


def bloch_oracle_integrate(p: EmitterParams, d: DriveState, dt=None, horizon=None) -> BlochSteadyState:
    """Integrate one system to steady state; raises on non-convergence.

    ``dt`` defaults to 0.5 / (fastest rate in the problem) and ``horizon``
    to 120 / min(gamma, gamma2), far beyond the transient lifetime.
    """
    rho_ee, rho_ge, converged, residual = integrate_steady_states(
        p.gamma, p.gamma_dp, d.omega_r, d.delta, dt=dt, horizon=horizon
    )
    if not bool(converged[0]):
        hz = horizon if horizon is not None else 120.0 / min(p.gamma, p.gamma2)
        raise BlochConvergenceError(float(residual[0]), hz)
    return BlochSteadyState(rho_ee=float(rho_ee[0]), rho_ge=complex(rho_ge[0]))

"""Unit conventions and conversions.

All rates, detunings and Rabi frequencies are carried internally as angular
frequencies in rad/ns.  Laser frequencies at the I/O boundary are plain
frequencies in GHz (1 GHz = 2*pi rad/ns), interferometer path lengths are in
meters, photon rates in counts/s.
"""

import numpy as np

TWO_PI = 2.0 * np.pi

#: speed of light, m/s
C_M_PER_S = 299_792_458.0


def ghz_to_angular(f_ghz):
    """Plain frequency in GHz to angular frequency in rad/ns."""
    return TWO_PI * np.asarray(f_ghz, dtype=float)


def angular_to_ghz(omega):
    """Angular frequency in rad/ns to plain frequency in GHz."""
    return np.asarray(omega, dtype=float) / TWO_PI


def mhz_to_angular(f_mhz):
    """Plain frequency in MHz to angular frequency in rad/ns."""
    return TWO_PI * np.asarray(f_mhz, dtype=float) * 1e-3


def detuning_angular(freq_ghz, f0_ghz):
    """Laser-emitter detuning in rad/ns for a laser grid in GHz."""
    return TWO_PI * (np.asarray(freq_ghz, dtype=float) - f0_ghz)


def wrap_angle(phi):
    """Wrap an angle (scalar or array) to the interval (-pi, pi]."""
    phi = np.asarray(phi, dtype=float)
    wrapped = np.mod(phi + np.pi, TWO_PI) - np.pi
    wrapped = np.where(wrapped <= -np.pi, wrapped + TWO_PI, wrapped)
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped

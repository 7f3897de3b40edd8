"""Unit conventions.

Internally hbar = 1, time is in nanoseconds and every energy or coupling is an
angular frequency in rad/ns. User-facing values are cycle frequencies in MHz
(or GHz for device frequencies), so ``kappa = 2*pi*nu``.
"""
import math

TWO_PI = 2.0 * math.pi

PLANCK = 6.62607015e-34  # J s
BOLTZMANN = 1.380649e-23  # J / K


def mhz_to_angular(nu_mhz):
    """Cycle frequency in MHz -> angular frequency in rad/ns (scalars or arrays)."""
    return TWO_PI * 1e-3 * nu_mhz


def angular_to_mhz(omega):
    """Angular frequency in rad/ns -> cycle frequency in MHz."""
    return omega * 1e3 / TWO_PI

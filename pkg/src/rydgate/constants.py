"""Physical constants and unit conversions.

Everything inside the package works in SI units: angular frequencies in
rad/s, lengths in meters, masses in kg, temperatures in K.  Files and the
command line speak the lab dialect (2pi x MHz, um, uK); these helpers do the
conversion at the boundary.
"""

import math

HBAR = 1.054571817e-34  # J s (CODATA 2018)
KB = 1.380649e-23       # J / K (exact)
TWO_PI = 2.0 * math.pi


def mhz_to_rad_s(f_mhz: float) -> float:
    """2pi x MHz -> rad/s."""
    return TWO_PI * f_mhz * 1e6


def rad_s_to_mhz(w: float) -> float:
    """rad/s -> 2pi x MHz."""
    return w / (TWO_PI * 1e6)


def khz_to_rad_s(f_khz: float) -> float:
    """2pi x kHz -> rad/s."""
    return TWO_PI * f_khz * 1e3


def rad_s_to_khz(w: float) -> float:
    """rad/s -> 2pi x kHz."""
    return w / (TWO_PI * 1e3)


def um_to_m(x_um: float) -> float:
    return x_um * 1e-6


def m_to_um(x_m: float) -> float:
    return x_m * 1e6


def uk_to_k(t_uk: float) -> float:
    return t_uk * 1e-6


def k_to_uk(t_k: float) -> float:
    return t_k * 1e6

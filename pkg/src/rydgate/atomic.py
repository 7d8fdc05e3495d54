"""Atomic pair data and closed-form geometric / recoil parameters.

Holds the dispersion coefficients, decay rates and laser wavelengths for a
pair of Rydberg-excited atoms, the power-law scaling between principal
quantum numbers, and the small closed-form quantities derived from them
(exchange coupling, van der Waals shifts, Lamb-Dicke parameter, recoil
shift, thermal position spreads).

All functions use SI units: rad/s, meters, kg, K.  The bundled species
table (see :func:`load_pair_data`) is written in lab units and converted on
load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources

from .constants import HBAR, KB, TWO_PI

# Valid range for power-law rescaling of the principal quantum number.
N_MIN, N_MAX = 30, 150

# Exponents of the n power laws: C3 ~ n^4, C6 ~ n^11, Gamma ~ n^-3.
_C3_EXP = 4
_C6_EXP = 11
_GAMMA_EXP = -3


@dataclass(frozen=True)
class RydbergPairData:
    """Species constants for one principal quantum number.

    Magnitudes only; sign conventions are handled by the consumers.

    Attributes
    ----------
    n : int
        Principal quantum number of the Rydberg pair.
    c3 : float
        Dipole-dipole dispersion coefficient, rad/s * m^3.
    c6_00, c6_01, c6_11 : float
        van der Waals dispersion coefficients per pair state, rad/s * m^6.
        The 10 coefficient equals the 01 one by symmetry.
    gamma0, gamma1 : float
        Radiative decay rates of the two Rydberg states, rad/s.
    mass : float
        Atomic mass, kg.
    lambda0, lambda1 : float
        Effective single-photon transition wavelengths, m.
    """

    n: int
    c3: float
    c6_00: float
    c6_01: float
    c6_11: float
    gamma0: float
    gamma1: float
    mass: float
    lambda0: float
    lambda1: float

    def __post_init__(self):
        if self.n < N_MIN or self.n > N_MAX:
            raise ValueError(f"principal quantum number {self.n} outside [{N_MIN}, {N_MAX}]")
        for name in ("c3", "c6_00", "c6_01", "c6_11", "gamma0", "gamma1",
                     "mass", "lambda0", "lambda1"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be strictly positive, got {value}")

    def wavelength(self, j: int) -> float:
        """Wavelength of drive laser j in meters (j in {0, 1})."""
        if j == 0:
            return self.lambda0
        if j == 1:
            return self.lambda1
        raise ValueError(f"laser index must be 0 or 1, got {j}")


@dataclass(frozen=True)
class GeometryConfig:
    """Trap geometry: interatomic distance, trap frequencies, temperature.

    The quantization axis coincides with the interatomic axis z, so the
    exchange coupling carries no angular factor.  ``laser_axis`` selects the
    recoil direction: "x" is the weakly confined axial direction of the
    tweezers, "z" the interatomic (radial) one.
    """

    distance: float          # m
    omega_x: float           # rad/s
    omega_y: float           # rad/s
    omega_z: float           # rad/s
    temperature: float = 0.0  # K
    laser_axis: str = "z"

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError(f"distance must be positive, got {self.distance}")
        for name in ("omega_x", "omega_y", "omega_z"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.laser_axis not in ("x", "z"):
            raise ValueError(f"laser_axis must be 'x' or 'z', got {self.laser_axis!r}")

    def trap_frequency(self, axis: str) -> float:
        return {"x": self.omega_x, "y": self.omega_y, "z": self.omega_z}[axis]


def dipole_coupling(data: RydbergPairData, distance: float) -> float:
    """Resonant exchange coupling J = |C3| / R^3 in rad/s."""
    if distance <= 0:
        raise ValueError(f"distance must be positive, got {distance}")
    return abs(data.c3) / distance**3


def vdw_strengths(data: RydbergPairData, distance: float) -> dict[str, float]:
    """van der Waals shifts V_ij = C6_ij / R^6 per pair state, rad/s.

    Returns a dict keyed by pair state ("00", "01", "10", "11"); the 10
    entry mirrors 01.
    """
    if distance <= 0:
        raise ValueError(f"distance must be positive, got {distance}")
    r6 = distance**6
    v01 = data.c6_01 / r6
    return {"00": data.c6_00 / r6, "01": v01, "10": v01, "11": data.c6_11 / r6}


def scale_to_n(base: RydbergPairData, n_target: int) -> RydbergPairData:
    """Rescale constants from ``base.n`` to ``n_target`` by power laws.

    C3 scales as n^4, every C6 as n^11 and the decay rates as n^-3; mass
    and wavelengths carry over.  Tabulated values are preferred whenever
    available (see :func:`load_pair_data`); the power laws are asymptotic.
    """
    if n_target < N_MIN or n_target > N_MAX:
        raise ValueError(f"target n {n_target} outside [{N_MIN}, {N_MAX}]")
    s = n_target / base.n
    return replace(
        base,
        n=n_target,
        c3=base.c3 * s**_C3_EXP,
        c6_00=base.c6_00 * s**_C6_EXP,
        c6_01=base.c6_01 * s**_C6_EXP,
        c6_11=base.c6_11 * s**_C6_EXP,
        gamma0=base.gamma0 * s**_GAMMA_EXP,
        gamma1=base.gamma1 * s**_GAMMA_EXP,
    )


def range_for_ratio(omega_max: float, ratio: float, data: RydbergPairData) -> float:
    """Distance R at which the drive-to-exchange ratio takes a given value.

    Solves omega_max / J(R) = ratio for R, i.e. R = (C3 * ratio /
    omega_max)^(1/3).  Round-trips with :func:`dipole_coupling` to machine
    precision.
    """
    if ratio <= 0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    if omega_max <= 0:
        raise ValueError(f"omega_max must be positive, got {omega_max}")
    return (abs(data.c3) * ratio / omega_max) ** (1.0 / 3.0)


def lamb_dicke(data: RydbergPairData, omega_trap: float, j: int = 0) -> float:
    """Lamb-Dicke parameter eta_j = (2 pi / lambda_j) sqrt(hbar / (2 m w)).

    Ratio of the photon momentum kick of laser j to the trap ground-state
    momentum spread along the laser axis.
    """
    if omega_trap <= 0:
        raise ValueError(f"omega_trap must be positive, got {omega_trap}")
    return (TWO_PI / data.wavelength(j)) * oscillator_length(data.mass, omega_trap)


def recoil_detuning(data: RydbergPairData, j: int = 0) -> float:
    """Single-photon recoil shift 2 pi^2 hbar / (m lambda_j^2), rad/s."""
    lam = data.wavelength(j)
    return 2.0 * math.pi**2 * HBAR / (data.mass * lam**2)


def oscillator_length(mass: float, omega: float) -> float:
    """Ground-state position spread sqrt(hbar / (2 m w)) of a trap mode."""
    return math.sqrt(HBAR / (2.0 * mass * omega))


def thermal_occupation_factor(omega: float, temperature: float) -> float:
    """Thermal variance enhancement 2 n_bar + 1 = coth(hbar w / 2 kB T).

    Returns 1 in the zero-temperature limit.
    """
    if temperature <= 0.0:
        return 1.0
    return 1.0 / math.tanh(HBAR * omega / (2.0 * KB * temperature))


def thermal_pair_spread(mass: float, omega: float, temperature: float) -> float:
    """Standard deviation of the relative coordinate of two trapped atoms.

    Both atoms sit in independent traps of frequency ``omega``, so the
    variances add:  sigma^2 = 2 * (hbar / 2 m w) * coth(hbar w / 2 kB T).
    """
    var = 2.0 * oscillator_length(mass, omega) ** 2 * thermal_occupation_factor(omega, temperature)
    return math.sqrt(var)


# ---------------------------------------------------------------------------
# Species table


def default_data_path():
    """Path of the bundled species table."""
    return resources.files(__package__) / "data" / "rb87_pair_data.json"


def load_species_table(path=None) -> dict:
    """Parse a species data file into nested dicts (species -> n -> fields)."""
    if path is None:
        path = default_data_path()
        raw = path.read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    return json.loads(raw)


def _entry_to_pair_data(n: int, entry: dict) -> RydbergPairData:
    ghz_um3 = TWO_PI * 1e9 * 1e-18   # GHz um^3 -> rad/s m^3
    ghz_um6 = TWO_PI * 1e9 * 1e-36   # GHz um^6 -> rad/s m^6
    khz = TWO_PI * 1e3
    return RydbergPairData(
        n=n,
        c3=entry["C3_GHz_um3"] * ghz_um3,
        c6_00=entry["C6_00_GHz_um6"] * ghz_um6,
        c6_01=entry["C6_01_GHz_um6"] * ghz_um6,
        c6_11=entry["C6_11_GHz_um6"] * ghz_um6,
        gamma0=entry["Gamma0_kHz"] * khz,
        gamma1=entry["Gamma1_kHz"] * khz,
        mass=entry["mass_kg"],
        lambda0=entry["lambda0_nm"] * 1e-9,
        lambda1=entry["lambda1_nm"] * 1e-9,
    )


def load_pair_data(species: str = "Rb87", n: int = 100, path=None) -> RydbergPairData:
    """Load species constants for a principal quantum number.

    Tabulated entries are returned exactly.  For an untabulated n the
    nearest tabulated entry is rescaled with the power laws of
    :func:`scale_to_n`.
    """
    table = load_species_table(path)
    try:
        entries = table[species]
    except KeyError:
        raise KeyError(f"species {species!r} not in table (have {sorted(table)})") from None
    if n < N_MIN or n > N_MAX:
        raise ValueError(f"principal quantum number {n} outside [{N_MIN}, {N_MAX}]")
    available = sorted(int(k) for k in entries)
    if n in available:
        return _entry_to_pair_data(n, entries[str(n)])
    nearest = min(available, key=lambda m: (abs(m - n), m))
    return scale_to_n(_entry_to_pair_data(nearest, entries[str(nearest)]), n)

"""Assembly of the driven two-atom Hamiltonian and its noise terms.

All terms are returned as dense complex matrices in angular-frequency units
(rad/s) on the product space of a :class:`GateModel`.  The ideal gate model
is the phase-controlled drive plus the resonant exchange coupling; every
other term (van der Waals shifts, motional corrections, photon recoil,
decay) is switched by a :class:`NoiseConfig` flag.

Photon recoil is implemented in the momentum-kick transformed frame, where
it splits into a constant detuning of the Rydberg manifold and a linear
coupling between the Rydberg projector and the atomic momentum along the
laser axis.  The equivalent displacement-operator form of the drive is
provided separately (:func:`displaced_drive_term`) as a cross-check; it is
exact only in the infinite-cutoff limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import algebra
from .algebra import MotionalMode, ProductSpace
from .atomic import (
    GeometryConfig,
    RydbergPairData,
    dipole_coupling,
    lamb_dicke,
    recoil_detuning,
    vdw_strengths,
)
from .constants import HBAR


class ConfigurationError(ValueError):
    """A noise flag references motional modes the model does not carry."""


@dataclass(frozen=True)
class NoiseConfig:
    """Switchboard for the noise terms.

    All flags are independent; with everything off the model reduces to the
    ideal drive + exchange Hamiltonian.  ``detuning_compensation`` zeroes
    the recoil detuning (laser-frequency offset), and ``negate_kinetic``
    flips the sign of the kinetic term and of both recoil terms for
    sensitivity checks.
    """

    vdw: bool = False
    vdw_motion_1z: bool = False
    exchange_motion_1z: bool = False
    exchange_motion_2z: bool = False
    exchange_motion_2x: bool = False
    exchange_motion_2y: bool = False
    recoil_detuning: bool = False
    recoil_coupling: bool = False
    decay: bool = False
    detuning_compensation: bool = False
    negate_kinetic: bool = False

    def with_flags(self, **flags) -> "NoiseConfig":
        return replace(self, **flags)


#: Flag -> axis of the motional modes that flag requires on both atoms.
_REQUIRED_AXIS = {
    "vdw_motion_1z": "z",
    "exchange_motion_1z": "z",
    "exchange_motion_2z": "z",
    "exchange_motion_2x": "x",
    "exchange_motion_2y": "y",
}


@dataclass(frozen=True)
class GateModel:
    """Fully resolved physical scenario for one gate simulation."""

    data: RydbergPairData
    geom: GeometryConfig
    omega_max: float                       # rad/s
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    motion: tuple[MotionalMode, ...] = ()

    def __post_init__(self):
        if self.omega_max <= 0:
            raise ValueError(f"omega_max must be positive, got {self.omega_max}")

    @property
    def exchange_coupling(self) -> float:
        """Resonant exchange coupling J at the configured distance, rad/s."""
        return dipole_coupling(self.data, self.geom.distance)

    @property
    def ratio(self) -> float:
        """Drive-to-exchange ratio omega_max / J."""
        return self.omega_max / self.exchange_coupling

    def vdw_shifts(self) -> dict[str, float]:
        return vdw_strengths(self.data, self.geom.distance)

    def space(self) -> ProductSpace:
        return ProductSpace(self.motion)

    def validate(self) -> None:
        """Check that every enabled motional flag has its modes configured."""
        space = self.space()
        for flag, axis in _REQUIRED_AXIS.items():
            if getattr(self.noise, flag):
                for atom in ("A", "B"):
                    if not space.has_mode(atom, axis):
                        raise ConfigurationError(
                            f"noise flag {flag} requires a {axis}-mode on atom {atom}"
                        )
        if self.noise.recoil_coupling:
            axis = self.geom.laser_axis
            for atom in ("A", "B"):
                if not space.has_mode(atom, axis):
                    raise ConfigurationError(
                        f"recoil coupling requires a {axis}-mode on atom {atom} (laser axis)"
                    )
            if not math.isclose(self.data.lambda0, self.data.lambda1, rel_tol=1e-9):
                raise ConfigurationError(
                    "recoil coupling assumes equal drive wavelengths (equal Lamb-Dicke "
                    f"parameters); got {self.data.lambda0} and {self.data.lambda1}"
                )


def pair_modes(axis: str, cutoff: int, omega: float) -> tuple[MotionalMode, MotionalMode]:
    """Matching motional modes on both atoms along one axis."""
    return (MotionalMode("A", axis, cutoff, omega), MotionalMode("B", axis, cutoff, omega))


def model_for_ratio(
    data: RydbergPairData,
    omega_max: float,
    ratio: float,
    *,
    omega_z: float = 2 * math.pi * 100e3,
    omega_x: float | None = None,
    omega_y: float | None = None,
    temperature: float = 1e-6,
    laser_axis: str = "z",
    noise: NoiseConfig | None = None,
    motion: Sequence[MotionalMode] = (),
) -> GateModel:
    """Build a model whose distance realizes the requested drive/exchange ratio.

    Trap defaults follow the usual tweezer convention: the axial x axis is
    five times softer than the radial y, z axes.
    """
    from .atomic import range_for_ratio

    distance = range_for_ratio(omega_max, ratio, data)
    geom = GeometryConfig(
        distance=distance,
        omega_x=omega_x if omega_x is not None else omega_z / 5.0,
        omega_y=omega_y if omega_y is not None else omega_z,
        omega_z=omega_z,
        temperature=temperature,
        laser_axis=laser_axis,
    )
    return GateModel(
        data=data,
        geom=geom,
        omega_max=omega_max,
        noise=noise if noise is not None else NoiseConfig(),
        motion=tuple(motion),
    )


# ---------------------------------------------------------------------------
# Internal-space building blocks


def drive_lowering_16() -> np.ndarray:
    """Sum of |j><r_j| over both lasers and both atoms, 16 x 16."""
    local = algebra.transition("r0", "0") + algebra.transition("r1", "1")
    eye = np.eye(algebra.N_LEVELS)
    return np.kron(local, eye) + np.kron(eye, local)


def exchange_operator_16() -> np.ndarray:
    """Spin-exchange flip |r0 r1><r1 r0| + h.c., 16 x 16."""
    op = np.zeros((algebra.INTERNAL_DIM, algebra.INTERNAL_DIM), dtype=complex)
    i = algebra.internal_index("r0r1")
    j = algebra.internal_index("r1r0")
    op[i, j] = 1.0
    op[j, i] = 1.0
    return op


def pair_state_projector_16(label: str) -> np.ndarray:
    """|r_i r_j><r_i r_j| for a two-atom Rydberg pair state, 16 x 16."""
    idx = algebra.internal_index(f"r{label[0]}r{label[1]}")
    op = np.zeros((algebra.INTERNAL_DIM, algebra.INTERNAL_DIM), dtype=complex)
    op[idx, idx] = 1.0
    return op


# ---------------------------------------------------------------------------
# Hamiltonian terms (rad/s)


def drive_term(model: GateModel, phase: float, space: ProductSpace | None = None) -> np.ndarray:
    """Global drive at the control phase: sum over lasers and atoms of
    (omega_max / 2) (e^{i phase} |j><r_j| + h.c.)."""
    space = space or model.space()
    lower = space.embed_internal(drive_lowering_16())
    half = 0.5 * model.omega_max
    return half * (np.exp(1j * phase) * lower + np.exp(-1j * phase) * lower.conj().T)


def _pair_displacement(space: ProductSpace, mass: float, axis: str) -> np.ndarray:
    """Relative coordinate operator (r_A - r_B) along one axis, meters."""
    return algebra.position_operator(space, "A", axis, mass) - algebra.position_operator(
        space, "B", axis, mass
    )


def exchange_term(model: GateModel, space: ProductSpace | None = None) -> np.ndarray:
    """Exchange coupling with optional motional distance-fluctuation orders.

    The zeroth-order flip term is always present.  The first- and
    second-order corrections multiply the same flip operator by the
    relative-coordinate expansion of 1/R'^3 around the trap centers.
    """
    model.validate()
    space = space or model.space()
    j_ex = model.exchange_coupling
    distance = model.geom.distance
    flip = space.embed_internal(exchange_operator_16())
    factor = np.eye(space.dim, dtype=complex)
    if model.noise.exchange_motion_1z:
        dz = _pair_displacement(space, model.data.mass, "z")
        factor = factor - (3.0 / distance) * dz
    if model.noise.exchange_motion_2z:
        dz = _pair_displacement(space, model.data.mass, "z")
        factor = factor + (6.0 / distance**2) * (dz @ dz)
    if model.noise.exchange_motion_2x:
        dx = _pair_displacement(space, model.data.mass, "x")
        factor = factor - (3.0 / distance**2) * (dx @ dx)
    if model.noise.exchange_motion_2y:
        dy = _pair_displacement(space, model.data.mass, "y")
        factor = factor - (3.0 / distance**2) * (dy @ dy)
    return j_ex * (factor @ flip)


def vdw_term(model: GateModel, space: ProductSpace | None = None) -> np.ndarray:
    """van der Waals pair-state shifts and/or their first-order z correction.

    The flat shifts sum V_ij |r_i r_j><r_i r_j| (with V_10 = V_01) and are
    enabled by the ``vdw`` flag; the ``vdw_motion_1z`` flag adds the
    first-order distance-fluctuation correction -6 (z_A - z_B)/R times the
    same projector sum.  The flags are independent so each contribution can
    be budgeted alone.
    """
    model.validate()
    space = space or model.space()
    shifts = model.vdw_shifts()
    proj = sum(shifts[label] * pair_state_projector_16(label) for label in ("00", "01", "10", "11"))
    proj = space.embed_internal(proj)
    term = np.zeros((space.dim, space.dim), dtype=complex)
    if model.noise.vdw:
        term += proj
    if model.noise.vdw_motion_1z:
        dz = _pair_displacement(space, model.data.mass, "z")
        term += (-6.0 / model.geom.distance) * (dz @ proj)
    return term


def recoil_terms(model: GateModel, space: ProductSpace | None = None) -> np.ndarray:
    """Photon-recoil terms in the transformed frame.

    Detuning part: the single-photon recoil shift on each Rydberg level
    (zero when compensated by a laser-frequency offset).  Coupling part:
    (2 pi / m lambda) P^r_alpha p_alpha along the laser axis, which
    entangles internal and motional states.
    """
    model.validate()
    space = space or model.space()
    sign = -1.0 if model.noise.negate_kinetic else 1.0
    term = np.zeros((space.dim, space.dim), dtype=complex)
    if model.noise.recoil_detuning and not model.noise.detuning_compensation:
        for atom in ("A", "B"):
            for j, level in ((0, "r0"), (1, "r1")):
                shift = recoil_detuning(model.data, j)
                term += sign * shift * algebra.single_atom_operator(
                    space, algebra.level_projector(level), atom
                )
    if model.noise.recoil_coupling:
        axis = model.geom.laser_axis
        lam = model.data.lambda0
        coeff = 2.0 * math.pi / (model.data.mass * lam)  # (rad/s) per (kg m/s)
        for atom in ("A", "B"):
            proj = algebra.rydberg_projector(space, atom)
            mom = algebra.momentum_operator(space, atom, axis, model.data.mass)
            term += sign * coeff * (proj @ mom)
    return term


def kinetic_term(model: GateModel, space: ProductSpace | None = None) -> np.ndarray:
    """Free kinetic energy sum p^2 / 2m of every active mode, rad/s.

    The trap potential is off during the pulse, so this is the only
    motional drift; the trap frequency enters through the mode operators
    and the initial thermal states only.
    """
    space = space or model.space()
    sign = -1.0 if model.noise.negate_kinetic else 1.0
    term = np.zeros((space.dim, space.dim), dtype=complex)
    for mode in space.modes:
        mom = algebra.momentum_operator(space, mode.atom, mode.axis, model.data.mass)
        term += sign * (mom @ mom) / (2.0 * model.data.mass * HBAR)
    return term


def decay_term(model: GateModel, space: ProductSpace | None = None) -> np.ndarray:
    """Non-Hermitian Rydberg decay: -(i/2) Gamma_j |r_j><r_j| per atom."""
    space = space or model.space()
    term = np.zeros((space.dim, space.dim), dtype=complex)
    for atom in ("A", "B"):
        for rate, level in ((model.data.gamma0, "r0"), (model.data.gamma1, "r1")):
            term += (-0.5j * rate) * algebra.single_atom_operator(
                space, algebra.level_projector(level), atom
            )
    return term


def drift_term(model: GateModel, space: ProductSpace | None = None) -> np.ndarray:
    """Every phase-independent term of the assembled Hamiltonian."""
    model.validate()
    space = space or model.space()
    drift = exchange_term(model, space)
    if model.noise.vdw or model.noise.vdw_motion_1z:
        drift = drift + vdw_term(model, space)
    if space.modes:
        drift = drift + kinetic_term(model, space)
    if model.noise.recoil_detuning or model.noise.recoil_coupling:
        drift = drift + recoil_terms(model, space)
    if model.noise.decay:
        drift = drift + decay_term(model, space)
    return drift


def assemble(model: GateModel, phase: float, space: ProductSpace | None = None) -> np.ndarray:
    """Total Hamiltonian at one control phase: drift plus drive."""
    space = space or model.space()
    return drift_term(model, space) + drive_term(model, phase, space)


# ---------------------------------------------------------------------------
# Displacement-operator drive (cross-frame check)


def displaced_drive_term(
    model: GateModel, phase: float, space: ProductSpace | None = None
) -> np.ndarray:
    """Drive with the explicit momentum-kick phase e^{i eta (a + a+)}.

    Untransformed-frame form of the recoil physics.  Truncating the
    exponential displacement at a finite Fock cutoff is inexact, so this
    builder serves as an oracle for the transformed-frame implementation
    rather than as the production path.
    """
    space = space or model.space()
    axis = model.geom.laser_axis
    half = 0.5 * model.omega_max
    term = np.zeros((space.dim, space.dim), dtype=complex)
    local = algebra.transition("r0", "0") + algebra.transition("r1", "1")
    for atom in ("A", "B"):
        mode = space.mode(atom, axis)
        eta = lamb_dicke(model.data, mode.omega, 0)
        slot = space.mode_slot(atom, axis)
        x_quad = algebra.lowering(mode.cutoff) + algebra.raising(mode.cutoff)
        kick = algebra.embed(expm(1j * eta * x_quad), space, slot)
        lower = algebra.single_atom_operator(space, local, atom)
        op = np.exp(1j * phase) * (kick @ lower)
        term += half * (op + op.conj().T)
    return term


def assemble_displaced(model: GateModel, phase: float, space: ProductSpace | None = None) -> np.ndarray:
    """Total Hamiltonian with recoil carried by the displaced drive.

    Recoil flags are ignored here (the displacement operator contains that
    physics); everything else matches :func:`assemble`.
    """
    space = space or model.space()
    plain = replace(model, noise=model.noise.with_flags(recoil_detuning=False, recoil_coupling=False))
    return drift_term(plain, space) + displaced_drive_term(model, phase, space)

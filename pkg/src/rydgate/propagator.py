"""Piecewise-constant time evolution of states under assembled Hamiltonians.

Each pulse step has a constant Hamiltonian, so the propagator is a matrix
exponential per step.  Hermitian steps go through an eigendecomposition
(the fast path inside the optimizer); non-Hermitian steps (decay enabled)
use the general scaling-and-squaring exponential.  Step propagators are
built once per step and reused across all initial states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .algebra import ProductSpace, internal_index
from .hamiltonian import GateModel, drift_term, drive_lowering_16
from .pulses import PulseSchedule


def step_propagator(hamiltonian: np.ndarray, dt: float, hermitian: bool | None = None) -> np.ndarray:
    """exp(-i H dt) for a Hamiltonian in rad/s.

    ``hermitian`` skips the structure check when the caller already knows;
    Hermitian inputs use the eigenbasis (unitary to machine precision),
    anything else the general matrix exponential.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    hamiltonian = np.asarray(hamiltonian, dtype=complex)
    if not np.all(np.isfinite(hamiltonian)):
        raise FloatingPointError("Hamiltonian contains non-finite entries")
    if hermitian is None:
        scale = max(np.linalg.norm(hamiltonian), 1.0)
        hermitian = np.linalg.norm(hamiltonian - hamiltonian.conj().T) <= 1e-12 * scale
    if hermitian:
        evals, evecs = np.linalg.eigh(hamiltonian)
        phases = np.exp(-1j * evals * dt)
        return (evecs * phases) @ evecs.conj().T
    return expm(-1j * hamiltonian * dt)


def step_propagators(model: GateModel, pulse: PulseSchedule,
                     space: ProductSpace | None = None) -> list[np.ndarray]:
    """One propagator per pulse step; the Hamiltonian only changes through
    the control phase, so the drift is assembled once."""
    space = space or model.space()
    drift = drift_term(model, space)
    lower = space.embed_internal(drive_lowering_16())
    half = 0.5 * model.omega_max
    dt = pulse.dt
    hermitian = not model.noise.decay
    props = []
    for phase in pulse.phases:
        drive = half * (np.exp(1j * phase) * lower + np.exp(-1j * phase) * lower.conj().T)
        props.append(step_propagator(drift + drive, dt, hermitian=hermitian))
    return props


@dataclass
class EvolutionResult:
    """Final states and survival norms keyed by (internal label, Fock tuple)."""

    final_states: dict
    survival_norms: dict

    def state(self, q: str, fock: tuple = ()) -> np.ndarray:
        return self.final_states[(q, tuple(fock))]


def evolve(model: GateModel, pulse: PulseSchedule,
           inputs: Sequence[tuple[str, tuple]] | Sequence[str],
           space: ProductSpace | None = None) -> EvolutionResult:
    """Evolve product basis inputs |q, m> through the full pulse.

    ``inputs`` is a sequence of internal labels (e.g. "01") or of
    (label, fock indices) pairs.  All inputs share the per-step
    propagators.
    """
    space = space or model.space()
    keys = []
    for item in inputs:
        if isinstance(item, str):
            keys.append((item, ()))
        else:
            label, fock = item
            keys.append((label, tuple(fock)))
    if not keys:
        raise ValueError("no inputs supplied")
    columns = np.stack([space.basis_state(q, fock) for q, fock in keys], axis=1)
    for prop in step_propagators(model, pulse, space):
        columns = prop @ columns
    finals = {key: columns[:, i].copy() for i, key in enumerate(keys)}
    norms = {key: float(np.linalg.norm(vec)) for key, vec in finals.items()}
    return EvolutionResult(final_states=finals, survival_norms=norms)


def computational_finals(result: EvolutionResult, fock: tuple = ()) -> list[np.ndarray]:
    """The four final states for inputs 00, 01, 10, 11 at one motional input."""
    return [result.state(q, fock) for q in ("00", "01", "10", "11")]

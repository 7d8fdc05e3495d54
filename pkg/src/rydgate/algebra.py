"""Dense operator and state machinery on the two-atom product space.

The Hilbert space is the two-atom internal space (4 levels per atom:
|0>, |1>, |r0>, |r1>) tensored with any number of truncated harmonic
motional modes.  Operators and states are plain complex ndarrays; a
:class:`ProductSpace` instance carries the factor layout and provides the
embeddings.

Kronecker ordering is fixed everywhere: atom A internal, atom B internal,
then the motional modes in configuration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .constants import HBAR

# Single-atom level ordering.
LEVELS = ("0", "1", "r0", "r1")
N_LEVELS = 4
RYDBERG = (2, 3)          # indices of |r0>, |r1>
INTERNAL_DIM = N_LEVELS**2

#: Computational two-qubit labels in canonical order.
QUBIT_LABELS = ("00", "01", "10", "11")


def internal_index(label: str) -> int:
    """Index of the two-atom internal basis state |ab> = 4*idx(a) + idx(b).

    Labels concatenate two level names, e.g. "01", "r01", "r0r1".
    """
    split = 2 if label.startswith("r") else 1
    a, b = label[:split], label[split:]
    if a not in LEVELS or b not in LEVELS:
        raise ValueError(f"cannot parse two-atom label {label!r}")
    return N_LEVELS * LEVELS.index(a) + LEVELS.index(b)


#: Indices of the computational subspace {|00>, |01>, |10>, |11>} inside the
#: 16-dimensional internal space.
COMPUTATIONAL_INDICES = tuple(internal_index(q) for q in QUBIT_LABELS)


@dataclass(frozen=True)
class MotionalMode:
    """One harmonic motional mode: which atom, which axis, cutoff, frequency."""

    atom: str     # "A" or "B"
    axis: str     # "x", "y" or "z"
    cutoff: int   # Fock-space truncation M >= 1
    omega: float  # trap angular frequency, rad/s

    def __post_init__(self):
        if self.atom not in ("A", "B"):
            raise ValueError(f"atom must be 'A' or 'B', got {self.atom!r}")
        if self.axis not in ("x", "y", "z"):
            raise ValueError(f"axis must be one of x/y/z, got {self.axis!r}")
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")


class ProductSpace:
    """Factor layout of the internal x motional product space."""

    def __init__(self, modes: Sequence[MotionalMode] = ()):
        modes = tuple(modes)
        seen = set()
        for mode in modes:
            key = (mode.atom, mode.axis)
            if key in seen:
                raise ValueError(f"duplicate motional mode for atom {mode.atom}, axis {mode.axis}")
            seen.add(key)
        self.modes = modes
        self.factor_dims = (N_LEVELS, N_LEVELS) + tuple(m.cutoff for m in modes)
        self.motional_dim = int(np.prod([m.cutoff for m in modes], dtype=np.int64)) if modes else 1
        self.dim = INTERNAL_DIM * self.motional_dim

    def __repr__(self):
        return f"ProductSpace(dim={self.dim}, modes={list(self.modes)})"

    def mode_slot(self, atom: str, axis: str) -> int:
        """Factor index of a motional mode (internal factors are 0 and 1)."""
        for i, mode in enumerate(self.modes):
            if mode.atom == atom and mode.axis == axis:
                return 2 + i
        raise KeyError(f"no motional mode for atom {atom}, axis {axis}")

    def mode(self, atom: str, axis: str) -> MotionalMode:
        return self.modes[self.mode_slot(atom, axis) - 2]

    def has_mode(self, atom: str, axis: str) -> bool:
        return any(m.atom == atom and m.axis == axis for m in self.modes)

    def embed(self, local_op: np.ndarray, slot: int) -> np.ndarray:
        """Embed an operator acting on one factor, identity on the others."""
        return embed(local_op, self, slot)

    def embed_internal(self, op16: np.ndarray) -> np.ndarray:
        """Embed a full two-atom internal operator (16 x 16)."""
        op16 = np.asarray(op16, dtype=complex)
        if op16.shape != (INTERNAL_DIM, INTERNAL_DIM):
            raise ValueError(f"expected {INTERNAL_DIM}x{INTERNAL_DIM} internal operator, got {op16.shape}")
        if not self.modes:
            return op16.copy()
        return np.kron(op16, np.eye(self.motional_dim))

    def basis_state(self, internal: int | str, fock: Sequence[int] = ()) -> np.ndarray:
        """Product basis vector |internal> |m_1 ...> as a dense array."""
        if isinstance(internal, str):
            internal = internal_index(internal)
        fock = tuple(fock)
        if len(fock) != len(self.modes):
            raise ValueError(f"expected {len(self.modes)} Fock indices, got {len(fock)}")
        index = internal
        for mode, m in zip(self.modes, fock):
            if not 0 <= m < mode.cutoff:
                raise ValueError(f"Fock index {m} outside cutoff {mode.cutoff}")
            index = index * mode.cutoff + m
        state = np.zeros(self.dim, dtype=complex)
        state[index] = 1.0
        return state


def embed(local_op: np.ndarray, space: ProductSpace, slot: int) -> np.ndarray:
    """Identity on every factor except ``slot``, where ``local_op`` acts."""
    local_op = np.asarray(local_op, dtype=complex)
    dims = space.factor_dims
    if not 0 <= slot < len(dims):
        raise ValueError(f"slot {slot} outside factor range 0..{len(dims) - 1}")
    if local_op.shape != (dims[slot], dims[slot]):
        raise ValueError(
            f"operator shape {local_op.shape} does not match factor dimension {dims[slot]}"
        )
    factors = [np.eye(d, dtype=complex) for d in dims]
    factors[slot] = local_op
    return reduce(np.kron, factors)


def lowering(cutoff: int) -> np.ndarray:
    """Truncated annihilation operator, <m-1| a |m> = sqrt(m)."""
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(complex)


def raising(cutoff: int) -> np.ndarray:
    """Truncated creation operator, adjoint of :func:`lowering`."""
    return lowering(cutoff).conj().T


def ladder(space: ProductSpace, atom: str, axis: str, which: str = "lower") -> np.ndarray:
    """Embedded ladder operator of an active motional mode.

    Raises ``KeyError`` when no mode is configured for (atom, axis).
    """
    slot = space.mode_slot(atom, axis)
    cutoff = space.factor_dims[slot]
    if which == "lower":
        op = lowering(cutoff)
    elif which == "raise":
        op = raising(cutoff)
    else:
        raise ValueError(f"which must be 'lower' or 'raise', got {which!r}")
    return embed(op, space, slot)


def position_operator(space: ProductSpace, atom: str, axis: str, mass: float) -> np.ndarray:
    """Position of one atom along one axis: sqrt(hbar/2mw) (a + a+), meters."""
    mode = space.mode(atom, axis)
    x0 = math.sqrt(HBAR / (2.0 * mass * mode.omega))
    slot = space.mode_slot(atom, axis)
    local = x0 * (lowering(mode.cutoff) + raising(mode.cutoff))
    return embed(local, space, slot)


def momentum_operator(space: ProductSpace, atom: str, axis: str, mass: float) -> np.ndarray:
    """Momentum of one atom along one axis: i sqrt(m hbar w / 2) (a+ - a), kg m/s."""
    mode = space.mode(atom, axis)
    p0 = math.sqrt(mass * HBAR * mode.omega / 2.0)
    slot = space.mode_slot(atom, axis)
    local = 1j * p0 * (raising(mode.cutoff) - lowering(mode.cutoff))
    return embed(local, space, slot)


def single_atom_operator(space: ProductSpace, op4: np.ndarray, atom: str) -> np.ndarray:
    """Embed a 4 x 4 single-atom internal operator on atom A or B."""
    slot = 0 if atom == "A" else 1
    return embed(op4, space, slot)


def level_projector(level: str) -> np.ndarray:
    """|level><level| on the 4-dimensional single-atom space."""
    idx = LEVELS.index(level)
    proj = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    proj[idx, idx] = 1.0
    return proj


def transition(upper: str, lower: str) -> np.ndarray:
    """|lower><upper| on the single-atom space (de-excitation convention)."""
    op = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    op[LEVELS.index(lower), LEVELS.index(upper)] = 1.0
    return op


def rydberg_projector(space: ProductSpace, atom: str) -> np.ndarray:
    """Projector onto the Rydberg manifold of one atom, embedded."""
    local = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    for idx in RYDBERG:
        local[idx, idx] = 1.0
    return single_atom_operator(space, local, atom)


def rydberg_number(space: ProductSpace) -> np.ndarray:
    """Total number of Rydberg excitations, embedded."""
    return rydberg_projector(space, "A") + rydberg_projector(space, "B")


def partial_trace_motional(rho: np.ndarray, space: ProductSpace) -> np.ndarray:
    """Trace out every motional mode, returning the 16 x 16 internal state."""
    if not space.modes:
        raise ValueError("space has no motional modes to trace out")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (space.dim, space.dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match space dim {space.dim}")
    mot = space.motional_dim
    reshaped = rho.reshape(INTERNAL_DIM, mot, INTERNAL_DIM, mot)
    return np.einsum("imjm->ij", reshaped)


def is_hermitian(op: np.ndarray, tol: float = 1e-12) -> bool:
    op = np.asarray(op)
    scale = max(np.linalg.norm(op), 1.0)
    return np.linalg.norm(op - op.conj().T) <= tol * scale

"""Bell fidelity, rotation optimization, thermal weights, Uhlmann fidelity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydgate.algebra import COMPUTATIONAL_INDICES
from rydgate.constants import TWO_PI
from rydgate.fidelity import (
    ISWAP,
    bell_fidelity,
    boltzmann_weights,
    optimize_rotation,
    rotated_targets,
    su2_rotation,
    thermal_fidelity,
    uhlmann_fidelity,
)
from rydgate.hamiltonian import NoiseConfig, pair_modes
from rydgate.propagator import evolve
from rydgate.pulses import PulseSchedule, RotationAngles

from conftest import OMEGA_MAX, OMEGA_Z, make_model


def lift(comp_vectors):
    """Scatter 4-component computational vectors into the 16-dim space."""
    finals = []
    for vec in comp_vectors:
        full = np.zeros(16, dtype=complex)
        full[list(COMPUTATIONAL_INDICES)] = vec
        finals.append(full)
    return finals


def test_su2_rotation_basics():
    assert np.allclose(su2_rotation(RotationAngles()), np.eye(2))
    assert np.allclose(su2_rotation(RotationAngles(theta=math.pi)), [[0, -1], [1, 0]])
    rot = su2_rotation(RotationAngles(0.7, -1.2, 2.4))
    assert np.allclose(rot @ rot.conj().T, np.eye(2), atol=1e-14)


def test_bell_fidelity_exact_gate():
    finals = lift(ISWAP.T.conj().T[:, :].T)  # columns of ISWAP
    finals = lift([ISWAP[:, q] for q in range(4)])
    assert bell_fidelity(finals) == pytest.approx(1.0, abs=1e-14)


def test_bell_fidelity_identity_finals():
    finals = lift(np.eye(4, dtype=complex).T)
    # Only 00 and 11 overlap: |1 + 0 + 0 + 1|^2 / 16.
    assert bell_fidelity(finals) == pytest.approx(0.25, abs=1e-14)


def test_bell_fidelity_known_rotation_recovered(rng):
    angles = RotationAngles(0.9, 0.4, -1.1)
    targets = rotated_targets(angles)
    finals = lift([targets[:, q] for q in range(4)])
    assert bell_fidelity(finals, angles) == pytest.approx(1.0, abs=1e-13)
    best_angles, best = optimize_rotation(finals)
    assert best == pytest.approx(1.0, abs=1e-9)


def test_global_phase_absorbed():
    phase = 0.77
    finals = lift([np.exp(1j * phase) * ISWAP[:, q] for q in range(4)])
    _, best = optimize_rotation(finals)
    assert best == pytest.approx(1.0, abs=1e-9)


def test_optimize_rotation_beats_grid(rng):
    base = [ISWAP[:, q] + 0.15 * (rng.normal(size=4) + 1j * rng.normal(size=4)) for q in range(4)]
    base = [v / np.linalg.norm(v) for v in base]
    finals = lift(base)
    _, best = optimize_rotation(finals)
    grid = np.linspace(0, 2 * math.pi, 20, endpoint=False)
    grid_best = 0.0
    for t in grid:
        for p in grid:
            for l in grid:
                grid_best = max(grid_best, bell_fidelity(finals, RotationAngles(t, p, l)))
    assert best >= grid_best - 1e-6


def test_swap_symmetry_of_optimized_fidelity(rng):
    vecs = [ISWAP[:, q] + 0.1 * (rng.normal(size=4) + 1j * rng.normal(size=4)) for q in range(4)]
    finals = lift(vecs)
    # Swap the atoms: exchange labels 01 <-> 10 and permute amplitudes.
    perm = [0, 2, 1, 3]
    swapped = lift([vecs[perm[q]][perm] for q in range(4)])
    _, f_orig = optimize_rotation(finals)
    _, f_swap = optimize_rotation(swapped)
    assert f_swap == pytest.approx(f_orig, abs=1e-8)


def test_boltzmann_weights_zero_temperature():
    w = boltzmann_weights(OMEGA_Z, 0.0, 6)
    assert w[0] == 1.0
    assert np.all(w[1:] == 0.0)


def test_boltzmann_ratio_at_reference_point():
    w = boltzmann_weights(TWO_PI * 100e3, 1e-6, 8)
    assert w[1] / w[0] == pytest.approx(8.236e-3, rel=1e-3)


@settings(max_examples=20, deadline=None)
@given(
    st.integers(min_value=1, max_value=12),
    st.floats(min_value=0.0, max_value=50e-6),
)
def test_boltzmann_weights_normalized(cutoff, temperature):
    w = boltzmann_weights(TWO_PI * 80e3, temperature, cutoff)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(w >= 0)
    assert np.all(np.diff(w) <= 1e-15)  # non-increasing in m


def test_uhlmann_identity_and_orthogonal():
    rho = np.diag([0.25, 0.75]).astype(complex)
    assert uhlmann_fidelity(rho, rho) == pytest.approx(1.0, abs=1e-12)
    zero = np.diag([1.0, 0.0]).astype(complex)
    one = np.diag([0.0, 1.0]).astype(complex)
    assert uhlmann_fidelity(zero, one) == pytest.approx(0.0, abs=1e-12)
    assert uhlmann_fidelity(zero, np.eye(2) / 2) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_uhlmann_pure_states_match_overlap(seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=5) + 1j * rng.normal(size=5)
    phi = rng.normal(size=5) + 1j * rng.normal(size=5)
    psi /= np.linalg.norm(psi)
    phi /= np.linalg.norm(phi)
    rho = np.outer(psi, psi.conj())
    sigma = np.outer(phi, phi.conj())
    expected = abs(np.vdot(psi, phi)) ** 2
    assert uhlmann_fidelity(rho, sigma) == pytest.approx(expected, abs=1e-10)
    assert uhlmann_fidelity(sigma, rho) == pytest.approx(expected, abs=1e-10)


def test_uhlmann_rejects_bad_inputs():
    with pytest.raises(ValueError):
        uhlmann_fidelity(np.diag([1.0, -0.2]).astype(complex), np.eye(2) / 2)
    with pytest.raises(ValueError):
        uhlmann_fidelity(np.array([[0, 1], [0, 0]], dtype=complex), np.eye(2) / 2)


def test_thermal_fidelity_decoupled_limit(rb100, rng):
    """With motional modes present but no coupling, the thermal functional
    reduces to the pure Bell fidelity."""
    phases = 0.5 * np.sin(math.pi * (np.arange(30) + 0.5) / 30) + 0.2
    internal = make_model(rb100)
    pulse = PulseSchedule(duration=5.0, phases=phases, ratio=2.1, omega_max=OMEGA_MAX)
    result = evolve(internal, pulse, ["00", "01", "10", "11"])
    finals = [result.state(q) for q in ("00", "01", "10", "11")]
    angles = RotationAngles(0.3, -0.2, 0.5)
    f_bell = bell_fidelity(finals, angles)

    motional = make_model(rb100, motion=pair_modes("z", 3, OMEGA_Z))
    f_thermal = thermal_fidelity(motional, pulse, angles=angles)
    assert f_thermal == pytest.approx(f_bell, abs=1e-8)


def test_thermal_fidelity_requires_modes(rb100):
    model = make_model(rb100)
    pulse = PulseSchedule(duration=2.0, phases=np.zeros(10), ratio=2.1, omega_max=OMEGA_MAX)
    with pytest.raises(ValueError):
        thermal_fidelity(model, pulse)


# The monotone temperature trend of the exchange-motion channel needs a
# pulse that actually implements the gate; it is checked with an optimized
# pulse in test_experiments.py.

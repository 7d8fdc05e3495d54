"""Operator embeddings, ladder operators, projectors, partial trace."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydgate import algebra
from rydgate.algebra import (
    MotionalMode,
    ProductSpace,
    embed,
    internal_index,
    ladder,
    lowering,
    momentum_operator,
    partial_trace_motional,
    position_operator,
    raising,
    rydberg_projector,
)
from rydgate.constants import HBAR, TWO_PI

MASS = 1.4431606e-25
OMEGA = TWO_PI * 100e3


def two_mode_space(cutoff=3):
    return ProductSpace(
        [MotionalMode("A", "z", cutoff, OMEGA), MotionalMode("B", "z", cutoff, OMEGA)]
    )


def test_internal_indexing():
    assert internal_index("00") == 0
    assert internal_index("01") == 1
    assert internal_index("10") == 4
    assert internal_index("r0r1") == 4 * 2 + 3
    assert algebra.COMPUTATIONAL_INDICES == (0, 1, 4, 5)


def test_embed_identity_is_identity():
    space = two_mode_space(2)
    for slot in range(4):
        d = space.factor_dims[slot]
        assert np.allclose(embed(np.eye(d), space, slot), np.eye(space.dim))


def test_embed_dimension_mismatch():
    space = two_mode_space(2)
    with pytest.raises(ValueError):
        embed(np.eye(3), space, 0)
    with pytest.raises(ValueError):
        embed(np.eye(2), space, 7)


def test_embeds_on_disjoint_slots_commute(rng):
    space = two_mode_space(3)
    x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    y = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    ex = embed(x, space, 1)
    ey = embed(y, space, 2)
    assert np.allclose(ex @ ey, ey @ ex)
    # Joint tensor equals the factor-wise product.
    joint = np.kron(np.kron(np.kron(np.eye(4), x), y), np.eye(3))
    assert np.allclose(ex @ ey, joint)


def test_embed_transition_reaches_single_target():
    # |r0><0| on atom A applied to |01> populates exactly |r0 1>.
    space = ProductSpace()
    op = algebra.transition("r0", "0").conj().T   # |r0><0|
    embedded = algebra.single_atom_operator(space, op, "A")
    out = embedded @ space.basis_state("01")
    expected = np.zeros(16, dtype=complex)
    expected[internal_index("r01")] = 1.0
    assert np.allclose(out, expected)
    # Oracle: explicit 16x16 Kronecker product.
    kron = np.kron(op, np.eye(4))
    assert np.allclose(embedded, kron)


def test_lowering_matrix_small():
    assert np.allclose(lowering(2), [[0, 1], [0, 0]])
    n_op = raising(4) @ lowering(4)
    assert np.allclose(np.diag(n_op).real, [0, 1, 2, 3])


def test_ladder_requires_active_mode():
    space = two_mode_space(2)
    with pytest.raises(KeyError):
        ladder(space, "A", "x")
    with pytest.raises(ValueError):
        ladder(space, "A", "z", which="sideways")


def test_truncated_commutator_defect():
    m = 5
    a = lowering(m)
    defect = a @ raising(m) - raising(m) @ a
    expected = np.eye(m, dtype=complex)
    expected[m - 1, m - 1] = 1 - m
    assert np.allclose(defect, expected)


def test_position_ground_state_variance():
    space = ProductSpace([MotionalMode("A", "z", 6, OMEGA), MotionalMode("B", "z", 6, OMEGA)])
    x = position_operator(space, "A", "z", MASS)
    ground = space.basis_state("00", (0, 0))
    var = ground.conj() @ (x @ x) @ ground
    assert var.real == pytest.approx(HBAR / (2 * MASS * OMEGA), rel=1e-12)


def test_momentum_is_hermitian_and_scaled():
    space = two_mode_space(5)
    p = momentum_operator(space, "B", "z", MASS)
    assert algebra.is_hermitian(p)
    ground = space.basis_state("00", (0, 0))
    var = (ground.conj() @ (p @ p) @ ground).real
    assert var == pytest.approx(MASS * HBAR * OMEGA / 2, rel=1e-12)


def test_rydberg_projector_action():
    space = ProductSpace()
    proj = rydberg_projector(space, "A")
    assert np.allclose(proj @ space.basis_state("00"), 0.0)
    state = space.basis_state("r01")
    assert np.allclose(proj @ state, state)
    assert np.trace(proj).real == pytest.approx(2 * 16 / 4)


def test_partial_trace_product_state(rng):
    space = two_mode_space(3)
    rho_int = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    rho_int = rho_int @ rho_int.conj().T
    rho_mot = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    rho_mot = rho_mot @ rho_mot.conj().T
    rho = np.kron(rho_int, rho_mot)
    reduced = partial_trace_motional(rho, space)
    assert np.allclose(reduced, rho_int * np.trace(rho_mot), atol=1e-10)


def test_partial_trace_entangled_state():
    # Internal |00>/|01> maximally entangled with the first mode's 0/1.
    space = ProductSpace([MotionalMode("A", "z", 2, OMEGA)])
    psi = (space.basis_state("00", (0,)) + space.basis_state("01", (1,))) / np.sqrt(2)
    reduced = partial_trace_motional(np.outer(psi, psi.conj()), space)
    assert reduced[0, 0] == pytest.approx(0.5)
    assert reduced[1, 1] == pytest.approx(0.5)
    assert abs(reduced[0, 1]) < 1e-14


def test_partial_trace_oracle_three_modes(rng):
    modes = [
        MotionalMode("A", "z", 2, OMEGA),
        MotionalMode("B", "z", 2, OMEGA),
        MotionalMode("A", "x", 2, OMEGA / 5),
    ]
    space = ProductSpace(modes)
    vec = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    vec /= np.linalg.norm(vec)
    rho = np.outer(vec, vec.conj())
    reduced = partial_trace_motional(rho, space)
    # Naive index-summation oracle.
    mot = space.motional_dim
    oracle = np.zeros((16, 16), dtype=complex)
    for i in range(16):
        for j in range(16):
            for m in range(mot):
                oracle[i, j] += rho[i * mot + m, j * mot + m]
    assert np.max(np.abs(reduced - oracle)) < 1e-12
    assert np.trace(reduced).real == pytest.approx(np.trace(rho).real, abs=1e-12)
    assert np.linalg.eigvalsh(reduced).min() > -1e-10


def test_partial_trace_requires_modes():
    with pytest.raises(ValueError):
        partial_trace_motional(np.eye(16), ProductSpace())


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=1_000_000))
def test_partial_trace_preserves_trace_and_psd(seed):
    rng = np.random.default_rng(seed)
    space = ProductSpace([MotionalMode("A", "z", 3, OMEGA), MotionalMode("B", "z", 2, OMEGA)])
    mat = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(size=(space.dim, space.dim))
    rho = mat @ mat.conj().T
    rho /= np.trace(rho).real
    reduced = partial_trace_motional(rho, space)
    assert np.trace(reduced).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(reduced).min() >= -1e-10


def test_duplicate_mode_rejected():
    with pytest.raises(ValueError):
        ProductSpace([MotionalMode("A", "z", 2, OMEGA), MotionalMode("A", "z", 3, OMEGA)])


def test_basis_state_validation():
    space = two_mode_space(2)
    with pytest.raises(ValueError):
        space.basis_state("00", (0,))
    with pytest.raises(ValueError):
        space.basis_state("00", (0, 5))

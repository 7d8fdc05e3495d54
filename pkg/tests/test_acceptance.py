"""End-to-end acceptance criteria.

One test per criterion (criterion 4 is split to isolate a published-table
inconsistency; see the project notes).  Each check prints a PASS/FAIL line;
run with ``pytest tests/test_acceptance.py -v -s`` to watch them.  Pulse
synthesis results are cached in .pytest_cache, so the first run carries the
optimizer cost and later runs are fast.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from rydgate.algebra import MotionalMode, ProductSpace, internal_index, partial_trace_motional
from rydgate.atomic import GeometryConfig, dipole_coupling, range_for_ratio, recoil_detuning
from rydgate.constants import TWO_PI
from rydgate.experiments import (
    SweepSpec,
    coupling_strengths,
    error_budget,
    find_magic_time,
    pi_j_pi_duration,
    recapture_displacement,
    simulate_pi_j_pi,
    sweep,
)
from rydgate.fidelity import (
    ISWAP,
    bell_fidelity,
    boltzmann_weights,
    optimize_rotation,
    pulse_infidelity,
    uhlmann_fidelity,
)
from rydgate.grape import OptimizerOptions, _InternalProblem, _optimization_model, cost
from rydgate.hamiltonian import (
    GateModel,
    NoiseConfig,
    assemble,
    assemble_displaced,
    pair_modes,
)
from rydgate.propagator import evolve, step_propagator, step_propagators
from rydgate.pulses import PulseSchedule, RotationAngles

from conftest import OMEGA_MAX, OMEGA_Z, TEMPERATURE, make_model

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

TIME_OPTIMAL_DURATIONS = [
    (2.1, 11.95),
    (0.7, 8.2),
    (0.1, 8.84),
    (3.25, 13.38),
    (4.5, 13.8),
]


class Checks:
    def __init__(self, criterion):
        self.criterion = criterion
        self.failures = []

    def add(self, label, ok, detail):
        line = f"[acceptance] {self.criterion} {label}: {detail} -> {'PASS' if ok else 'FAIL'}"
        print(line)
        if not ok:
            self.failures.append(line)

    def within(self, label, value, expected, rel):
        ok = abs(value - expected) <= rel * abs(expected)
        self.add(label, ok, f"{value:.4g} (expect {expected:.4g} +-{100 * rel:.0f}%)")

    def in_band(self, label, value, lo, hi):
        ok = lo <= value <= hi
        self.add(label, ok, f"{value:.4g} (expect in [{lo:.3g}, {hi:.3g}])")

    def finish(self):
        assert not self.failures, "\n".join(self.failures)


# --------------------------------------------------------------------------
# Criterion 1: time-optimal durations


@pytest.mark.parametrize("ratio,expected", TIME_OPTIMAL_DURATIONS)
def test_c1_time_optimal_duration(pulse_library, ratio, expected):
    checks = Checks("C1")
    entry = pulse_library.time_optimal(ratio)
    checks.add(
        f"T*omega_max at ratio {ratio}",
        abs(entry["t_star"] - expected) <= 0.15,
        f"{entry['t_star']:.2f} (expect {expected} +-0.15), cost {entry['final_cost']:.2e}",
    )
    checks.add(
        f"runtime at ratio {ratio}",
        entry["elapsed_s"] <= 600.0,
        f"{entry['elapsed_s']:.0f} s (budget 600 s)",
    )
    checks.finish()


# --------------------------------------------------------------------------
# Criterion 2: robust duration


def test_c2_robust_duration(pulse_library):
    checks = Checks("C2")
    entry = pulse_library.robust(2.1)
    checks.add(
        "robust duration at ratio 2.1",
        abs(entry["duration"] - 12.1) <= 0.15,
        f"{entry['duration']:.2f} (expect 12.1 +-0.15)",
    )
    checks.add(
        "vdW-only infidelity",
        entry["final_cost"] <= 2e-4,
        f"{entry['final_cost']:.3e} (expect <= 2e-4)",
    )
    checks.finish()


# --------------------------------------------------------------------------
# Criterion 3: error budget


@pytest.fixture(scope="module")
def budgets(pulse_library, rb100):
    model = make_model(rb100, ratio=2.1)
    robust = error_budget(pulse_library.robust(2.1)["pulse"], model)
    to = error_budget(
        pulse_library.time_optimal(2.1)["pulse"], model,
        channels=["no_noise", "vdw", "decay", "motion_z",
                  "recoil_detuning_compensated", "all"],
    )
    return to, robust


def test_c3_error_budget(budgets):
    to, robust = budgets
    checks = Checks("C3")
    checks.in_band("robust decay channel", robust.row("decay").excess,
                   0.8 * 7.0e-4, 1.2 * 7.0e-4)
    checks.in_band("robust z-motion channel", robust.row("motion_z").excess,
                   3.7e-5 / 2, 4.3e-5 * 2)
    checks.add(
        "robust compensated recoil detuning",
        robust.row("recoil_detuning_compensated").excess < 1e-7,
        f"{robust.row('recoil_detuning_compensated').excess:.2e} (expect < 1e-7)",
    )
    checks.in_band("robust all-noise", robust.row("all").infidelity,
                   9.9e-4 / 1.5, 9.9e-4 * 1.5)
    checks.in_band("TO vdW channel", to.row("vdw").infidelity,
                   0.7 * 1.3e-2, 1.3 * 1.3e-2)
    # Report invariants (raw rows, time-optimal native model).
    raw = [row.infidelity for name, row in to.rows.items() if name != "all"]
    checks.add(
        "no-noise row is the floor",
        all(to.row("no_noise").infidelity <= r + 1e-7 for r in raw),
        f"baseline {to.row('no_noise').infidelity:.2e}",
    )
    checks.add(
        "all row dominates",
        to.row("all").infidelity >= max(raw) - 1e-5,
        f"all {to.row('all').infidelity:.2e} vs max row {max(raw):.2e}",
    )
    checks.finish()


def test_c3_budget_cutoff_convergence(pulse_library, rb100):
    checks = Checks("C3")
    model = make_model(rb100, ratio=2.1)
    pulse = pulse_library.robust(2.1)["pulse"]
    coarse = error_budget(pulse, model, cutoff=5, channels=["exchange_1z"])
    fine = error_budget(pulse, model, cutoff=7, channels=["exchange_1z"])
    a, b = coarse.row("exchange_1z").excess, fine.row("exchange_1z").excess
    checks.add(
        "motional cutoff convergence",
        abs(a - b) <= 0.1 * abs(b),
        f"cutoff 5 -> {a:.3e}, cutoff 7 -> {b:.3e}",
    )
    checks.finish()


# --------------------------------------------------------------------------
# Criterion 4: analytic coupling strengths


def test_c4_coupling_strengths(rb100):
    checks = Checks("C4")
    model = make_model(rb100, ratio=2.1)
    values = {k: v / TWO_PI for k, v in coupling_strengths(model).items()}
    expected = {
        "vdw": 9.6e5,
        "decay": 1.3e3,
        "exchange_1z": 2.4e4,
        "exchange_2x": 6.6e2,
        "exchange_2y": 5.9e1,
        "exchange_2z": 1.2e2,
        "recoil_detuning": 2.6e4,
    }
    for key, ref in expected.items():
        checks.within(f"coupling {key}", values[key], ref, 0.05)
    checks.finish()


def test_c4_vdw_first_order_coupling(rb100):
    """Published value 9.2e3 is inconsistent with the same table's other
    rows (2 * 2.4e4 / J * 9.6e5 = 9.7e3); our self-consistent evaluation
    at the exact operating distance gives 9.85e3 (+7%).  Asserted at the
    stated +-5% anyway; see the project notes for the analysis.
    """
    checks = Checks("C4")
    model = make_model(rb100, ratio=2.1)
    value = coupling_strengths(model)["vdw_1z"] / TWO_PI
    checks.within("coupling vdw_1z", value, 9.2e3, 0.05)
    checks.finish()


# --------------------------------------------------------------------------
# Criterion 5: protocol baselines


def test_c5_protocol_baselines(rb100):
    checks = Checks("C5")
    for ratio in (0.1, 2.1, 50.0):
        exact = math.pi * (4 + ratio) / 2
        checks.add(
            f"pi-J-pi duration formula at ratio {ratio}",
            pi_j_pi_duration(ratio) == exact,
            f"{pi_j_pi_duration(ratio):.6g} == pi(4+r)/2",
        )
    model = make_model(rb100, ratio=2.1)
    inf50 = 1.0 - simulate_pi_j_pi(model, 50.0)
    checks.in_band("pi-J-pi infidelity at ratio 50 (no decay)", inf50, 5e-4, 2e-3)
    magic1 = find_magic_time(0.1)
    magic2 = find_magic_time(0.2)
    checks.add("magic time at ratio 0.1", abs(magic1 - 62.3) <= 0.3,
               f"{magic1:.2f} (expect 62.3 +-0.3)")
    checks.add("magic time at ratio 0.2", abs(magic2 - 31.2) <= 0.3,
               f"{magic2:.2f} (expect 31.2 +-0.3)")
    checks.finish()


# --------------------------------------------------------------------------
# Criterion 6: derived parameters


def test_c6_derived_parameters(rb100):
    checks = Checks("C6")
    j = dipole_coupling(rb100, 20e-6) / (TWO_PI * 1e6)
    checks.within("J/2pi at n=100, R=20 um [MHz]", j, 4.58, 0.02)
    r = range_for_ratio(OMEGA_MAX, 2.1, rb100) * 1e6
    checks.within("R at ratio 2.1, 10 MHz [um]", r, 19.7, 0.02)
    geom = GeometryConfig(distance=19.7e-6, omega_x=OMEGA_Z / 5, omega_y=OMEGA_Z,
                          omega_z=OMEGA_Z, temperature=TEMPERATURE)
    model = GateModel(data=rb100, geom=geom, omega_max=OMEGA_MAX)
    est = recapture_displacement(model, 190e-9)
    checks.within("recapture displacement [nm]", est.displacement * 1e9, 0.06, 0.02)
    checks.within("oscillator size [nm]", est.oscillator_size * 1e9, 24.0, 0.02)
    checks.within("recoil shift /2pi [Hz]", recoil_detuning(rb100) / TWO_PI, 2.6e4, 0.02)
    checks.finish()


# --------------------------------------------------------------------------
# Criterion 7: property suites (no published numbers involved)


def test_c7_property_suite(rb100, pulse_library):
    checks = Checks("C7")
    rng = np.random.default_rng(2024)

    # Propagator unitarity without decay.
    h = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    h = h + h.conj().T
    u = step_propagator(h, 0.21)
    checks.add("propagator unitarity", np.linalg.norm(u @ u.conj().T - np.eye(16)) < 1e-12,
               "||U U+ - 1|| < 1e-12")

    # Norm monotonicity with decay.
    model = make_model(rb100, noise=NoiseConfig(decay=True))
    pulse = PulseSchedule(duration=8.0, phases=rng.normal(size=40), ratio=2.1,
                          omega_max=OMEGA_MAX)
    state = model.space().basis_state("01")
    norms = [1.0]
    for u in step_propagators(model, pulse):
        state = u @ state
        norms.append(float(np.linalg.norm(state)))
    checks.add("survival norm monotone under decay",
               bool(np.all(np.diff(norms) <= 1e-12)), f"final norm {norms[-1]:.6f}")

    # Partial trace preserves trace and positivity.
    space = ProductSpace(pair_modes("z", 3, OMEGA_Z))
    mat = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(size=(space.dim, space.dim))
    rho = mat @ mat.conj().T
    rho /= np.trace(rho).real
    red = partial_trace_motional(rho, space)
    checks.add("partial trace preserves trace/PSD",
               abs(np.trace(red).real - 1) < 1e-12 and np.linalg.eigvalsh(red).min() > -1e-10,
               "trace 1, min eig >= -1e-10")

    # Uhlmann fidelity equals the squared overlap for pure states.
    psi = rng.normal(size=6) + 1j * rng.normal(size=6)
    phi = rng.normal(size=6) + 1j * rng.normal(size=6)
    psi /= np.linalg.norm(psi)
    phi /= np.linalg.norm(phi)
    uf = uhlmann_fidelity(np.outer(psi, psi.conj()), np.outer(phi, phi.conj()))
    checks.add("Uhlmann pure-state overlap",
               abs(uf - abs(np.vdot(psi, phi)) ** 2) < 1e-10, f"|delta| = {abs(uf - abs(np.vdot(psi, phi))**2):.1e}")

    # Analytic vs finite-difference gradients.
    problem = _InternalProblem(_optimization_model(make_model(rb100), vdw=True))
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(8, 24))
        params = np.concatenate([rng.normal(size=n), rng.uniform(-2, 2, 3)])
        duration = float(rng.uniform(3.0, 8.0))
        _, g = problem.cost_grad(params, duration)
        gfd = problem.fd_gradient(params, duration, 1e-6)
        worst = max(worst, np.linalg.norm(g - gfd) / max(np.linalg.norm(gfd), 1e-12))
    checks.add("analytic vs FD gradient", worst < 1e-6, f"worst rel err {worst:.1e}")

    # Transformed-frame recoil vs displaced drive at cutoff >= 8.
    cutoff = 8
    motion = pair_modes("z", cutoff, OMEGA_Z)
    noise = NoiseConfig(recoil_detuning=True, recoil_coupling=True)
    rec_model = make_model(rb100, noise=noise, motion=motion)
    space = rec_model.space()
    steps = 20
    dt = 2.0 / OMEGA_MAX / steps
    phases = 0.5 * np.sin(math.pi * (np.arange(steps) + 0.5) / steps)
    psi_t = space.basis_state("01", (0, 0))
    psi_d = psi_t.copy()
    for phi_k in phases:
        psi_t = step_propagator(assemble(rec_model, phi_k, space), dt, hermitian=True) @ psi_t
        psi_d = step_propagator(assemble_displaced(rec_model, phi_k, space), dt,
                                hermitian=True) @ psi_d
    comp = [internal_index(q) for q in ("00", "01", "10", "11")]
    mot = space.motional_dim
    delta = np.max(np.abs(np.abs(psi_t.reshape(16, mot)[comp]) ** 2
                          - np.abs(psi_d.reshape(16, mot)[comp]) ** 2))
    checks.add("recoil frame equivalence", delta < 1e-6, f"max population delta {delta:.1e}")

    # Boltzmann weights normalize.
    for cut in (1, 4, 9):
        w = boltzmann_weights(OMEGA_Z, TEMPERATURE, cut)
        assert abs(w.sum() - 1) < 1e-12
    checks.add("Boltzmann normalization", True, "sums to 1 for all cutoffs")

    # Exact-iSWAP outputs give F = 1; a global phase is absorbed.
    finals = []
    for q in range(4):
        vec = np.zeros(16, dtype=complex)
        vec[comp] = ISWAP[:, q]
        finals.append(vec)
    checks.add("F = 1 for exact gate outputs",
               abs(bell_fidelity(finals) - 1) < 1e-13, "exact targets")
    phased = [np.exp(0.9j) * v for v in finals]
    _, best = optimize_rotation(phased)
    checks.add("global-phase invariance", abs(best - 1) < 1e-9, f"F = {best:.12f}")
    checks.finish()


# --------------------------------------------------------------------------
# Criterion 8: qualitative sweep shapes


def _all_noise_model(base):
    geom = replace(base.geom, laser_axis="z")
    noise = NoiseConfig(vdw=True, decay=True, exchange_motion_1z=True, vdw_motion_1z=True,
                        exchange_motion_2z=True, recoil_detuning=True,
                        detuning_compensation=True, recoil_coupling=True)
    return replace(base, geom=geom, noise=noise,
                   motion=pair_modes("z", 6, base.geom.omega_z))


def test_c8_ratio_plateau(pulse_library, rb100):
    """Robust pulses in the mid-ratio window keep 1 - F <= 2e-3 with every
    noise channel on."""
    checks = Checks("C8")
    for ratio in (2.1, 3.25, 4.5):
        pulse = pulse_library.robust(ratio)["pulse"]
        model = make_model(rb100, ratio=ratio)
        inf = pulse_infidelity(_all_noise_model(model), pulse, angles=pulse.rotation)
        checks.add(f"all-noise infidelity at ratio {ratio}", inf <= 2e-3,
                   f"{inf:.3e} (expect <= 2e-3)")
    checks.finish()


def test_c8_robust_duration_tracks_time_optimal(pulse_library):
    """Above ratio ~3 the robust pulse keeps the time-optimal duration."""
    checks = Checks("C8")
    for ratio in (3.25, 4.5):
        t_to = pulse_library.time_optimal(ratio)["t_star"]
        t_rob = pulse_library.robust(ratio)["duration"]
        checks.add(f"robust vs TO duration at ratio {ratio}",
                   t_rob - t_to <= 0.05 + 1e-9, f"{t_rob:.2f} vs {t_to:.2f}")
    checks.finish()


def test_c8_trap_frequency_optimum(pulse_library, rb100):
    """With the laser along the interatomic axis, position fluctuations
    (soft traps) and recoil kicks (stiff traps) compete, leaving an interior
    optimum in the scanned window."""
    checks = Checks("C8")
    pulse = pulse_library.robust(2.1)["pulse"]
    model = make_model(rb100, ratio=2.1)
    grid = (40.0, 70.0, 90.0, 120.0, 160.0)
    spec = SweepSpec(variable="omega_z", grid=grid, model=model, pulse=pulse)
    rows = sweep(spec)
    for row in rows:
        checks.add(f"omega_z point {row['value']} kHz ran", row["error"] == "",
                   row["error"] or
                   f"z: {row['infidelity_laser_z']:.3e}  x: {row['infidelity_laser_x']:.3e}  "
                   f"none: {row['infidelity_no_recoil']:.3e}")
    infs = [row["infidelity_laser_z"] for row in rows]
    best = int(np.argmin(infs))
    checks.add("interior optimum for laser along z",
               0 < best < len(grid) - 1 and 60.0 <= grid[best] <= 130.0,
               f"optimum at {grid[best]:.0f} kHz (expect interior, in [60, 130])")
    no_recoil = [row["infidelity_no_recoil"] for row in rows]
    checks.add("no-recoil variant is monotone (no interior trade-off)",
               all(a >= b - 1e-9 for a, b in zip(no_recoil, no_recoil[1:])),
               "soft traps only hurt through position spread")
    checks.finish()

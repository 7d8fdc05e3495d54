"""Simulation and optimal control of long-range dipolar-exchange iSWAP gates.

Two tweezer-trapped atoms, coupled through a resonant Rydberg exchange
interaction, are driven by a pair of phase-modulated lasers at fixed
amplitude.  The package assembles the driven two-atom Hamiltonian with the
relevant noise channels (van der Waals shifts, Rydberg decay, motional
coupling, photon recoil), propagates it, scores pulses with pure- and
mixed-state fidelity functionals, and synthesizes time-optimal and
vdW-robust phase profiles with a gradient-based quasi-Newton optimizer.
"""

from .atomic import (
    GeometryConfig,
    RydbergPairData,
    dipole_coupling,
    lamb_dicke,
    load_pair_data,
    range_for_ratio,
    recoil_detuning,
    scale_to_n,
    vdw_strengths,
)
from .algebra import MotionalMode, ProductSpace, partial_trace_motional
from .fidelity import (
    bell_fidelity,
    boltzmann_weights,
    optimize_rotation,
    pulse_infidelity,
    su2_rotation,
    thermal_fidelity,
    uhlmann_fidelity,
)
from .grape import (
    OptimizationReport,
    OptimizerOptions,
    cost,
    find_time_optimal,
    gradient,
    minimize_pulse,
    robustify_vdw,
)
from .hamiltonian import GateModel, NoiseConfig, assemble, model_for_ratio, pair_modes
from .propagator import EvolutionResult, evolve, step_propagator
from .pulses import PulseSchedule, RotationAngles, load_pulse, save_pulse

__version__ = "0.1.0"

"""Piecewise-constant phase schedules and their JSON file format.

A pulse is a fixed-amplitude drive (both lasers at the maximum Rabi
frequency) whose common phase takes one constant value per time step, plus
the three final-rotation angles that close the gate.  Durations are stored
dimensionless, in units of 1/omega_max.

Pulse files round-trip bit-exactly: floats are serialized at full double
precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class RotationAngles:
    """Angles of the final global single-qubit rotation R(theta, varphi, lambda)."""

    theta: float = 0.0
    varphi: float = 0.0
    lam: float = 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta, self.varphi, self.lam)


@dataclass(frozen=True)
class PulseSchedule:
    """Phase-modulated constant-amplitude pulse.

    Attributes
    ----------
    duration : float
        Total pulse duration in units of 1/omega_max (dimensionless
        T * omega_max).
    phases : np.ndarray
        One phase value (radians) per time step.
    rotation : RotationAngles
        Final single-qubit rotation applied to both atoms.
    ratio : float
        Drive-to-exchange ratio omega_max / J the pulse was built for.
    omega_max : float
        Maximum Rabi frequency in rad/s (sets the physical time scale).
    meta : dict
        Free-form provenance (species, n, distance, seed, ...).
    """

    duration: float
    phases: np.ndarray
    rotation: RotationAngles = field(default_factory=RotationAngles)
    ratio: float = 1.0
    omega_max: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        phases = np.atleast_1d(np.asarray(self.phases, dtype=float)).copy()
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if phases.size < 1:
            raise ValueError("pulse needs at least one step")
        if self.ratio <= 0 or self.omega_max <= 0:
            raise ValueError("ratio and omega_max must be positive")

    @property
    def steps(self) -> int:
        return int(self.phases.size)

    @property
    def physical_duration(self) -> float:
        """Pulse length in seconds."""
        return self.duration / self.omega_max

    @property
    def dt(self) -> float:
        """Uniform step length in seconds."""
        return self.physical_duration / self.steps

    def with_phases(self, phases, duration: float | None = None) -> "PulseSchedule":
        return replace(self, phases=np.asarray(phases, dtype=float),
                       duration=self.duration if duration is None else duration)

    def with_rotation(self, rotation: RotationAngles) -> "PulseSchedule":
        return replace(self, rotation=rotation)

    def resampled(self, steps: int) -> "PulseSchedule":
        """Same profile on a different step grid (piecewise-linear in step centers)."""
        if steps == self.steps:
            return self
        old_centers = (np.arange(self.steps) + 0.5) / self.steps
        new_centers = (np.arange(steps) + 0.5) / steps
        phases = np.interp(new_centers, old_centers, self.phases)
        return self.with_phases(phases)

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "omega_max_rad_s": self.omega_max,
            "duration_T_omega": self.duration,
            "steps": [float(p) for p in self.phases],
            "rotation": {
                "theta": self.rotation.theta,
                "varphi": self.rotation.varphi,
                "lambda": self.rotation.lam,
            },
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PulseSchedule":
        rot = payload.get("rotation", {})
        return cls(
            duration=float(payload["duration_T_omega"]),
            phases=np.asarray(payload["steps"], dtype=float),
            rotation=RotationAngles(
                theta=float(rot.get("theta", 0.0)),
                varphi=float(rot.get("varphi", 0.0)),
                lam=float(rot.get("lambda", 0.0)),
            ),
            ratio=float(payload["ratio"]),
            omega_max=float(payload["omega_max_rad_s"]),
            meta=dict(payload.get("meta", {})),
        )


def save_pulse(pulse: PulseSchedule, path) -> None:
    Path(path).write_text(json.dumps(pulse.to_dict(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_pulse(path) -> PulseSchedule:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return PulseSchedule.from_dict(payload)


def steps_for_duration(duration: float, steps_per_unit: float = 10.0) -> int:
    """Default step count: ten steps per 1/omega_max of pulse length."""
    return max(1, int(round(duration * steps_per_unit)))


def constant_pulse(duration: float, phase: float = 0.0, *, ratio: float, omega_max: float,
                   steps: int | None = None) -> PulseSchedule:
    """Unmodulated pulse with a single phase value throughout."""
    n = steps if steps is not None else steps_for_duration(duration)
    return PulseSchedule(duration=duration, phases=np.full(n, phase), ratio=ratio,
                         omega_max=omega_max)

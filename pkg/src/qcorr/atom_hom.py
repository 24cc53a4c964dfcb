"""Kinematics of the atomic HOM sequence.

Two atoms leave the source at ``t0`` with vertical velocities ``v`` and
``v'`` (mm/ms) and fall under gravity.  A Bragg pi pulse at ``t1`` reverses
their velocities relative to the centre of mass; a pi/2 pulse at ``t2``
mixes the two momentum modes.  In the frame falling with the centre of mass
the branches are straight lines that cross at ``2 t1 - t0``.

The delay handed to the optics layer is the time one packet needs to cover
the residual separation at ``t2``, ``delta = 2 (t2 - (2 t1 - t0))``.  This
straight-line mapping is a reconstruction, not a calibrated conversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import RngSpec, ValidationError
from .fock_optics import DipScan, FockState, SplitterSpec, hom_dip_scan, splitter_transform

G_MM_PER_MS2 = 9.81e-3
NS_PER_MS = 1e6


@dataclass(frozen=True)
class TrajectorySpec:
    """Times in ms, velocities in mm/ms, gravity in mm/ms^2.

    ``chirped`` records the assumption that the pulses are stationary in the
    falling frame; it is not simulated.
    """

    t0: float
    t1: float
    t2: float
    v: float
    v_prime: float
    g: float = G_MM_PER_MS2
    z0: float = 0.0
    chirped: bool = True

    def __post_init__(self):
        if not (self.t0 < self.t1 < self.t2):
            raise ValidationError("pulse times must satisfy t0 < t1 < t2")
        if self.v == self.v_prime:
            raise ValidationError("the two velocities must differ")
        if not all(math.isfinite(x) for x in (self.t0, self.t1, self.t2, self.v, self.v_prime, self.g, self.z0)):
            raise ValidationError("trajectory parameters must be finite")

    @property
    def com_velocity(self) -> float:
        return 0.5 * (self.v + self.v_prime)

    @property
    def half_speed(self) -> float:
        """``|v - v'| / 2``: branch speed in the falling frame."""
        return 0.5 * abs(self.v - self.v_prime)

    @property
    def crossing_time(self) -> float:
        return 2 * self.t1 - self.t0

    @property
    def detuning(self) -> float:
        """``t2 - t1 - (t1 - t0)`` in ms."""
        return self.t2 - self.crossing_time

    def with_t2(self, t2: float) -> "TrajectorySpec":
        return TrajectorySpec(self.t0, self.t1, t2, self.v, self.v_prime, self.g, self.z0, self.chirped)


def com_position(spec: TrajectorySpec, t) -> np.ndarray:
    s = np.asarray(t, dtype=float) - spec.t0
    return spec.z0 + spec.com_velocity * s - 0.5 * spec.g * s**2


def lab_positions(spec: TrajectorySpec, t) -> np.ndarray:
    """Lab-frame heights ``(..., 2)`` of the branches starting with ``v`` and ``v'``.

    The pi pulse at ``t1`` maps each velocity ``u -> 2 V - u`` (reflection
    about the centre-of-mass velocity ``V``).
    """
    tt = np.asarray(t, dtype=float)
    out = np.empty(tt.shape + (2,))
    vcm = spec.com_velocity
    for k, u in enumerate((spec.v, spec.v_prime)):
        s = tt - spec.t0
        before = spec.z0 + u * s - 0.5 * spec.g * s**2
        s1 = spec.t1 - spec.t0
        z1 = spec.z0 + u * s1 - 0.5 * spec.g * s1**2
        u1 = u - spec.g * s1  # velocity just before t1
        u1r = 2 * (vcm - spec.g * s1) - u1
        dt = tt - spec.t1
        after = z1 + u1r * dt - 0.5 * spec.g * dt**2
        out[..., k] = np.where(tt <= spec.t1, before, after)
    return out


def to_freefall_frame(spec: TrajectorySpec, t, z_lab) -> np.ndarray:
    """Subtract the centre-of-mass parabola from lab heights ``(..., 2)``."""
    return np.asarray(z_lab, dtype=float) - com_position(spec, t)[..., None]


def to_lab_frame(spec: TrajectorySpec, t, z_frame) -> np.ndarray:
    return np.asarray(z_frame, dtype=float) + com_position(spec, t)[..., None]


def freefall_branches(spec: TrajectorySpec, t) -> np.ndarray:
    """Closed form in the falling frame: ``+/- |v - v'|/2 (t - t0)`` until ``t1``, mirrored after."""
    tt = np.asarray(t, dtype=float)
    sign = 1.0 if spec.v > spec.v_prime else -1.0
    s = np.where(tt <= spec.t1, tt - spec.t0, spec.crossing_time - tt)
    z = sign * spec.half_speed * s
    return np.stack([z, -z], axis=-1)


def timing_delay(spec: TrajectorySpec) -> float:
    """Arrival-time mismatch (ns) at the pi/2 pulse for the optics layer."""
    return 2.0 * spec.detuning * NS_PER_MS


def overlap_from_timing(spec: TrajectorySpec, packet_sigma_ns: float) -> tuple[float, float]:
    """``(delay_ns, mode overlap)`` for the pulse timing of ``spec``."""
    from .fock_optics import mode_overlap

    d = timing_delay(spec)
    return d, mode_overlap(d, packet_sigma_ns)


# --- pulses ---------------------------------------------------------------------------------

PI = "pi"
PI_OVER_2 = "pi_over_2"


@dataclass(frozen=True)
class PulseSpec:
    area: str
    modes: tuple

    def __post_init__(self):
        if self.area not in (PI, PI_OVER_2):
            raise ValidationError("pulse area must be 'pi' or 'pi_over_2'")
        if len(self.modes) != 2 or self.modes[0] == self.modes[1]:
            raise ValidationError("a pulse couples exactly two distinct modes")
        object.__setattr__(self, "modes", tuple(self.modes))


# a pi pulse is a splitter with zero transmission: p+ -> p'+, p'+ -> -p+
_MIRROR = SplitterSpec(0.0)


def apply_pulse(state: FockState, pulse: PulseSpec) -> FockState:
    """Bragg pulse on two momentum modes: pi is a mirror, pi/2 a balanced splitter."""
    for m in pulse.modes:
        state.index(m)
    spec = _MIRROR if pulse.area == PI else SplitterSpec.balanced()
    return splitter_transform(state, spec, pulse.modes)


# --- t2 scan --------------------------------------------------------------------------------


@dataclass(frozen=True)
class TimingScan:
    t2: np.ndarray
    dip: DipScan

    def to_csv(self) -> str:
        rows = ["t2_ms,delay_ns,p_joint,stderr"]
        for t2, d, p, s in zip(self.t2, self.dip.delays, self.dip.p_joint, self.dip.stderr):
            rows.append(f"{float(t2)!r},{float(d)!r},{float(p)!r},{float(s)!r}")
        return "\n".join(rows) + "\n"


def t2_scan(spec: TrajectorySpec, t2_values: Sequence[float], packet_sigma_ns: float, source, n_shots: int, rng: RngSpec) -> TimingScan:
    """Scan the pi/2 pulse time; each t2 maps to a delay fed to ``hom_dip_scan``."""
    t2 = np.asarray(t2_values, dtype=float)
    delays = [timing_delay(spec.with_t2(float(x))) for x in t2]
    return TimingScan(t2, hom_dip_scan(delays, source, n_shots, rng, packet_sigma=packet_sigma_ns))

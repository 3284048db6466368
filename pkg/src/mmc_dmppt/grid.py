"""Grid model and the outer loop that turns stored SM energy into AC current references.

Transform convention: amplitude-invariant Park with the angle aligned to the
phase-a grid voltage, so ``i_a = i_d cos(theta) - i_q sin(theta)`` and a
positive ``i_d`` exports active power at unity power factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError

PHASE_OFFSETS = (0.0, -2.0 * math.pi / 3.0, 2.0 * math.pi / 3.0)


@dataclass(frozen=True)
class GridModel:
    amplitude: float = 200.0  # V peak, line-to-neutral
    frequency: float = 60.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ConfigurationError("grid amplitude must be positive", field="grid.amplitude")
        if not self.frequency > 0:
            raise ConfigurationError("grid frequency must be positive", field="grid.frequency")

    def angle(self, t):
        return 2.0 * math.pi * self.frequency * t


def grid_voltage(grid, phase, t):
    """Instantaneous voltage of phase index ``phase`` (0, 1, 2) at time ``t``."""
    return grid.amplitude * math.cos(grid.angle(t) + PHASE_OFFSETS[phase])


@dataclass(frozen=True)
class PiState:
    kp: float = 5.0
    ki: float = 100.0
    limit: float = 30.0
    integrator: float = 0.0

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0:
            raise ConfigurationError("PI gains must be non-negative", field="control.kp")
        if not self.limit > 0:
            raise ConfigurationError("PI output limit must be positive", field="control.limit")


def pi_update(state, error, dt):
    """One PI step; returns ``(new_state, correction)``.

    The integrator is clamped so that ``ki * integrator`` alone cannot exceed
    the output limit.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    integ = state.integrator + error * dt
    if state.ki > 0:
        bound = state.limit / state.ki
        integ = min(max(integ, -bound), bound)
    out = state.kp * error + state.ki * integ
    out = min(max(out, -state.limit), state.limit)
    return replace(state, integrator=integ), out


def average_sm_voltage(legs):
    return float(np.mean(np.concatenate([leg.v_c for leg in legs])))


def dq_to_abc(i_d, i_q, theta):
    return tuple(i_d * math.cos(theta + off) - i_q * math.sin(theta + off) for off in PHASE_OFFSETS)


@dataclass(frozen=True)
class CurrentReference:
    i_d: float
    i_q: float
    i_abc: tuple


@dataclass
class CurrentController:
    """Feedforward plus PI correction on the average SM voltage."""

    pi: PiState
    i_d_ff: float = 16.0
    i_q_ref: float = 0.0
    correction: float = 0.0

    def update(self, avg_v, v_nom, dt):
        # surplus stored energy raises export
        self.pi, self.correction = pi_update(self.pi, avg_v - v_nom, dt)
        return self.correction

    def dq(self):
        return self.i_d_ff + self.correction, self.i_q_ref


def make_references(ctrl, grid, avg_v, v_nom, t, dt=None):
    """Per-phase current references at time ``t``.

    If ``dt`` is given the PI loop is advanced first with the error
    ``avg_v - v_nom``; otherwise the controller's last correction is reused.
    """
    if dt is not None:
        ctrl.update(avg_v, v_nom, dt)
    i_d, i_q = ctrl.dq()
    return CurrentReference(i_d, i_q, dq_to_abc(i_d, i_q, grid.angle(t)))

"""Perturb-and-observe tracker and the averaged boost converter feeding an SM."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError
from .pv import module_power, pv_power

V_MIN_THRESHOLD = 10.0  # V, SM voltage below which injection is suspended


@dataclass(frozen=True)
class MpptState:
    v_ref: float
    v_min: float
    v_max: float
    step: float = 0.5
    update_period: float = 1e-3
    last_power: float = 0.0
    last_direction: int = 1
    last_update_time: float = 0.0

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidInputError("P&O step must be positive")
        if not self.update_period > 0:
            raise InvalidInputError("P&O update period must be positive")
        if not self.v_min <= self.v_ref <= self.v_max:
            raise InvalidInputError(f"v_ref {self.v_ref} outside [{self.v_min}, {self.v_max}]")


def initial_mppt_state(params, v_ref=None, step=0.5, update_period=1e-3):
    """Tracker state clamped to [0.1 Voc, Voc]; ``v_ref`` defaults to 0.8 Voc."""
    v_min, v_max = 0.1 * params.v_oc, params.v_oc
    if v_ref is None:
        v_ref = 0.8 * params.v_oc
    return MpptState(v_ref=min(max(v_ref, v_min), v_max), v_min=v_min, v_max=v_max,
                     step=step, update_period=update_period)


def po_step(state, p_now, t):
    """Advance the tracker if an update period has elapsed since the last one."""
    if not math.isfinite(p_now):
        raise InvalidInputError("measured power must be finite")
    if t - state.last_update_time < state.update_period * (1.0 - 1e-9):
        return state
    direction = state.last_direction if p_now >= state.last_power else -state.last_direction
    v_ref = min(max(state.v_ref + direction * state.step, state.v_min), state.v_max)
    return replace(state, v_ref=v_ref, last_power=p_now, last_direction=direction,
                   last_update_time=t)


@dataclass(frozen=True)
class SmInjection:
    i_inj: float
    p_pv: float
    suspended: bool = False


def converter_injection(params, env, state, v_c):
    """Current pushed into the SM capacitor by a lossless converter.

    The PV side is held at ``state.v_ref``; the extracted power leaves at the
    capacitor voltage. Below ``V_MIN_THRESHOLD`` the converter stops.
    """
    if v_c <= V_MIN_THRESHOLD:
        return SmInjection(0.0, 0.0, suspended=True)
    p = pv_power(params, env, state.v_ref)
    return SmInjection(p / v_c, p)


def injections_vectorized(params, irradiance, temperature, v_ref, v_c):
    """Array form of :func:`converter_injection` for all SMs at once.

    Returns ``(i_inj, p_pv, suspended)``.
    """
    v_c = np.asarray(v_c, dtype=float)
    suspended = v_c <= V_MIN_THRESHOLD
    p = module_power(params, irradiance, temperature, v_ref)
    p = np.where(suspended, 0.0, p)
    i_inj = np.where(suspended, 0.0, p / np.where(suspended, 1.0, v_c))
    return i_inj, p, suspended

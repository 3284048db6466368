"""Per-leg discrete-time MMC model, used both as predictor and as plant.

Indexing: a leg holds ``2n`` submodules, ``0..n-1`` in the upper arm and
``n..2n-1`` in the lower arm. Arm currents follow ``i_up = i_z + i/2`` and
``i_low = i_z - i/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalDivergenceError

PHASES = ("a", "b", "c")


@dataclass(frozen=True)
class MmcParams:
    n: int = 6
    v_dc: float = 600.0
    t_s: float = 25e-6
    c_sm: float = 5000e-6
    r: float = 0.003
    l_f: float = 5e-3
    l_arm: float = 5e-3
    w: float = 1.0
    w_z: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ConfigurationError(f"n must be a positive integer, got {self.n!r}", field="n")
        for name in ("v_dc", "t_s", "c_sm", "r", "l_f", "l_arm", "w", "w_z"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value!r}", field=name)
        if self.t_s >= 0.01 / 60.0:
            raise ConfigurationError("t_s must be much shorter than the grid period", field="t_s")

    @property
    def l_prime(self):
        return self.l_f + self.l_arm / 2.0

    @property
    def k_prime(self):
        return self.r + self.l_prime / self.t_s

    @property
    def v_nominal(self):
        """Nominal SM capacitor voltage V_DC / n."""
        return self.v_dc / self.n


@dataclass
class LegState:
    v_c: np.ndarray
    i_ac: float = 0.0
    i_z: float = 0.0
    u_applied: np.ndarray = field(default=None)

    def __post_init__(self):
        self.v_c = np.asarray(self.v_c, dtype=float)
        if self.u_applied is None:
            self.u_applied = np.zeros(len(self.v_c), dtype=np.int8)
        else:
            self.u_applied = np.asarray(self.u_applied, dtype=np.int8)

    @property
    def n(self):
        return len(self.v_c) // 2

    @property
    def i_up(self):
        return self.i_z + self.i_ac / 2.0

    @property
    def i_low(self):
        return self.i_z - self.i_ac / 2.0

    def copy(self):
        return LegState(self.v_c.copy(), self.i_ac, self.i_z, self.u_applied.copy())


def initial_leg_state(params):
    return LegState(np.full(2 * params.n, params.v_nominal))


def sm_labels(n):
    """Module ids in leg order for all three phases: ``a_u1 .. a_un, a_l1 .. c_ln``."""
    return [f"{ph}_{arm}{k}" for ph in PHASES for arm in ("u", "l") for k in range(1, n + 1)]


def arm_voltages(state, u):
    """Inserted voltage of the upper and lower arm for insertion vector ``u``."""
    u = np.asarray(u)
    n = state.n
    if u.shape != state.v_c.shape:
        raise ValueError(f"insertion vector must have length {2 * n}")
    prod = state.v_c * u
    return float(prod[:n].sum()), float(prod[n:].sum())


def predict_ac_current(params, state, v_up, v_low, v_s):
    return ((v_low - v_up) / 2.0 - v_s + params.l_prime / params.t_s * state.i_ac) / params.k_prime


def predict_circulating_current(params, state, v_up, v_low):
    return params.t_s / (2.0 * params.l_arm) * (params.v_dc - v_low - v_up) + state.i_z


def step_leg(params, state, u, i_inj, v_s):
    """Advance one leg by one sampling period under insertion vector ``u``.

    ``i_inj`` holds the converter current into each of the ``2n`` capacitors;
    it charges the capacitor whether or not the SM is inserted.
    """
    u = np.asarray(u, dtype=np.int8)
    n = state.n
    if u.shape != (2 * n,) or len(i_inj) != 2 * n:
        raise ValueError(f"insertion vector and injections must have length {2 * n}")
    v_up, v_low = arm_voltages(state, u)
    i_next = predict_ac_current(params, state, v_up, v_low, v_s)
    iz_next = predict_circulating_current(params, state, v_up, v_low)
    arm_i = np.empty(2 * n)
    arm_i[:n] = state.i_up
    arm_i[n:] = state.i_low
    v_next = state.v_c + params.t_s / params.c_sm * (arm_i * u + np.asarray(i_inj, dtype=float))
    if not math.isfinite(i_next):
        raise NumericalDivergenceError("i_ac")
    if not math.isfinite(iz_next):
        raise NumericalDivergenceError("i_z")
    if not np.all(np.isfinite(v_next)):
        raise NumericalDivergenceError("v_c")
    return LegState(v_next, i_next, iz_next, u)

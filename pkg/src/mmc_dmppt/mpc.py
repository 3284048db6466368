"""Sorting-and-selection model predictive switching for one phase leg.

Each sampling period the optimizer

1. computes the arm voltages that would give exact AC tracking and zero
   circulating current one step ahead,
2. sorts each arm so that inserting the first ``k`` SMs moves the arm toward
   balance (lowest voltages first while the arm current charges them),
3. searches the insertion counts ``(k_up, k_low)``. Only the four
   cumulative-sum pairs bracketing the ideal voltages are evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalDivergenceError
from .mmc import arm_voltages


@dataclass(frozen=True)
class IdealArmVoltages:
    v_up_star: float
    v_low_star: float


@dataclass(frozen=True)
class SortedArm:
    order: np.ndarray  # arm-local indices, insertion priority first
    voltages: np.ndarray  # voltages in that order
    cumsum: np.ndarray  # length n+1, cumsum[0] == 0


@dataclass(frozen=True)
class SwitchDecision:
    u: np.ndarray
    k_up: int
    k_low: int
    v_up: float
    v_low: float
    f: float
    fallback: bool = False


def ideal_arm_voltages(params, state, i_ref, v_s):
    common = params.v_dc / 2.0 + params.l_arm / params.t_s * state.i_z
    diff = params.k_prime * i_ref + v_s - params.l_prime / params.t_s * state.i_ac
    return IdealArmVoltages(common - diff, common + diff)


def sort_arm(v_c_arm, arm_current):
    """Insertion priority for one arm.

    Ascending voltage when ``arm_current >= 0`` (inserted SMs charge),
    descending otherwise; equal voltages keep their original index order.
    """
    v = np.asarray(v_c_arm, dtype=float)
    key = v if arm_current >= 0 else -v
    order = np.argsort(key, kind="stable")
    ordered = v[order]
    cumsum = np.concatenate(([0.0], np.cumsum(ordered)))
    return SortedArm(order, ordered, cumsum)


def objective_f(params, dv_up, dv_low):
    """Weighted one-step AC-tracking and circulating-current deviation."""
    return (params.w / (2.0 * params.k_prime) * abs(dv_low - dv_up)
            + params.w_z * params.t_s / (2.0 * params.l_arm) * abs(dv_low + dv_up))


def _bracket(cumsum, target):
    """Candidate counts bracketing ``target`` on the cumulative-sum grid."""
    n = len(cumsum) - 1
    if target < cumsum[0]:
        return (0,)
    if target >= cumsum[n]:
        return (n,)
    i = int(np.searchsorted(cumsum, target, side="right")) - 1
    return (i, i + 1)


def select_switching(params, up, low, ideal):
    """Best insertion counts among the (at most) four bracketing pairs.

    Ties resolve to smaller ``f``, then smaller ``k_up``, then smaller ``k_low``.
    """
    n = len(up.order)
    if n == 0 or len(low.order) != n:
        raise ConfigurationError("arms must hold the same, non-zero number of SMs", field="n")
    best = None
    for ku in _bracket(up.cumsum, ideal.v_up_star):
        for kl in _bracket(low.cumsum, ideal.v_low_star):
            f = objective_f(params, ideal.v_up_star - up.cumsum[ku], ideal.v_low_star - low.cumsum[kl])
            cand = (f, ku, kl)
            if best is None or cand < best:
                best = cand
    f, ku, kl = best
    u = np.zeros(2 * n, dtype=np.int8)
    u[up.order[:ku]] = 1
    u[n + low.order[:kl]] = 1
    return SwitchDecision(u, ku, kl, float(up.cumsum[ku]), float(low.cumsum[kl]), float(f))


def exhaustive_selection(params, up, low, ideal):
    """Reference search over all ``(n+1)^2`` count pairs, same tie-break."""
    best = None
    for ku in range(len(up.cumsum)):
        for kl in range(len(low.cumsum)):
            f = objective_f(params, ideal.v_up_star - up.cumsum[ku], ideal.v_low_star - low.cumsum[kl])
            if best is None or (f, ku, kl) < best:
                best = (f, ku, kl)
    return best


def _non_finite_input(state, i_ref, v_s):
    for name, value in (("i_ac", state.i_ac), ("i_z", state.i_z), ("i_ref", i_ref), ("v_s", v_s)):
        if not math.isfinite(value):
            return name
    return "v_c"


def mpc_tick(params, state, i_ref, v_s, deadline_exceeded=False):
    """One switching decision for a leg.

    With ``deadline_exceeded`` the previously applied vector is returned
    unchanged, as a controller that ran out of time would do.
    """
    ideal = ideal_arm_voltages(params, state, i_ref, v_s)
    if not (math.isfinite(ideal.v_up_star) and math.isfinite(ideal.v_low_star)):
        raise NumericalDivergenceError(_non_finite_input(state, i_ref, v_s))
    n = state.n
    if deadline_exceeded:
        u = state.u_applied.copy()
        v_up, v_low = arm_voltages(state, u)
        f = objective_f(params, ideal.v_up_star - v_up, ideal.v_low_star - v_low)
        return SwitchDecision(u, int(u[:n].sum()), int(u[n:].sum()), v_up, v_low, float(f),
                              fallback=True)
    up = sort_arm(state.v_c[:n], state.i_up)
    low = sort_arm(state.v_c[n:], state.i_low)
    return select_switching(params, up, low, ideal)

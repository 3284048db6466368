"""Randomized cross-check of the 4-point selection against exhaustive search."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mmc import LegState, MmcParams
from .mpc import IdealArmVoltages, exhaustive_selection, select_switching, sort_arm


@dataclass
class OracleReport:
    trials: dict = field(default_factory=dict)  # n -> count
    mismatches: dict = field(default_factory=dict)  # n -> count
    worst_deviation: float = 0.0
    first_mismatch: dict | None = None

    @property
    def total_mismatches(self):
        return sum(self.mismatches.values())

    @property
    def ok(self):
        return self.total_mismatches == 0

    def lines(self):
        out = []
        for n in sorted(self.trials):
            out.append(f"n={n}: {self.trials[n]} trials, {self.mismatches[n]} mismatches")
        out.append(f"worst deviation: {self.worst_deviation:.3g}")
        out.append("PASS" if self.ok else "FAIL")
        return out


def random_leg(rng, n, spread=0.2, params=None):
    """A leg state with SM voltages uniform in nominal * [1-spread, 1+spread]
    and ideal arm voltages spanning the cumulative-sum range plus 5% slack."""
    params = params or MmcParams(n=n)
    v_nom = params.v_nominal
    v_c = v_nom * (1.0 + spread * rng.uniform(-1.0, 1.0, 2 * n))
    state = LegState(v_c, i_ac=rng.uniform(-40.0, 40.0), i_z=rng.uniform(-2.0, 2.0))
    span_up, span_low = v_c[:n].sum(), v_c[n:].sum()
    ideal = IdealArmVoltages(rng.uniform(-0.05, 1.05) * span_up, rng.uniform(-0.05, 1.05) * span_low)
    return params, state, ideal


def check_state(params, state, ideal):
    """Return ``(f_four_point, f_exhaustive, decision)`` for one state."""
    n = state.n
    up = sort_arm(state.v_c[:n], state.i_up)
    low = sort_arm(state.v_c[n:], state.i_low)
    dec = select_switching(params, up, low, ideal)
    f_ex, _, _ = exhaustive_selection(params, up, low, ideal)
    return dec.f, f_ex, dec


def oracle_check(n_trials=10_000, seed=0, ns=(2, 3, 4, 5, 6), spread=0.2):
    """Run ``n_trials`` random states for each ``n`` in ``ns``.

    A mismatch is any state where the selected objective exceeds the
    exhaustive minimum; the first one is kept for diagnosis.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = np.random.default_rng(seed)
    report = OracleReport()
    for n in ns:
        params = MmcParams(n=n)
        bad = 0
        for _ in range(n_trials):
            _, state, ideal = random_leg(rng, n, spread, params)
            f4, fex, dec = check_state(params, state, ideal)
            if f4 != fex:
                bad += 1
                dev = f4 - fex
                if dev > report.worst_deviation:
                    report.worst_deviation = dev
                if report.first_mismatch is None:
                    report.first_mismatch = {"n": n, "v_c": state.v_c.tolist(), "i_ac": state.i_ac,
                                             "i_z": state.i_z, "v_up_star": ideal.v_up_star,
                                             "v_low_star": ideal.v_low_star, "f_selected": f4,
                                             "f_exhaustive": fex}
        report.trials[n] = n_trials
        report.mismatches[n] = bad
    return report

"""Acceptance suite: the ten headline criteria at their stated tolerances.

Each test carries ``@pytest.mark.criterion(k)``; ``conftest.py`` prints one
PASS/FAIL line per criterion at the end of the session. The three presets and
their 1% deadline-overrun variants are simulated once per session.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from mmc_dmppt.config import DESK_FAILURE_TIME, DeadlinePolicy, PRESET_NAMES, preset
from mmc_dmppt.engine import run_scenario, summarize
from mmc_dmppt.grid import PiState, pi_update, dq_to_abc
from mmc_dmppt.mmc import LegState, MmcParams, arm_voltages, predict_ac_current, \
    predict_circulating_current, step_leg
from mmc_dmppt.mpc import IdealArmVoltages, ideal_arm_voltages, objective_f, select_switching, \
    sort_arm
from mmc_dmppt.mppt import converter_injection, initial_mppt_state
from mmc_dmppt.oracle import oracle_check
from mmc_dmppt.pv import EnvironmentSample, PvModuleParams, grid_scan_mpp

pytestmark = pytest.mark.slow

STARTUP = 0.05
RUNTIME_LIMIT = 60.0
SHADED_SLOTS = (4, 5)  # arm-local indices of SMs 5 and 6
FAILED_SLOT = 0


class Audit:
    """Hook that checks every switching decision as it is made.

    On fallback ticks the applied vector must equal the previous one; on all
    other ticks the selected SMs of each arm must be the lowest-voltage ones
    when the arm current is non-negative and the highest otherwise.
    """

    def __init__(self):
        self.fallbacks = 0
        self.fallback_mismatches = 0
        self.checked = 0
        self.order_violations = 0

    def __call__(self, event, k, payload):
        if event != "mpc":
            return
        state, dec = payload["state"], payload["decision"]
        if dec.fallback:
            self.fallbacks += 1
            if not np.array_equal(dec.u, state.u_applied):
                self.fallback_mismatches += 1
            return
        self.checked += 1
        n = state.n
        for sl, current in ((slice(0, n), state.i_up), (slice(n, 2 * n), state.i_low)):
            v, u = state.v_c[sl], dec.u[sl]
            on, off = v[u == 1], v[u == 0]
            if on.size == 0 or off.size == 0:
                continue
            ok = on.max() <= off.min() if current >= 0 else on.min() >= off.max()
            if not ok:
                self.order_violations += 1


def _simulate(cfg):
    audit = Audit()
    t0 = time.perf_counter()
    result = run_scenario(cfg, hook=audit)
    return {"result": result, "audit": audit, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def runs():
    out = {}
    for name in PRESET_NAMES:
        out[name] = _simulate(preset(name))
    for name in PRESET_NAMES:
        cfg = preset(name)
        cfg = replace(cfg, name=f"{name}_deadline",
                      deadline=DeadlinePolicy(mode="simulated", exceed_probability=0.01))
        out[f"{name}_deadline"] = _simulate(cfg)
    return out


@pytest.fixture(scope="session")
def mpp_oracle():
    """Grid-scan MPP ``(v, p)`` at each distinct irradiance, memoized."""
    params = PvModuleParams()
    cache = {}

    def lookup(g, temperature=25.0):
        g = np.asarray(g, dtype=float)
        flat = g.ravel()
        v_out = np.zeros_like(flat)
        p_out = np.zeros_like(flat)
        for j, x in enumerate(flat):
            if x <= 0:
                continue
            key = (float(x), temperature)
            if key not in cache:
                cache[key] = grid_scan_mpp(params, EnvironmentSample(float(x), temperature))
            v_out[j], p_out[j] = cache[key]
        return v_out.reshape(g.shape), p_out.reshape(g.shape)

    return lookup


def _report(label, **values):
    print(label + ": " + ", ".join(f"{k}={v}" for k, v in values.items()))


def _band_ok(summary):
    return 95.0 <= summary.avg_v_min_pct and summary.avg_v_max_pct <= 105.0


def _tracking_ok(summary):
    return bool(np.all(summary.tracking_rms_pct < 2.0))


def _circulating_ok(summary):
    amp = summary.ref_amplitude
    return bool(np.all(summary.mean_abs_i_z < 0.02 * amp) and np.all(summary.max_abs_i_z < 0.10 * amp))


def _unit_slots(n, slots):
    """Flat leg indices (upper and lower arm) for arm-local ``slots``."""
    return [s for k in slots for s in (k, n + k)]


# 1 -------------------------------------------------------------------------

@pytest.mark.criterion(1)
@pytest.mark.parametrize("name", PRESET_NAMES)
def test_average_voltage_band(runs, name):
    run = runs[name]
    s = run["result"].summary
    _report(f"[1] {name}", avg_min=f"{s.avg_v_min_pct:.2f}%", avg_max=f"{s.avg_v_max_pct:.2f}%",
            runtime=f"{run['seconds']:.1f}s")
    assert _band_ok(s)
    assert run["seconds"] < RUNTIME_LIMIT


# 2 -------------------------------------------------------------------------

@pytest.mark.criterion(2)
def test_mpp_capture_normal(runs, mpp_oracle):
    res = runs["normal"]["result"]
    tr = res.trace
    win = tr.t >= res.config.duration - 0.1
    p = tr.p_pv[win]
    v_mpp, p_mpp = mpp_oracle(tr.g[win])
    ratio = p.mean(axis=0) / p_mpp.mean(axis=0)
    # P&O ripple band: the shortfall at any instant stays within 2 * step * I_mpp
    band = 2.0 * res.config.mppt.step * p_mpp / v_mpp
    excess = (p_mpp - p) - band
    shortfall = (p_mpp - p).max()
    _report("[2] normal", min_ratio=f"{ratio.min():.5f}", worst_shortfall=f"{shortfall:.3f}W",
            band=f"{band.min():.3f}W")
    assert ratio.min() >= 0.99
    assert excess.max() <= 0.0


@pytest.mark.criterion(2)
def test_all_modules_reach_mpp_after_settling(runs, mpp_oracle):
    res = runs["normal"]["result"]
    tr = res.trace
    win = tr.t >= 0.2
    ratio = tr.p_pv[win] / mpp_oracle(tr.g[win])[1]
    _report("[2] normal per-sample", min_ratio=f"{ratio.min():.5f}")
    assert ratio.min() >= 0.99


# 3 -------------------------------------------------------------------------

@pytest.mark.criterion(3)
def test_shaded_modules_at_own_mpp(runs, mpp_oracle):
    res = runs["partial_shading"]["result"]
    tr = res.trace
    n = tr.n
    win = tr.t >= STARTUP
    idx = _unit_slots(n, SHADED_SLOTS)
    p = tr.p_pv[win][:, :, idx]
    p_mpp = mpp_oracle(tr.g[win][:, :, idx])[1]
    rel = np.abs(p.mean(axis=0) / p_mpp.mean(axis=0) - 1.0)
    _report("[3] shaded", worst_rel_dev=f"{rel.max():.4f}", peak_power=f"{p.max():.1f}W")
    assert np.allclose(tr.g[win][:, :, idx], 0.2 * tr.g[win][:, :, [0]], rtol=1e-12)
    assert rel.max() < 0.05
    assert p.max() < 110.0


@pytest.mark.criterion(3)
def test_unshaded_modules_unaffected(runs):
    shaded = runs["partial_shading"]["result"].trace
    normal = runs["normal"]["result"].trace
    n = shaded.n
    idx = [k for k in range(2 * n) if k not in _unit_slots(n, SHADED_SLOTS)]
    win = shaded.t >= STARTUP
    e_sh = shaded.p_pv[win][:, :, idx].sum(axis=0)
    e_no = normal.p_pv[win][:, :, idx].sum(axis=0)
    rel = np.abs(e_sh / e_no - 1.0)
    _report("[3] unshaded vs normal", worst_rel_change=f"{rel.max():.2e}")
    assert rel.max() < 0.01


# 4 -------------------------------------------------------------------------

@pytest.mark.criterion(4)
def test_failed_module_injects_nothing(runs):
    tr = runs["failure"]["result"].trace
    n = tr.n
    after = tr.t >= DESK_FAILURE_TIME
    idx = _unit_slots(n, (FAILED_SLOT,))
    assert after.any()
    assert np.all(tr.p_pv[after][:, :, idx] == 0.0)
    assert np.all(tr.g[after][:, :, idx] == 0.0)
    before = (tr.t >= STARTUP) & ~after
    assert np.all(tr.p_pv[before][:, :, idx] > 0.0)


@pytest.mark.criterion(4)
def test_other_modules_follow_their_trend(runs):
    # the partial-shading run is the same system without the failure event,
    # so it is the trend each healthy SM would have followed
    fail = runs["failure"]["result"].trace
    ref = runs["partial_shading"]["result"].trace
    n = fail.n
    idx = [k for k in range(2 * n) if k not in _unit_slots(n, (FAILED_SLOT,))]
    after = fail.t >= DESK_FAILURE_TIME
    assert np.array_equal(fail.t, ref.t)
    mean_fail = fail.p_pv[after][:, :, idx].mean(axis=0)
    mean_ref = ref.p_pv[after][:, :, idx].mean(axis=0)
    rel = np.abs(mean_fail / mean_ref - 1.0)
    _report("[4] healthy SMs after event", worst_rel_dev=f"{rel.max():.2e}")
    assert rel.max() < 0.01


@pytest.mark.criterion(4)
def test_stable_after_failure(runs):
    res = runs["failure"]["result"]
    post = summarize(res.trace, res.config.mmc.v_nominal, startup=DESK_FAILURE_TIME)
    _report("[4] post-event", avg=f"{post.avg_v_min_pct:.2f}..{post.avg_v_max_pct:.2f}%",
            rms_pct=np.round(post.tracking_rms_pct, 3).tolist(),
            iz_max=np.round(post.max_abs_i_z, 3).tolist())
    assert _band_ok(post)
    assert _tracking_ok(post)
    assert _circulating_ok(post)


# 5 -------------------------------------------------------------------------

@pytest.mark.criterion(5)
@pytest.mark.parametrize("name", PRESET_NAMES)
def test_ac_tracking(runs, name):
    s = runs[name]["result"].summary
    _report(f"[5] {name}", rms_pct=np.round(s.tracking_rms_pct, 3).tolist())
    assert _tracking_ok(s)


# 6 -------------------------------------------------------------------------

@pytest.mark.criterion(6)
@pytest.mark.parametrize("name", PRESET_NAMES)
def test_circulating_current(runs, name):
    s = runs[name]["result"].summary
    _report(f"[6] {name}", mean_iz=np.round(s.mean_abs_i_z, 3).tolist(),
            max_iz=np.round(s.max_abs_i_z, 3).tolist(), amplitude=np.round(s.ref_amplitude, 2).tolist())
    assert _circulating_ok(s)


# 7 -------------------------------------------------------------------------

@pytest.mark.criterion(7)
def test_selection_oracle():
    t0 = time.perf_counter()
    report = oracle_check(10_000, seed=0)
    seconds = time.perf_counter() - t0
    for line in report.lines():
        print("[7] " + line)
    assert set(report.trials) == {2, 3, 4, 5, 6}
    assert all(v == 10_000 for v in report.trials.values())
    assert report.total_mismatches == 0
    assert report.worst_deviation == 0.0
    assert seconds < 30.0


# 8 -------------------------------------------------------------------------

@pytest.mark.criterion(8)
@pytest.mark.parametrize("name", PRESET_NAMES)
def test_arm_spread(runs, name):
    res = runs[name]["result"]
    s = res.summary
    _report(f"[8] {name}", max_spread=f"{s.max_arm_spread:.3f}V")
    assert s.max_arm_spread < 0.05 * res.config.mmc.v_nominal


@pytest.mark.criterion(8)
@pytest.mark.parametrize("name", PRESET_NAMES)
def test_balancing_order_every_tick(runs, name):
    audit = runs[name]["audit"]
    res = runs[name]["result"]
    _report(f"[8] {name}", checked=audit.checked, violations=audit.order_violations)
    assert audit.checked == 3 * res.ticks
    assert audit.order_violations == 0


# 9 -------------------------------------------------------------------------

def _rel(a, b):
    return a == b or abs(a - b) <= 1e-12 * max(abs(a), abs(b))


@pytest.mark.criterion(9)
def test_hand_arithmetic_anchors():
    p = MmcParams()
    pv = PvModuleParams()
    n = p.n
    flat = LegState(np.full(2 * n, 100.0))
    assert _rel(p.k_prime, 300.003)

    # arm voltages
    u = np.array([1, 1, 1, 0, 0, 0] * 2)
    assert arm_voltages(flat, u) == (300.0, 300.0)
    v = np.array([100.0, 101.0, 99.0, 100.0, 100.0, 100.0] + [100.0] * 6)
    assert _rel(arm_voltages(LegState(v), [1, 1, 0, 0, 0, 0] + [0] * 6)[0], 201.0)

    # AC current prediction
    assert _rel(predict_ac_current(p, flat, 200.0, 400.0, 0.0), 100.0 / 300.003)
    assert _rel(predict_ac_current(p, LegState(flat.v_c, i_ac=16.0), 300.0, 300.0, 0.0),
                300.0 * 16.0 / 300.003)

    # circulating current prediction
    assert _rel(predict_circulating_current(p, flat, 295.0, 295.0), 0.025)
    assert _rel(predict_circulating_current(p, LegState(flat.v_c, i_z=0.1), 295.0, 295.0), 0.125)

    # capacitor update and injection
    st = LegState(flat.v_c, i_ac=20.0, i_z=0.0)  # i_up = 10 A
    u1 = np.zeros(2 * n, dtype=int)
    u1[0] = 1
    nxt = step_leg(p, st, u1, np.zeros(2 * n), 0.0)
    assert _rel(nxt.v_c[0] - 100.0, 25e-6 * 10.0 / 5e-3)
    inj = np.zeros(2 * n)
    inj[1] = 3.05226
    nxt = step_leg(p, flat, np.zeros(2 * n, dtype=int), inj, 0.0)
    assert _rel(nxt.v_c[1] - 100.0, 25e-6 * 3.05226 / 5e-3)

    # injection current
    env = EnvironmentSample(1000.0)
    v_mpp, p_mpp = grid_scan_mpp(pv, env)
    st_mppt = initial_mppt_state(pv, v_ref=v_mpp)
    injection = converter_injection(pv, env, st_mppt, 100.0)
    assert _rel(injection.i_inj, injection.p_pv / 100.0)
    assert abs(p_mpp - 305.226) < 0.01

    # ideal arm voltages
    ideal = ideal_arm_voltages(p, LegState(flat.v_c, i_ac=16.0), 16.0, 0.0)
    assert _rel(ideal.v_up_star, 299.952) and _rel(ideal.v_low_star, 300.048)
    ideal = ideal_arm_voltages(p, LegState(flat.v_c, i_z=0.5), 0.0, 0.0)
    assert _rel(ideal.v_up_star, 400.0) and _rel(ideal.v_low_star, 400.0)

    # sorting and prefix sums
    arm = sort_arm([102.0, 98.0, 100.0], 1.0)
    assert arm.voltages.tolist() == [98.0, 100.0, 102.0]
    assert arm.cumsum.tolist() == [0.0, 98.0, 198.0, 300.0]
    assert sort_arm([102.0, 98.0, 100.0], -1.0).voltages.tolist() == [102.0, 100.0, 98.0]

    # objective
    assert _rel(objective_f(p, -10.0, 10.0), 20.0 / 600.006)
    assert _rel(objective_f(p, 10.0, 10.0), 0.05)

    # selection
    up = sort_arm(flat.v_c[:n], 0.0)
    low = sort_arm(flat.v_c[n:], 0.0)
    dec = select_switching(p, up, low, IdealArmVoltages(299.952, 300.048))
    assert (dec.k_up, dec.k_low, dec.v_up, dec.v_low) == (3, 3, 300.0, 300.0)
    dec = select_switching(p, up, low, IdealArmVoltages(0.0, 600.0))
    assert (dec.k_up, dec.k_low, dec.f) == (0, 6, 0.0)

    # PI and transform
    _, corr = pi_update(PiState(kp=2.0, ki=0.0), 1.5, 1e-4)
    assert corr == 3.0
    ia, ib, ic = dq_to_abc(16.0, 0.0, 0.0)
    assert ia == 16.0 and _rel(ib, -8.0) and _rel(ic, -8.0)


# 10 ------------------------------------------------------------------------

@pytest.mark.criterion(10)
@pytest.mark.parametrize("name", PRESET_NAMES)
def test_fallback_keeps_control(runs, name):
    run = runs[f"{name}_deadline"]
    res, audit = run["result"], run["audit"]
    s = res.summary
    expected = 0.01 * 3 * res.ticks
    _report(f"[10] {name}", fallbacks=audit.fallbacks, expected=f"{expected:.0f}",
            mismatches=audit.fallback_mismatches,
            avg=f"{s.avg_v_min_pct:.2f}..{s.avg_v_max_pct:.2f}%",
            rms_pct=np.round(s.tracking_rms_pct, 3).tolist(),
            iz_max=np.round(s.max_abs_i_z, 3).tolist())
    assert audit.fallbacks == res.fallbacks
    assert abs(audit.fallbacks - expected) < 5.0 * math.sqrt(expected)
    assert audit.fallback_mismatches == 0
    assert _band_ok(s)
    assert _tracking_ok(s)
    assert _circulating_ok(s)

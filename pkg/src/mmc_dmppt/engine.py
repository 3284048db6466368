"""Fixed-step co-simulation of PV modules, trackers, outer loop and the three legs."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalDivergenceError
from .grid import CurrentController, PiState, dq_to_abc, grid_voltage
from .mmc import PHASES, initial_leg_state, sm_labels, step_leg
from .mpc import mpc_tick
from .mppt import initial_mppt_state, injections_vectorized, po_step

EVENTS = ("environment", "injection", "reference", "mpc", "plant")


@dataclass(frozen=True)
class TraceRecord:
    """One sampled row; per-SM arrays have shape (3, 2n) in leg order."""

    t: float
    avg_v_c: float
    i_d_ref: float
    i_q_ref: float
    v_s: np.ndarray
    i_ac: np.ndarray
    i_ref: np.ndarray
    i_z: np.ndarray
    v_c: np.ndarray
    u: np.ndarray
    p_pv: np.ndarray
    g: np.ndarray
    k_up: np.ndarray
    k_low: np.ndarray


@dataclass
class Trace:
    """Column store of sampled signals.

    Scalar series have shape (m,), per-phase series (m, 3) and per-SM series
    (m, 3, 2n). Indexing yields :class:`TraceRecord` rows.
    """

    n: int
    t: np.ndarray
    avg_v_c: np.ndarray
    i_d_ref: np.ndarray
    i_q_ref: np.ndarray
    v_s: np.ndarray
    i_ac: np.ndarray
    i_ref: np.ndarray
    i_z: np.ndarray
    v_c: np.ndarray
    u: np.ndarray
    p_pv: np.ndarray
    g: np.ndarray
    k_up: np.ndarray
    k_low: np.ndarray

    SCALARS = ("t", "avg_v_c", "i_d_ref", "i_q_ref")
    PER_PHASE = ("v_s", "i_ac", "i_ref", "i_z", "k_up", "k_low")
    PER_SM = ("v_c", "u", "p_pv", "g")

    @classmethod
    def empty(cls, n, m=0):
        cols = {k: np.zeros(m) for k in cls.SCALARS}
        cols.update({k: np.zeros((m, 3)) for k in cls.PER_PHASE})
        cols.update({k: np.zeros((m, 3, 2 * n)) for k in cls.PER_SM})
        for k in ("k_up", "k_low"):
            cols[k] = np.zeros((m, 3), dtype=int)
        cols["u"] = np.zeros((m, 3, 2 * n), dtype=np.int8)
        return cls(n=n, **cols)

    def columns(self):
        return self.SCALARS + self.PER_PHASE + self.PER_SM

    def truncated(self, m):
        return Trace(self.n, **{k: getattr(self, k)[:m].copy() for k in self.columns()})

    def __len__(self):
        return len(self.t)

    def __getitem__(self, k):
        return TraceRecord(**{c: getattr(self, c)[k] for c in TraceRecord.__dataclass_fields__})

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]


@dataclass
class SummaryMetrics:
    tracking_rms: np.ndarray  # A, per phase
    tracking_rms_pct: np.ndarray  # % of reference amplitude, per phase
    ref_amplitude: np.ndarray  # A, per phase
    max_abs_i_z: np.ndarray  # A, per leg
    mean_abs_i_z: np.ndarray  # A, per leg
    avg_v_min_pct: float
    avg_v_max_pct: float
    max_arm_spread: float  # V
    energy: np.ndarray  # J, per SM, shape (3, 2n)


@dataclass
class SimResult:
    config: object
    trace: Trace
    summary: SummaryMetrics | None
    fallbacks: int = 0
    ticks: int = 0
    diagnostic: str = ""
    extras: dict = field(default_factory=dict)


def summarize(trace, v_nominal=100.0, startup=0.05):
    """Post-transient metrics computed from the sampled trace alone."""
    if len(trace) == 0:
        raise ValueError("cannot summarize an empty trace")
    win = trace.t >= startup
    if not win.any():
        win = np.ones(len(trace), dtype=bool)
    err = trace.i_ac[win] - trace.i_ref[win]
    rms = np.sqrt(np.mean(err ** 2, axis=0))
    amp = np.max(np.abs(trace.i_ref[win]), axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = np.where(amp > 0, 100.0 * rms / np.where(amp > 0, amp, 1.0), 0.0)
    iz = np.abs(trace.i_z[win])
    n = trace.n
    vc = trace.v_c[win]
    spread = max(float(np.max(np.ptp(vc[:, :, :n], axis=2), initial=0.0)),
                 float(np.max(np.ptp(vc[:, :, n:], axis=2), initial=0.0)))
    if len(trace) > 1:
        energy = np.trapezoid(trace.p_pv, trace.t, axis=0)
    else:
        energy = np.zeros_like(trace.p_pv[0])
    avg = trace.avg_v_c[win]
    return SummaryMetrics(
        tracking_rms=rms,
        tracking_rms_pct=pct,
        ref_amplitude=amp,
        max_abs_i_z=iz.max(axis=0),
        mean_abs_i_z=iz.mean(axis=0),
        avg_v_min_pct=100.0 * float(avg.min()) / v_nominal,
        avg_v_max_pct=100.0 * float(avg.max()) / v_nominal,
        max_arm_spread=spread,
        energy=energy,
    )


def run_scenario(config, hook=None, parallel=False):
    """Simulate ``config`` and return a :class:`SimResult`.

    ``hook(event, k, payload)`` is called at each stage of every tick when
    given. ``parallel`` advances the three legs on worker threads; the result
    is identical because legs only share read-only data within a tick.
    """
    p = config.mmc
    n = p.n
    ts = p.t_s
    ids = sm_labels(n)
    profile = config.profile
    scales = np.array([profile.scales[m] for m in ids]).reshape(3, 2 * n)
    fail_t = np.array([profile.failure_times.get(m, np.inf) for m in ids]).reshape(3, 2 * n)
    temperature = profile.temperature

    legs = [initial_leg_state(p) for _ in PHASES]
    mppt = [initial_mppt_state(config.pv, config.mppt.v_ref_init, config.mppt.step,
                               config.mppt.update_period) for _ in ids]
    v_ref = np.array([s.v_ref for s in mppt]).reshape(3, 2 * n)
    mppt_every = max(1, int(round(config.mppt.update_period / ts)))

    c = config.control
    ctrl = CurrentController(PiState(c.kp, c.ki, c.limit), c.i_d_ff, c.i_q_ref)
    pi_every = max(1, int(round(c.period / ts)))
    v_nom = p.v_nominal
    grid = config.grid

    rng = np.random.default_rng(config.seed)
    dl = config.deadline
    budget = dl.budget if dl.budget is not None else ts

    steps = config.n_steps
    dec = config.decimation
    m_records = (steps + dec - 1) // dec
    trace = Trace.empty(n, m_records)
    rec = 0
    fallbacks = 0
    prev_ref = dq_to_abc(*ctrl.dq(), grid.angle(0.0))

    pool = ThreadPoolExecutor(max_workers=3) if parallel else None

    def advance(ph, k, i_ref, v_s_now, v_s_next, i_inj, exceeded):
        leg = legs[ph]
        if dl.mode == "wallclock":
            t0 = time.perf_counter()
            dec_ = mpc_tick(p, leg, i_ref, v_s_now)
            if time.perf_counter() - t0 > budget:
                dec_ = mpc_tick(p, leg, i_ref, v_s_now, deadline_exceeded=True)
        else:
            dec_ = mpc_tick(p, leg, i_ref, v_s_now, deadline_exceeded=exceeded)
        if hook is not None:
            hook("mpc", k, {"leg": ph, "state": leg, "decision": dec_, "i_ref": i_ref,
                            "v_s": v_s_now})
        new = step_leg(p, leg, dec_.u, i_inj, v_s_next)
        return dec_, new

    try:
        for k in range(steps):
            t = k * ts
            t_next = (k + 1) * ts

            # environment
            g = profile.base(t) * scales
            g = np.where(t >= fail_t, 0.0, g)
            if hook is not None:
                hook("environment", k, {"t": t, "g": g})

            # injections (and P&O on its own period)
            v_c = np.stack([leg.v_c for leg in legs])
            i_inj, p_pv, _ = injections_vectorized(config.pv, g, temperature, v_ref, v_c)
            if k % mppt_every == 0 and k > 0:
                # the tracker sees the power delivered this tick; its new
                # command takes effect from the next tick
                flat = p_pv.ravel()
                for j in range(len(mppt)):
                    mppt[j] = po_step(mppt[j], float(flat[j]), t)
                v_ref = np.array([s.v_ref for s in mppt]).reshape(3, 2 * n)
            if hook is not None:
                hook("injection", k, {"p_pv": p_pv, "i_inj": i_inj})

            # references
            avg_v = float(v_c.mean())
            if k % pi_every == 0:
                ctrl.update(avg_v, v_nom, c.period)
            i_d, i_q = ctrl.dq()
            target = dq_to_abc(i_d, i_q, grid.angle(t_next))
            v_s_now = [grid_voltage(grid, ph, t) for ph in range(3)]
            v_s_next = [grid_voltage(grid, ph, t_next) for ph in range(3)]
            if hook is not None:
                hook("reference", k, {"i_ref": target, "i_d": i_d, "i_q": i_q})

            if dl.mode == "simulated" and dl.exceed_probability > 0:
                exceeded = rng.random(3) < dl.exceed_probability
            else:
                exceeded = (False, False, False)

            # MPC and plant, per leg
            if pool is None:
                out = [advance(ph, k, target[ph], v_s_now[ph], v_s_next[ph], i_inj[ph], exceeded[ph])
                       for ph in range(3)]
            else:
                futs = [pool.submit(advance, ph, k, target[ph], v_s_now[ph], v_s_next[ph],
                                    i_inj[ph], exceeded[ph]) for ph in range(3)]
                out = [f.result() for f in futs]
            decisions = [o[0] for o in out]
            fallbacks += sum(d.fallback for d in decisions)

            if k % dec == 0:
                trace.t[rec] = t
                trace.avg_v_c[rec] = avg_v
                trace.i_d_ref[rec] = i_d
                trace.i_q_ref[rec] = i_q
                trace.v_s[rec] = v_s_now
                trace.i_ac[rec] = [leg.i_ac for leg in legs]
                trace.i_ref[rec] = prev_ref
                trace.i_z[rec] = [leg.i_z for leg in legs]
                trace.v_c[rec] = v_c
                trace.u[rec] = [d.u for d in decisions]
                trace.p_pv[rec] = p_pv
                trace.g[rec] = g
                trace.k_up[rec] = [d.k_up for d in decisions]
                trace.k_low[rec] = [d.k_low for d in decisions]
                rec += 1

            for ph in range(3):
                legs[ph] = out[ph][1]
            if hook is not None:
                hook("plant", k, {"legs": legs})
            prev_ref = target
    except NumericalDivergenceError as exc:
        partial = trace.truncated(rec)
        summary = summarize(partial, v_nom, config.startup) if rec else None
        exc.result = SimResult(config, partial, summary, fallbacks, k,
                               diagnostic=f"diverged at t={k * ts:.6g} s in {exc.quantity}")
        raise
    finally:
        if pool is not None:
            pool.shutdown()

    return SimResult(config, trace, summarize(trace, v_nom, config.startup), fallbacks, steps)


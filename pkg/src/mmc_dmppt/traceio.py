"""CSV persistence of traces and the four standard figures."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .engine import Trace
from .mmc import PHASES

GLOBAL_COLUMNS = ("t", "avg_v_c", "i_d_ref", "i_q_ref", "v_s_a", "v_s_b", "v_s_c")
PLOT_NAMES = ("irradiance_power", "capacitor_voltages", "ac_current", "circulating_current")


def _sm_suffixes(n):
    return [f"u{k}" for k in range(1, n + 1)] + [f"l{k}" for k in range(1, n + 1)]


def csv_header(n):
    """Column names in file order: 7 global columns, then per phase
    ``3 + 4 * 2n + 2`` columns."""
    cols = list(GLOBAL_COLUMNS)
    sms = _sm_suffixes(n)
    for ph in PHASES:
        cols += [f"i_{ph}", f"i_{ph}_ref", f"i_z_{ph}"]
        for group in ("v_c", "u", "p_pv", "g"):
            cols += [f"{group}_{ph}_{s}" for s in sms]
        cols += [f"k_up_{ph}", f"k_low_{ph}"]
    return cols


def _fmt(x):
    return f"{x:.9g}"


def write_trace_csv(trace, path):
    """Write ``trace`` (or a result holding one) to ``path`` as CSV, 9 significant digits."""
    trace = getattr(trace, "trace", trace)
    path = Path(path)
    n = trace.n
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(csv_header(n))
            for k in range(len(trace)):
                row = [_fmt(trace.t[k]), _fmt(trace.avg_v_c[k]), _fmt(trace.i_d_ref[k]),
                       _fmt(trace.i_q_ref[k])]
                row += [_fmt(x) for x in trace.v_s[k]]
                for ph in range(3):
                    row += [_fmt(trace.i_ac[k, ph]), _fmt(trace.i_ref[k, ph]), _fmt(trace.i_z[k, ph])]
                    row += [_fmt(x) for x in trace.v_c[k, ph]]
                    row += [str(int(x)) for x in trace.u[k, ph]]
                    row += [_fmt(x) for x in trace.p_pv[k, ph]]
                    row += [_fmt(x) for x in trace.g[k, ph]]
                    row += [str(int(trace.k_up[k, ph])), str(int(trace.k_low[k, ph]))]
                w.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc.strerror or exc}") from exc
    return path


def read_trace_csv(path):
    """Inverse of :func:`write_trace_csv`."""
    path = Path(path)
    with path.open(newline="") as fh:
        header = next(csv.reader(fh))
        body = fh.read()
    per_phase = (len(header) - len(GLOBAL_COLUMNS)) // 3
    n = (per_phase - 5) // 8
    if csv_header(n) != header:
        raise ValueError(f"{path}: unrecognised trace header")
    if not body.strip():
        return Trace.empty(n, 0)
    data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    tr = Trace.empty(n, data.shape[0])
    tr.t[:], tr.avg_v_c[:], tr.i_d_ref[:], tr.i_q_ref[:] = data[:, :4].T
    tr.v_s[:] = data[:, 4:7]
    col = 7
    two_n = 2 * n
    for ph in range(3):
        tr.i_ac[:, ph], tr.i_ref[:, ph], tr.i_z[:, ph] = data[:, col:col + 3].T
        col += 3
        for name in ("v_c", "u", "p_pv", "g"):
            getattr(tr, name)[:, ph, :] = data[:, col:col + two_n]
            col += two_n
        tr.k_up[:, ph] = data[:, col]
        tr.k_low[:, ph] = data[:, col + 1]
        col += 2
    return tr


def plot_series(trace, phase=0):
    """Data drawn in each figure, keyed by figure name."""
    n = trace.n
    return {
        "irradiance_power": {"t": trace.t, "g": trace.g[:, phase, :n], "p_pv": trace.p_pv[:, phase, :n]},
        "capacitor_voltages": {"t": trace.t, "upper": trace.v_c[:, phase, :n],
                               "lower": trace.v_c[:, phase, n:]},
        "ac_current": {"t": trace.t, "i": trace.i_ac[:, phase], "i_ref": trace.i_ref[:, phase]},
        "circulating_current": {"t": trace.t, "i_z": trace.i_z[:, phase]},
    }


def emit_plots(trace, out_dir, ext="png", phase=0):
    """Write the four standard figures for ``phase``; returns name -> path."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    trace = getattr(trace, "trace", trace)
    if len(trace) == 0:
        raise ValueError("cannot plot an empty trace")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ph = PHASES[phase]
    series = plot_series(trace, phase)
    figs = {}

    s = series["irradiance_power"]
    fig, ax_g = plt.subplots(figsize=(8, 4.5))
    ax_p = ax_g.twinx()
    for k in range(trace.n):
        ax_g.plot(s["t"], s["g"][:, k], color="tab:red", alpha=0.4 + 0.6 * k / max(trace.n - 1, 1),
                  lw=1)
        ax_p.plot(s["t"], s["p_pv"][:, k], color="tab:blue", alpha=0.4 + 0.6 * k / max(trace.n - 1, 1),
                  lw=1, label=f"SM {k + 1}")
    ax_g.set_xlabel("t (s)")
    ax_g.set_ylabel("irradiance (W/m$^2$)", color="tab:red")
    ax_p.set_ylabel("PV power (W)", color="tab:blue")
    ax_p.legend(loc="lower left", fontsize=7, ncol=3)
    ax_g.set_title(f"Phase {ph} upper arm: irradiance and PV power")
    figs["irradiance_power"] = fig

    s = series["capacitor_voltages"]
    fig, (ax_u, ax_l) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    for k in range(trace.n):
        ax_u.plot(s["t"], s["upper"][:, k], lw=0.8, label=f"SM {k + 1}")
        ax_l.plot(s["t"], s["lower"][:, k], lw=0.8, label=f"SM {trace.n + k + 1}")
    ax_u.set_ylabel("upper arm v$_C$ (V)")
    ax_l.set_ylabel("lower arm v$_C$ (V)")
    ax_l.set_xlabel("t (s)")
    ax_u.legend(fontsize=7, ncol=3)
    ax_l.legend(fontsize=7, ncol=3)
    figs["capacitor_voltages"] = fig

    s = series["ac_current"]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(s["t"], s["i_ref"], "k--", lw=1, label="reference")
    ax.plot(s["t"], s["i"], lw=0.8, label="output")
    ax.set_xlabel("t (s)")
    ax.set_ylabel(f"i$_{ph}$ (A)")
    ax.legend()
    figs["ac_current"] = fig

    s = series["circulating_current"]
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(s["t"], s["i_z"], lw=0.8)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("t (s)")
    ax.set_ylabel(f"i$_{{z,{ph}}}$ (A)")
    figs["circulating_current"] = fig

    written = {}
    for name, fig in figs.items():
        fig.tight_layout()
        p = out_dir / f"{name}.{ext}"
        try:
            fig.savefig(p)
        finally:
            plt.close(fig)
        written[name] = p
    return written

"""Single-diode PV module model and irradiance scenarios.

The module is described by the five-parameter single-diode equation

    I = Iph - I0 * (exp((V + I*Rs) / a) - 1) - (V + I*Rs) / Rsh

with ``a = n * Ns * k*T/q``. The parameters are fitted once per datasheet from
the short-circuit, open-circuit and maximum-power points, the zero-slope
condition of the power curve at the MPP, and the temperature coefficient of
the open-circuit voltage (which pins the ideality factor). Off-reference
conditions are translated in the De Soto manner: photocurrent linear in
irradiance and shifted by the Isc temperature coefficient, ``a`` proportional
to absolute temperature, ``I0`` following the band-gap law, and ``Rsh``
inversely proportional to irradiance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import constants, optimize

from .errors import ConfigurationError, InvalidInputError

G_REF = 1000.0
T_REF = 25.0
_KELVIN = 273.15
_EG_REF = 1.121  # eV, crystalline silicon
_DEG_DT = -0.0002677  # 1/K
_VT_REF = constants.k * (T_REF + _KELVIN) / constants.e

NEWTON_TOL = 1e-9
NEWTON_MAXITER = 50


@dataclass(frozen=True)
class PvModuleParams:
    """Datasheet values of one PV module. Defaults: SunPower SPR-305E-WHT-D.

    ``k_v`` and ``k_i`` are temperature coefficients in %/degC.
    """

    p_max: float = 305.226
    v_oc: float = 64.2
    i_sc: float = 5.96
    v_mpp: float = 54.7
    i_mpp: float = 5.58
    n_cells: int = 96
    k_v: float = -0.27269
    k_i: float = 0.061745

    def __post_init__(self):
        for name in ("p_max", "v_oc", "i_sc", "v_mpp", "i_mpp", "n_cells"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value}", field=name)
        if not self.v_mpp < self.v_oc:
            raise ConfigurationError("v_mpp must be below v_oc", field="v_mpp")
        if not self.i_mpp < self.i_sc:
            raise ConfigurationError("i_mpp must be below i_sc", field="i_mpp")
        if abs(self.v_mpp * self.i_mpp - self.p_max) > 0.005 * self.p_max:
            raise ConfigurationError("v_mpp * i_mpp must match p_max within 0.5%", field="p_max")


@dataclass(frozen=True)
class EnvironmentSample:
    irradiance: float  # W/m^2
    temperature: float = T_REF  # degC


@dataclass(frozen=True)
class DiodeFit:
    """Fitted single-diode parameters at reference conditions (1000 W/m^2, 25 degC)."""

    photocurrent: float
    saturation_current: float
    ideality: float
    r_s: float
    r_sh: float
    n_cells: int

    @property
    def a_ref(self):
        """Modified ideality factor n * Ns * Vt at 25 degC [V]."""
        return self.ideality * self.n_cells * _VT_REF


def _three_point_fit(params, a):
    """Solve Iph, I0, Rs, Rsh for a fixed modified ideality factor ``a``.

    Iph and I0 enter the short- and open-circuit equations linearly, so only
    (Rs, 1/Rsh) is left to the nonlinear root finder.
    """
    isc, voc, vmp, imp = params.i_sc, params.v_oc, params.v_mpp, params.i_mpp

    def linear_part(rs, gsh):
        e_sc = math.expm1(isc * rs / a)
        e_oc = math.expm1(voc / a)
        i0 = (isc + isc * rs * gsh - voc * gsh) / (e_oc - e_sc)
        iph = voc * gsh + i0 * e_oc
        return iph, i0

    def residual(x):
        rs, gsh = x
        iph, i0 = linear_part(rs, gsh)
        x_mp = (vmp + imp * rs) / a
        r_point = iph - i0 * math.expm1(x_mp) - (vmp + imp * rs) * gsh - imp
        g = i0 / a * math.exp(x_mp) + gsh
        r_slope = g / (1.0 + g * rs) - imp / vmp
        return [r_point, r_slope * vmp]

    sol = optimize.root(residual, [0.3, 1.0 / 300.0], method="hybr", options={"xtol": 1e-14})
    rs, gsh = sol.x
    iph, i0 = linear_part(rs, gsh)
    return iph, i0, rs, gsh, float(np.max(np.abs(residual(sol.x))))


def _translate(fit, irradiance, temperature, alpha_sc):
    """Single-diode parameters (iph, i0, a, rs, gsh) at the given conditions."""
    tk = np.asarray(temperature, dtype=float) + _KELVIN
    tr = T_REF + _KELVIN
    a = fit.a_ref * tk / tr
    eg = _EG_REF * (1.0 + _DEG_DT * (tk - tr))
    vt_eg = constants.e / constants.k
    i0 = fit.saturation_current * (tk / tr) ** 3 * np.exp(vt_eg * (_EG_REF / tr - eg / tk))
    ratio = np.asarray(irradiance, dtype=float) / G_REF
    iph = ratio * (fit.photocurrent + alpha_sc * (tk - tr))
    # shunt conductance proportional to irradiance
    gsh = ratio / fit.r_sh
    return iph, i0, a, fit.r_s, gsh


def _voc_at(fit, temperature, alpha_sc):
    iph, i0, a, _, gsh = _translate(fit, G_REF, temperature, alpha_sc)
    return optimize.brentq(lambda v: iph - i0 * math.expm1(v / a) - v * gsh, 0.0, 10.0 * fit.n_cells)


@lru_cache(maxsize=32)
def fit_single_diode(params):
    """Fit the five single-diode parameters to a datasheet.

    A bounded scalar search over the diode ideality factor matches the
    open-circuit voltage temperature coefficient; for every trial ideality the
    remaining four parameters reproduce the three datasheet points and the
    zero power slope at the MPP.
    """
    alpha_sc = params.k_i / 100.0 * params.i_sc
    beta_voc = params.k_v / 100.0 * params.v_oc

    def build(n):
        iph, i0, rs, gsh, res = _three_point_fit(params, n * params.n_cells * _VT_REF)
        return DiodeFit(iph, i0, n, rs, 1.0 / gsh, params.n_cells), res

    def mismatch(n):
        fit, res = build(n)
        if res > 1e-6 or fit.r_s < 0 or fit.r_sh <= 0:
            return 1e6
        dvoc = (_voc_at(fit, T_REF + 1.0, alpha_sc) - _voc_at(fit, T_REF - 1.0, alpha_sc)) / 2.0
        return (dvoc - beta_voc) ** 2

    best = optimize.minimize_scalar(mismatch, bounds=(0.5, 2.0), method="bounded",
                                    options={"xatol": 1e-8})
    fit, res = build(best.x)
    if res > 1e-6 or fit.r_s < 0 or fit.r_sh <= 0:
        raise ConfigurationError("datasheet values admit no physical single-diode fit")
    return fit


def _solve_current(v, iph, i0, a, rs, gsh):
    """Terminal current of the implicit diode equation, clamped at zero.

    The residual is strictly decreasing and concave in I, so Newton started
    from the photocurrent converges monotonically from above; iterates that
    leave the [0, Iph] bracket fall back to bisection.
    """
    v, iph, i0, a = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (v, iph, i0, a)))

    def resid(cur):
        arg = np.minimum((v + cur * rs) / a, 700.0)
        e = np.exp(arg)
        f = iph - i0 * (e - 1.0) - (v + cur * rs) * gsh - cur
        df = -i0 * rs / a * e - rs * gsh - 1.0
        return f, df

    f0, _ = resid(np.zeros_like(v))
    active = f0 > 0.0
    out = np.zeros_like(v)
    if not active.any():
        return out
    lo = np.zeros_like(v)
    hi = iph.copy()
    cur = iph.copy()
    for _ in range(NEWTON_MAXITER):
        f, df = resid(cur)
        lo = np.where(f > 0.0, cur, lo)
        hi = np.where(f <= 0.0, cur, hi)
        step = f / df
        nxt = cur - step
        outside = (nxt < lo) | (nxt > hi)
        nxt = np.where(outside, 0.5 * (lo + hi), nxt)
        done = np.abs(nxt - cur) < NEWTON_TOL
        cur = nxt
        if np.all(done | ~active):
            break
    out[active] = cur[active]
    return np.maximum(out, 0.0)


def _check_inputs(irradiance, temperature, v):
    irr = np.asarray(irradiance, dtype=float)
    vv = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(vv)):
        raise InvalidInputError("terminal voltage must be finite")
    if np.any(vv < 0):
        raise InvalidInputError("terminal voltage must be non-negative")
    if not np.all(np.isfinite(irr)) or np.any(irr < 0):
        raise InvalidInputError("irradiance must be finite and non-negative")
    if not np.all(np.isfinite(np.asarray(temperature, dtype=float))):
        raise InvalidInputError("temperature must be finite")


def module_current(params, irradiance, temperature, v):
    """Vectorized terminal current; arrays broadcast against each other."""
    _check_inputs(irradiance, temperature, v)
    fit = fit_single_diode(params)
    alpha_sc = params.k_i / 100.0 * params.i_sc
    iph, i0, a, rs, gsh = _translate(fit, irradiance, temperature, alpha_sc)
    return _solve_current(v, iph, i0, a, rs, gsh)


def module_power(params, irradiance, temperature, v):
    return module_current(params, irradiance, temperature, v) * np.asarray(v, dtype=float)


def pv_current(params, env, v):
    """Terminal current [A] of one module at voltage ``v`` under ``env``."""
    return float(module_current(params, env.irradiance, env.temperature, v))


def pv_power(params, env, v):
    """Output power [W] of one module at voltage ``v`` under ``env``."""
    return pv_current(params, env, v) * float(v)


def open_circuit_voltage(params, env):
    """Open-circuit voltage [V] at the given conditions (0 when dark)."""
    if env.irradiance <= 0:
        return 0.0
    fit = fit_single_diode(params)
    alpha_sc = params.k_i / 100.0 * params.i_sc
    iph, i0, a, _, gsh = _translate(fit, env.irradiance, env.temperature, alpha_sc)
    return optimize.brentq(lambda v: iph - i0 * math.expm1(v / a) - v * gsh,
                           0.0, 10.0 * params.v_oc, xtol=1e-12)


def grid_scan_mpp(params, env, dv=0.01):
    """Brute-force maximum power point on a ``dv`` voltage grid.

    Returns ``(v_mpp, p_mpp)``. Used as the reference the trackers are judged
    against, so it deliberately avoids any derivative information.
    """
    v = np.arange(0.0, params.v_oc * 1.2, dv)
    p = module_power(params, env.irradiance, env.temperature, v)
    k = int(np.argmax(p))
    return float(v[k]), float(p[k])


@dataclass(frozen=True)
class IrradianceProfile:
    """Shared base irradiance series with per-module scaling and failures.

    ``breakpoints`` is a sequence of ``(t, W/m^2)`` pairs interpolated linearly
    and held constant outside their span. ``scales`` must list every module
    id; ``failure_times`` lists only modules that fail.
    """

    breakpoints: tuple
    scales: dict = field(default_factory=dict)
    failure_times: dict = field(default_factory=dict)
    temperature: float = T_REF

    def __post_init__(self):
        pts = np.asarray(self.breakpoints, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
            raise ConfigurationError("breakpoints must be a non-empty list of (t, G) pairs",
                                     field="irradiance.base")
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise ConfigurationError("breakpoint times must be strictly increasing",
                                     field="irradiance.base")
        if np.any(pts[:, 1] < 0) or not np.all(np.isfinite(pts)):
            raise ConfigurationError("base irradiance must be finite and non-negative",
                                     field="irradiance.base")
        for mid, s in self.scales.items():
            if not 0.0 <= s <= 1.0:
                raise ConfigurationError(f"scale of {mid} must lie in [0, 1], got {s}",
                                         field="irradiance.scale")
        for mid, tf in self.failure_times.items():
            if mid not in self.scales:
                raise ConfigurationError(f"failure for unknown module {mid}",
                                         field="irradiance.failure_time")
            if tf < 0:
                raise ConfigurationError(f"failure time of {mid} is negative",
                                         field="irradiance.failure_time")

    def base(self, t):
        pts = np.asarray(self.breakpoints, dtype=float)
        return np.interp(t, pts[:, 0], pts[:, 1])

    def sample_all(self, module_ids, t):
        """Irradiance array for ``module_ids`` at time ``t`` (engine fast path)."""
        g = self.base(t)
        out = np.array([g * self.scales[m] for m in module_ids])
        for k, m in enumerate(module_ids):
            tf = self.failure_times.get(m)
            if tf is not None and t >= tf:
                out[k] = 0.0
        return out


def sample_environment(profile, module_id, t):
    """Irradiance and temperature seen by ``module_id`` at time ``t``."""
    if not (math.isfinite(t) and t >= 0):
        raise InvalidInputError(f"time must be non-negative, got {t}")
    if module_id not in profile.scales:
        raise ConfigurationError(f"unknown module id {module_id!r}", field="module_id")
    tf = profile.failure_times.get(module_id)
    if tf is not None and t >= tf:
        return EnvironmentSample(0.0, profile.temperature)
    return EnvironmentSample(float(profile.base(t)) * profile.scales[module_id], profile.temperature)


# Synthetic base series. The measured irradiance used in the original case
# studies is not available, so these stand in for it.

def sunny(level=G_REF, duration=3.0):
    return ((0.0, level), (duration, level))


def ramp(g0, g1, t0, t1):
    return ((0.0, g0), (t0, g0), (t1, g1))


def cloud_pulse(level, depth, t_start, t_end, edge=0.02):
    """Constant ``level`` dipping by the fraction ``depth`` between two times."""
    low = level * (1.0 - depth)
    return ((0.0, level), (t_start, level), (t_start + edge, low),
            (t_end - edge, low), (t_end, level))


def fluctuating(level=G_REF, depth=0.15, frequency=1.0, duration=3.0):
    """Triangle fluctuation of +/-``depth`` around ``level`` at ``frequency``."""
    quarter = 0.25 / frequency
    pts = []
    shape = (0.0, 1.0, 0.0, -1.0)
    k = 0
    while k * quarter <= duration + 1e-12:
        pts.append((k * quarter, level * (1.0 + depth * shape[k % 4])))
        k += 1
    return tuple(pts)

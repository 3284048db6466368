"""Scenario configuration and the built-in case studies."""

from __future__ import annotations

import fnmatch
import math
from dataclasses import dataclass, field, replace

from . import pv
from .errors import ConfigurationError
from .grid import GridModel
from .mmc import MmcParams, sm_labels
from .pv import IrradianceProfile, PvModuleParams

FULL_DURATION = 3.0
FULL_FAILURE_TIME = 2.0
DESK_DURATION = 0.3
DESK_FAILURE_TIME = 0.2


@dataclass(frozen=True)
class MpptConfig:
    step: float = 0.5
    update_period: float = 1e-3
    v_ref_init: float | None = None  # None -> 0.8 * Voc

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigurationError("mppt.step must be positive", field="mppt.step")
        if not self.update_period > 0:
            raise ConfigurationError("mppt.update_period must be positive", field="mppt.update_period")


@dataclass(frozen=True)
class ControlConfig:
    kp: float = 5.0
    ki: float = 100.0
    limit: float = 30.0
    period: float = 100e-6
    i_d_ff: float = 16.0
    i_q_ref: float = 0.0

    def __post_init__(self):
        if self.kp < 0:
            raise ConfigurationError("control.kp must be non-negative", field="control.kp")
        if self.ki < 0:
            raise ConfigurationError("control.ki must be non-negative", field="control.ki")
        if not self.limit > 0:
            raise ConfigurationError("control.limit must be positive", field="control.limit")
        if not self.period > 0:
            raise ConfigurationError("control.period must be positive", field="control.period")


@dataclass(frozen=True)
class DeadlinePolicy:
    """When the switching computation is deemed to have overrun its slot.

    ``simulated`` draws an overrun per leg and tick with ``exceed_probability``
    from the scenario RNG. ``wallclock`` times the actual computation against
    ``budget`` seconds (default: one sampling period).
    """

    mode: str = "simulated"
    exceed_probability: float = 0.0
    budget: float | None = None

    def __post_init__(self):
        if self.mode not in ("simulated", "wallclock"):
            raise ConfigurationError("deadline.mode must be 'simulated' or 'wallclock'",
                                     field="deadline.mode")
        if not 0.0 <= self.exceed_probability <= 1.0:
            raise ConfigurationError("deadline.exceed_probability must lie in [0, 1]",
                                     field="deadline.exceed_probability")


@dataclass(frozen=True)
class ModuleGroup:
    """Scaling and/or failure applied to every SM whose id matches ``match``.

    ``match`` is a shell-style pattern over ids such as ``a_u1`` or ``c_l6``.
    """

    match: str
    scale: float | None = None
    failure_time: float | None = None


@dataclass(frozen=True)
class IrradianceSpec:
    base: tuple = pv.fluctuating()
    temperature: float = pv.T_REF
    default_scale: float = 1.0
    groups: tuple = ()

    def build_profile(self, n):
        ids = sm_labels(n)
        scales = {m: self.default_scale for m in ids}
        failures = {}
        for k, grp in enumerate(self.groups):
            hits = [m for m in ids if fnmatch.fnmatchcase(m, grp.match)]
            if not hits:
                raise ConfigurationError(f"group {grp.match!r} matches no SM for n={n}",
                                         field=f"irradiance.groups[{k}].match")
            for m in hits:
                if grp.scale is not None:
                    scales[m] = grp.scale
                if grp.failure_time is not None:
                    failures[m] = grp.failure_time
        return IrradianceProfile(tuple(tuple(p) for p in self.base), scales, failures,
                                 self.temperature)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    mmc: MmcParams = field(default_factory=MmcParams)
    pv: PvModuleParams = field(default_factory=PvModuleParams)
    irradiance: IrradianceSpec = field(default_factory=IrradianceSpec)
    grid: GridModel = field(default_factory=GridModel)
    mppt: MpptConfig = field(default_factory=MpptConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    deadline: DeadlinePolicy = field(default_factory=DeadlinePolicy)
    duration: float = DESK_DURATION
    decimation: int = 20
    seed: int = 0
    startup: float = 0.05  # s excluded from post-transient metrics

    def __post_init__(self):
        if not (isinstance(self.duration, (int, float)) and math.isfinite(self.duration)
                and self.duration > 0):
            raise ConfigurationError("duration must be positive", field="duration")
        if not (isinstance(self.decimation, int) and self.decimation >= 1):
            raise ConfigurationError("decimation must be an integer >= 1", field="decimation")
        if not self.startup >= 0:
            raise ConfigurationError("startup must be non-negative", field="startup")
        profile = self.irradiance.build_profile(self.mmc.n)
        if len(profile.scales) != 6 * self.mmc.n:
            raise ConfigurationError("need exactly 6n irradiance assignments", field="irradiance")
        object.__setattr__(self, "_profile", profile)

    @property
    def profile(self):
        return self._profile

    @property
    def n_steps(self):
        return int(round(self.duration / self.mmc.t_s))

    def with_full_duration(self):
        """Stretch to the 3 s case-study length, scaling event times alike."""
        factor = FULL_DURATION / self.duration
        groups = tuple(replace(g, failure_time=None if g.failure_time is None
                               else g.failure_time * factor) for g in self.irradiance.groups)
        return replace(self, duration=FULL_DURATION,
                       irradiance=replace(self.irradiance, groups=groups))


SHADED = ModuleGroup("*_?[56]", scale=0.2)
FAILED = ModuleGroup("*_?1", failure_time=DESK_FAILURE_TIME)

PRESET_NAMES = ("normal", "partial_shading", "failure")


def builtin_presets(full_duration=False):
    """The three case studies: normal, partial shading, PV failure with shading."""
    base = IrradianceSpec()
    presets = [
        ScenarioConfig(name="normal", irradiance=base),
        ScenarioConfig(name="partial_shading", irradiance=replace(base, groups=(SHADED,))),
        ScenarioConfig(name="failure", irradiance=replace(base, groups=(SHADED, FAILED))),
    ]
    if full_duration:
        presets = [p.with_full_duration() for p in presets]
    return presets


def preset(name, full_duration=False):
    for p in builtin_presets(full_duration):
        if p.name == name:
            return p
    raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}",
                             field="preset")

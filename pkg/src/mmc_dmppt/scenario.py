"""TOML scenario files: parsing, validation, key=value overrides and dumping.

See ``docs/scenario.md`` for the schema. Missing keys take the documented
defaults; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import re

import tomli
import tomli_w

from . import pv
from .config import (ControlConfig, DeadlinePolicy, IrradianceSpec, ModuleGroup, MpptConfig,
                     ScenarioConfig, preset)
from .errors import ConfigurationError, ScenarioParseError
from .grid import GridModel
from .mmc import MmcParams
from .pv import PvModuleParams

_SECTIONS = {
    "mmc": MmcParams,
    "pv": PvModuleParams,
    "grid": GridModel,
    "mppt": MpptConfig,
    "control": ControlConfig,
    "deadline": DeadlinePolicy,
}
_TOP = ("name", "preset", "duration", "decimation", "seed", "startup")
_BASE_KINDS = {
    "fluctuating": pv.fluctuating,
    "sunny": pv.sunny,
    "ramp": pv.ramp,
    "cloud_pulse": pv.cloud_pulse,
}


def _field_names(cls):
    return {f.name for f in dataclasses.fields(cls)}


def _coerce(cls, section, table):
    if not isinstance(table, dict):
        raise ConfigurationError(f"[{section}] must be a table", field=section)
    unknown = set(table) - _field_names(cls)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigurationError(f"unknown key {section}.{key}", field=f"{section}.{key}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in table:
            continue
        value = table[f.name]
        if f.type in ("int",) and isinstance(value, float) and value.is_integer():
            value = int(value)
        if f.type in ("float", "float | None") and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        field = exc.field if exc.field and "." in exc.field else f"{section}.{exc.field}"
        raise ConfigurationError(str(exc), field=field) from None
    except TypeError as exc:
        raise ConfigurationError(f"[{section}]: {exc}", field=section) from None


def _irradiance(table):
    allowed = {"base", "temperature", "default_scale", "groups"}
    unknown = set(table) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigurationError(f"unknown key irradiance.{key}", field=f"irradiance.{key}")
    kwargs = {}
    if "base" in table:
        base = table["base"]
        if isinstance(base, dict):
            base = dict(base)
            kind = base.pop("kind", None)
            if kind not in _BASE_KINDS:
                raise ConfigurationError(f"irradiance.base.kind must be one of {sorted(_BASE_KINDS)}",
                                         field="irradiance.base.kind")
            try:
                base = _BASE_KINDS[kind](**base)
            except TypeError as exc:
                raise ConfigurationError(f"irradiance.base: {exc}", field="irradiance.base") from None
        elif not isinstance(base, list):
            raise ConfigurationError("irradiance.base must be a list of [t, G] pairs or a table",
                                     field="irradiance.base")
        kwargs["base"] = tuple(tuple(float(x) for x in pt) for pt in base)
    for key in ("temperature", "default_scale"):
        if key in table:
            kwargs[key] = float(table[key])
    groups = []
    for k, g in enumerate(table.get("groups", [])):
        unknown = set(g) - {"match", "scale", "failure_time"}
        if unknown or "match" not in g:
            bad = sorted(unknown)[0] if unknown else "match"
            raise ConfigurationError(f"bad key irradiance.groups[{k}].{bad}",
                                     field=f"irradiance.groups[{k}].{bad}")
        groups.append(ModuleGroup(g["match"],
                                  None if "scale" not in g else float(g["scale"]),
                                  None if "failure_time" not in g else float(g["failure_time"])))
    kwargs["groups"] = tuple(groups)
    return IrradianceSpec(**kwargs)


def _set_dotted(tree, key, value):
    parts = key.split(".")
    node = tree
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"override {key}: {p} is not a table", field=key)
    node[parts[-1]] = value


def parse_override(text):
    """Split ``key=value``; the value is read as a TOML literal, else as a string."""
    if "=" not in text:
        raise ScenarioParseError(f"override {text!r} is not key=value")
    key, raw = (s.strip() for s in text.split("=", 1))
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw
    return key, value


def config_to_dict(cfg):
    """Nested plain-data form of a config, suitable for TOML."""
    out = {"name": cfg.name, "duration": cfg.duration, "decimation": cfg.decimation,
           "seed": cfg.seed, "startup": cfg.startup}
    for section in _SECTIONS:
        d = dataclasses.asdict(getattr(cfg, section))
        out[section] = {k: v for k, v in d.items() if v is not None}
    irr = cfg.irradiance
    out["irradiance"] = {
        "temperature": irr.temperature,
        "default_scale": irr.default_scale,
        "base": [list(p) for p in irr.base],
        "groups": [{k: v for k, v in dataclasses.asdict(g).items() if v is not None}
                   for g in irr.groups],
    }
    return out


def _expand_preset(tree):
    """Replace a ``preset = "name"`` key by that preset's full tree, then merge."""
    tree = dict(tree)
    if "preset" not in tree:
        return tree
    merged = config_to_dict(preset(tree.pop("preset")))
    for key, value in tree.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return merged


def config_from_dict(tree):
    tree = _expand_preset(tree)
    unknown = set(tree) - set(_TOP) - set(_SECTIONS) - {"irradiance"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigurationError(f"unknown key {key}", field=key)
    kwargs = {}
    for section, cls in _SECTIONS.items():
        if section in tree:
            kwargs[section] = _coerce(cls, section, tree[section])
    if "irradiance" in tree:
        kwargs["irradiance"] = _irradiance(tree["irradiance"])
    for key in ("name", "duration", "decimation", "seed", "startup"):
        if key in tree:
            kwargs[key] = tree[key]
    if "duration" in kwargs:
        kwargs["duration"] = float(kwargs["duration"])
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def parse_scenario(text, overrides=()):
    """Build a validated :class:`ScenarioConfig` from TOML text.

    ``overrides`` are ``key=value`` strings with dotted keys (``mmc.n=4``)
    applied on top of the file before validation.
    """
    try:
        tree = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ScenarioParseError(str(exc), line=int(m.group(1)) if m else None) from None
    if overrides:
        tree = _expand_preset(tree)
        for item in overrides:
            key, value = parse_override(item) if isinstance(item, str) else item
            _set_dotted(tree, key, value)
    return config_from_dict(tree)


def dump_scenario(cfg):
    """TOML text that parses back to ``cfg``; the breakpoint list stays on one line."""
    tree = config_to_dict(cfg)
    base = tree["irradiance"].pop("base")
    text = tomli_w.dumps(tree)
    pairs = ", ".join(f"[{t!r}, {g!r}]" for t, g in base)
    return text.replace("[irradiance]\n", f"[irradiance]\nbase = [{pairs}]\n", 1)

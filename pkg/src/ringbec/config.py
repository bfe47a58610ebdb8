"""Run configuration: parsing, validation, canonical serialization, hashing.

Configs are TOML with five sections: [params], [initial], [schedule],
[integrator], [output].  Parsing is strict: unknown keys are errors, not
warnings, and all defaults are materialized into the returned RunConfig so
that serialize_config round-trips losslessly and the sha256 of the
canonical text identifies the run.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field

import numpy as np
import tomli

from .drives import (CouplingSchedule, bottleneck, constant_schedule,
                     conveyor_schedule, cut_link, resonance_frequency,
                     resonant_modulation, stop_modulation)
from .errors import ConfigError
from .integrator import IntegratorOptions
from .model import ModelParams, from_polar, make_params
from .states import seeded_state, single_well_state, uniform_state, winding_state

_SECTIONS = ("params", "initial", "schedule", "integrator", "output")
_KEYS = {
    "params": {"n_wells", "n_total", "k_tilde", "lam", "u", "e0"},
    "initial": {"preset", "populations", "phases"},
    "schedule": {"kind", "depth", "w", "phi", "t_stop", "link", "t_cut",
                 "factor", "mode", "k_low", "k_high", "n_turns", "direction",
                 "timeout", "durations"},
    "integrator": {"method", "abs_tol", "rel_tol", "dt", "max_time"},
    "output": {"sample_interval", "format", "path", "report_path"},
}
_SCHEDULE_KEYS = {
    "constant": set(),
    "modulated": {"depth", "w", "phi", "t_stop"},
    "cut": {"link", "t_cut"},
    "bottleneck": {"link", "factor"},
    "conveyor": {"mode", "k_low", "k_high", "n_turns", "direction", "timeout",
                 "durations"},
}
_PRESET_RE = re.compile(
    r"^(uniform"
    r"|winding\((-?\d+)\)"
    r"|single-well\(([0-9eE.+-]+)\)"
    r"|seed-imbalance\(([0-9eE.+-]+)\))$")


@dataclass(frozen=True)
class RunConfig:
    """Fully materialized run description; equal configs hash identically."""

    params: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    integrator: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)


def _line_of(text: str, key: str) -> str:
    for i, line in enumerate(text.splitlines(), 1):
        head = line.split("#", 1)[0]
        if "=" in head and head.split("=", 1)[0].strip() == key:
            return f"line {i}"
    return "line unknown"


def _need_number(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(
            f"{section}.{key} must be a number, got {value!r}")
    if isinstance(value, float) and math.isnan(value):
        raise ConfigError(f"{section}.{key} must not be NaN")
    return value


def _need_int(section: str, key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(
            f"{section}.{key} must be an integer, got {value!r}")
    return value


def _need_str(section: str, key: str, value) -> str:
    if not isinstance(value, str):
        raise ConfigError(
            f"{section}.{key} must be a string, got {value!r}")
    return value


def _need_num_list(section: str, key: str, value) -> list:
    if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool)
            for v in value):
        raise ConfigError(
            f"{section}.{key} must be a list of numbers, got {value!r}")
    return list(value)


def parse_config(text: str) -> RunConfig:
    """Parse and validate config text, materializing every default."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    for section in raw:
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(raw[section], dict):
            raise ConfigError(f"[{section}] must be a section")
        for key in raw[section]:
            if key not in _KEYS[section]:
                raise ConfigError(
                    f"{_line_of(text, key)}: unknown key {section}.{key}")

    p = dict(raw.get("params", {}))
    if "n_total" not in p:
        raise ConfigError("missing required key params.n_total")
    n_wells = _need_int("params", "n_wells", p.get("n_wells", 4))
    n_total = _need_number("params", "n_total", p["n_total"])
    k_tilde = _need_number("params", "k_tilde", p.get("k_tilde", 0.5))
    if "lam" in p and "u" in p:
        raise ConfigError(
            f"{_line_of(text, 'lam')} and {_line_of(text, 'u')}: "
            f"params.lam conflicts with params.u; give exactly one")
    if "lam" not in p and "u" not in p:
        raise ConfigError("missing required key: one of params.lam, params.u")
    params_out = {"n_wells": n_wells, "n_total": n_total, "k_tilde": k_tilde}
    if "lam" in p:
        params_out["lam"] = _need_number("params", "lam", p["lam"])
    else:
        params_out["u"] = _need_number("params", "u", p["u"])
    e0 = _need_num_list("params", "e0", p.get("e0", [0.0] * n_wells))
    if len(e0) != n_wells:
        raise ConfigError(
            f"params.e0 must have {n_wells} entries, got {len(e0)}")
    params_out["e0"] = e0

    ini = dict(raw.get("initial", {}))
    has_preset = "preset" in ini
    has_explicit = "populations" in ini or "phases" in ini
    if has_preset and has_explicit:
        raise ConfigError(
            "initial.preset conflicts with explicit initial.populations/"
            "initial.phases; give exactly one form")
    if not has_preset and not has_explicit:
        raise ConfigError(
            "missing initial state: give initial.preset or "
            "initial.populations + initial.phases")
    if has_preset:
        preset = _need_str("initial", "preset", ini["preset"])
        if not _PRESET_RE.match(preset):
            raise ConfigError(
                f"{_line_of(text, 'preset')}: unknown preset {preset!r}; "
                f"use uniform, winding(m), single-well(fraction), or "
                f"seed-imbalance(atoms)")
        initial_out = {"preset": preset}
    else:
        if "populations" not in ini or "phases" not in ini:
            raise ConfigError(
                "explicit initial state needs both initial.populations and "
                "initial.phases")
        pops = _need_num_list("initial", "populations", ini["populations"])
        phases = _need_num_list("initial", "phases", ini["phases"])
        if len(pops) != n_wells or len(phases) != n_wells:
            raise ConfigError(
                f"initial.populations and initial.phases must each have "
                f"{n_wells} entries")
        if any(v < 0 for v in pops):
            raise ConfigError("initial.populations must be nonnegative")
        total = float(sum(pops))
        if abs(total - n_total) > 1e-9 * n_total:
            raise ConfigError(
                f"initial.populations sum to {total:g}, expected "
                f"params.n_total = {n_total:g}")
        initial_out = {"populations": pops, "phases": phases}

    sch = dict(raw.get("schedule", {}))
    if "kind" not in sch:
        raise ConfigError("missing required key schedule.kind")
    kind = _need_str("schedule", "kind", sch["kind"])
    if kind not in _SCHEDULE_KEYS:
        raise ConfigError(
            f"{_line_of(text, 'kind')}: unknown schedule.kind {kind!r}; "
            f"use one of {sorted(_SCHEDULE_KEYS)}")
    allowed = _SCHEDULE_KEYS[kind] | {"kind"}
    for key in sch:
        if key not in allowed:
            raise ConfigError(
                f"{_line_of(text, key)}: schedule.{key} does not apply to "
                f"kind {kind!r}")
    schedule_out: dict = {"kind": kind}
    if kind == "modulated":
        schedule_out["depth"] = _need_number(
            "schedule", "depth", sch.get("depth", 1.0))
        if "w" in sch:
            schedule_out["w"] = _need_number("schedule", "w", sch["w"])
        else:
            if n_wells != 4:
                raise ConfigError(
                    "schedule.w is required when params.n_wells != 4")
            schedule_out["w"] = resonance_frequency(
                _build_params_dict(params_out))
        schedule_out["phi"] = _need_number(
            "schedule", "phi", sch.get("phi", 0.0))
        schedule_out["t_stop"] = _need_number(
            "schedule", "t_stop", sch.get("t_stop", math.inf))
    elif kind == "cut":
        if "t_cut" not in sch:
            raise ConfigError("missing required key schedule.t_cut")
        schedule_out["link"] = _need_int(
            "schedule", "link", sch.get("link", 1))
        schedule_out["t_cut"] = _need_number(
            "schedule", "t_cut", sch["t_cut"])
    elif kind == "bottleneck":
        if "factor" not in sch:
            raise ConfigError("missing required key schedule.factor")
        schedule_out["link"] = _need_int(
            "schedule", "link", sch.get("link", 1))
        schedule_out["factor"] = _need_number(
            "schedule", "factor", sch["factor"])
    elif kind == "conveyor":
        mode = _need_str("schedule", "mode", sch.get("mode", "feedback"))
        if mode not in ("feedback", "open-loop"):
            raise ConfigError(
                f"schedule.mode must be 'feedback' or 'open-loop', got "
                f"{mode!r}")
        schedule_out["mode"] = mode
        schedule_out["k_low"] = _need_number(
            "schedule", "k_low", sch.get("k_low", k_tilde))
        schedule_out["k_high"] = _need_number(
            "schedule", "k_high", sch.get("k_high", 60.0 * k_tilde))
        schedule_out["direction"] = _need_int(
            "schedule", "direction", sch.get("direction", 1))
        if mode == "feedback":
            if "durations" in sch:
                raise ConfigError(
                    "schedule.durations applies to open-loop mode only")
            schedule_out["n_turns"] = _need_int(
                "schedule", "n_turns", sch.get("n_turns", 2))
            schedule_out["timeout"] = _need_number(
                "schedule", "timeout", sch.get("timeout", 30.0))
        else:
            if "durations" not in sch:
                raise ConfigError(
                    "missing required key schedule.durations for open-loop "
                    "mode")
            if "n_turns" in sch or "timeout" in sch:
                raise ConfigError(
                    "schedule.n_turns/timeout apply to feedback mode only")
            schedule_out["durations"] = _need_num_list(
                "schedule", "durations", sch["durations"])

    intg = dict(raw.get("integrator", {}))
    if "max_time" not in intg:
        raise ConfigError("missing required key integrator.max_time")
    method = _need_str("integrator", "method", intg.get("method", "dopri45"))
    if method not in ("dopri45", "rk4"):
        raise ConfigError(
            f"integrator.method must be 'dopri45' or 'rk4', got {method!r}")
    integrator_out = {
        "method": method,
        "abs_tol": _need_number("integrator", "abs_tol",
                                intg.get("abs_tol", 1e-10)),
        "rel_tol": _need_number("integrator", "rel_tol",
                                intg.get("rel_tol", 1e-10)),
        "dt": _need_number("integrator", "dt", intg.get("dt", 1e-3)),
        "max_time": _need_number("integrator", "max_time", intg["max_time"]),
    }

    out = dict(raw.get("output", {}))
    fmt = _need_str("output", "format", out.get("format", "csv"))
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(
            f"output.format must be 'csv' or 'jsonl', got {fmt!r}")
    output_out = {
        "sample_interval": _need_number("output", "sample_interval",
                                        out.get("sample_interval", 0.01)),
        "format": fmt,
        "path": _need_str("output", "path", out.get("path", "")),
        "report_path": _need_str("output", "report_path",
                                 out.get("report_path", "")),
    }

    return RunConfig(params=params_out, initial=initial_out,
                     schedule=schedule_out, integrator=integrator_out,
                     output=output_out)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize value {value!r}")


def serialize_config(config: RunConfig) -> str:
    """Canonical text form; parse_config(serialize_config(c)) == c."""
    lines = []
    for section in _SECTIONS:
        body = getattr(config, section)
        lines.append(f"[{section}]")
        for key, value in body.items():
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def config_hash(config: RunConfig) -> str:
    """sha256 of the canonical serialization."""
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()


def _build_params_dict(params_out: dict) -> ModelParams:
    kwargs = dict(n_wells=params_out["n_wells"],
                  n_total=float(params_out["n_total"]),
                  k_tilde=float(params_out["k_tilde"]),
                  e0=np.asarray(params_out.get("e0"), dtype=float)
                  if "e0" in params_out else None)
    if "lam" in params_out:
        kwargs["lam"] = float(params_out["lam"])
    else:
        kwargs["u"] = float(params_out["u"])
    return make_params(**kwargs)


def build_params(config: RunConfig) -> ModelParams:
    return _build_params_dict(config.params)


def build_initial(config: RunConfig, params: ModelParams):
    ini = config.initial
    if "preset" in ini:
        m = _PRESET_RE.match(ini["preset"])
        name = ini["preset"]
        if name == "uniform":
            return uniform_state(params)
        if name.startswith("winding"):
            return winding_state(params, int(m.group(2)))
        if name.startswith("single-well"):
            return single_well_state(params, float(m.group(3)))
        return seeded_state(params, float(m.group(4)))
    return from_polar(np.asarray(ini["populations"], dtype=float),
                      np.asarray(ini["phases"], dtype=float))


def build_schedule(config: RunConfig, params: ModelParams) -> CouplingSchedule:
    sch = config.schedule
    kind = sch["kind"]
    if kind == "constant":
        return constant_schedule(params.k_tilde, params.n_wells)
    if kind == "modulated":
        out = resonant_modulation(params, depth=float(sch["depth"]),
                                  w=float(sch["w"]), phi=float(sch["phi"]))
        if math.isfinite(sch["t_stop"]) and out.kind == "modulated":
            out = stop_modulation(out, float(sch["t_stop"]))
        return out
    if kind == "cut":
        base = constant_schedule(params.k_tilde, params.n_wells)
        return cut_link(base, int(sch["link"]) - 1, float(sch["t_cut"]))
    if kind == "bottleneck":
        base = constant_schedule(params.k_tilde, params.n_wells)
        return bottleneck(base, int(sch["link"]) - 1, float(sch["factor"]))
    direction = int(sch["direction"])
    start_link = 0 if direction == 1 else params.n_wells - 1
    if sch["mode"] == "feedback":
        return conveyor_schedule(
            params, float(sch["k_low"]), float(sch["k_high"]),
            mode="feedback",
            n_transfers=int(sch["n_turns"]) * params.n_wells,
            start_link=start_link, direction=direction,
            timeout=float(sch["timeout"]))
    return conveyor_schedule(
        params, float(sch["k_low"]), float(sch["k_high"]), mode="open-loop",
        durations=tuple(float(d) for d in sch["durations"]),
        start_link=start_link, direction=direction)


def build_options(config: RunConfig) -> IntegratorOptions:
    intg = config.integrator
    return IntegratorOptions(
        method=intg["method"], max_time=float(intg["max_time"]),
        sample_interval=float(config.output["sample_interval"]),
        abs_tol=float(intg["abs_tol"]), rel_tol=float(intg["rel_tol"]),
        dt=float(intg["dt"]))

"""Scenario files: INI-style sections, one per IoT type plus network, channel,
cost, energy and an optional ``[experiment]`` block of preset settings.

Densities are written per km², powers in dBm (``*_dbm``) or watts
(``*_w``), the SINR threshold in dB. Everything is converted to SI on load.
"""
from __future__ import annotations

import configparser
import copy
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ParseError, ValidationError
from .scenario import (
    KM2,
    ChannelModel,
    CostCoefficients,
    DeviceEnergyModel,
    IoTTypeSpec,
    NetworkConfig,
    NormalScattering,
    PathlossModel,
    Scenario,
    UniformScattering,
    db_to_linear,
    dbm_to_watts,
    validate,
)

_TYPE_RE = re.compile(r"^type\.(\d+)$")

_KEYS = {
    "scenario": {"seed"},
    "network": {"ap_density_km2", "system_bandwidth_hz", "code_count", "rejection_factor",
                "noise_density_dbm_hz", "ell_max"},
    "channel": {"pathloss_intercept_db", "pathloss_slope_db", "pathloss_ref_m",
                "alpha1", "alpha2", "delta", "nakagami_m", "nakagami_omega", "sinr_threshold_db"},
    "cost": {"c1", "c2", "c3", "ap_fixed_power_w", "ap_load_power_w", "area_km2"},
    "energy": {"battery_j", "startup_j", "control_j", "circuit_power_w", "amplifier_efficiency"},
    "type": {"parent_density_km2", "daughters", "scattering", "scattering_m", "reporting_period_s",
             "packet_time_s", "signal_bandwidth_hz", "replicas", "tx_power_dbm", "tx_power_w",
             "retx_bound", "served"},
    "experiment": {"type", "P_o_req", "target_success", "constraint", "W_min_hz", "W_max_hz",
                   "per_decade", "n_max", "P_max_w", "P_min_w", "step_db", "z_grid_m", "episodes",
                   "lambda_a_grid_km2", "sweep_path", "sweep_values", "scale_parameter",
                   "scale_values", "scale_P_max_w", "s_grid", "overlap_model", "solver"},
}

_REQUIRED = {
    "network": {"ap_density_km2", "system_bandwidth_hz", "noise_density_dbm_hz"},
    "channel": set(),
    "cost": {"c1", "c2", "c3", "ap_fixed_power_w", "ap_load_power_w", "area_km2"},
    "energy": {"battery_j", "startup_j", "control_j", "circuit_power_w", "amplifier_efficiency"},
    "type": {"parent_density_km2", "daughters", "scattering_m", "reporting_period_s", "packet_time_s",
             "signal_bandwidth_hz"},
}


@dataclass(frozen=True)
class ExperimentSettings:
    """Preset parameters; every field has a default so the section is optional."""

    type: int = 1
    P_o_req: float = 1e-2
    target_success: float | None = None
    constraint: str = "outage"
    W_min_hz: float = 10e3
    W_max_hz: float = 1e6
    per_decade: int = 64
    n_max: int = 8
    P_max_w: float = 0.126
    P_min_w: float | None = None
    step_db: float = 0.5
    z_grid_m: tuple = (100.0, 250.0, 500.0, 750.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0)
    episodes: int = 100_000
    lambda_a_grid_km2: tuple = (0.02, 0.03, 0.04, 0.055, 0.08, 0.11, 0.16, 0.22, 0.3, 0.4, 0.55, 0.8)
    sweep_path: str | None = None
    sweep_values: tuple = ()
    scale_parameter: str = "target_success"
    scale_values: tuple = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
    scale_P_max_w: float = 10.0
    s_grid: tuple = ()
    overlap_model: str = "fractional"
    solver: str = "bisection"


@dataclass
class ScenarioDocument:
    """Parsed file: the raw key table (for overrides), the scenario and the preset settings."""

    raw: dict
    lines: dict
    scenario: Scenario
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    source: str = "<string>"

    def with_override(self, path, value) -> "ScenarioDocument":
        """Copy with one ``section.key`` (or ``type.N.key``) replaced, rebuilt and validated."""
        section, key = split_path(path)
        if section not in self.raw:
            raise ParseError(f"unknown section in parameter path {path!r}", field=path)
        kind = _section_kind(section)
        if key not in _KEYS[kind]:
            raise ParseError(f"unknown key in parameter path {path!r}", field=path)
        raw = copy.deepcopy(self.raw)
        raw[section][key] = str(value)
        return _build(raw, self.lines, self.source)


def split_path(path):
    parts = path.split(".")
    if len(parts) == 3 and parts[0] == "type":
        return f"type.{parts[1]}", parts[2]
    if len(parts) == 2:
        return parts[0], parts[1]
    raise ParseError(f"parameter path must be section.key or type.N.key, got {path!r}", field=path)


def _section_kind(section):
    if _TYPE_RE.match(section):
        return "type"
    if section in _KEYS:
        return section
    return None


def _scan_lines(text):
    """(section, key) -> 1-based line number; configparser does not keep these."""
    out = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = no
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            out[(section, m.group(1).strip())] = no
    return out


def _parse_raw(text, source):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.DuplicateOptionError as e:
        raise ParseError(f"duplicate key {e.option!r} in [{e.section}]", line=e.lineno, field=e.option) from e
    except configparser.DuplicateSectionError as e:
        raise ParseError(f"duplicate section [{e.section}]", line=e.lineno) from e
    except configparser.MissingSectionHeaderError as e:
        raise ParseError("key outside any section", line=e.lineno) from e
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ParseError("malformed line", line=line) from e
    return {sec: dict(cp[sec]) for sec in cp.sections()}


def _number(raw, lines, section, key, kind=float, default=None):
    if key not in raw.get(section, {}):
        if default is not None:
            return default
        raise ParseError(f"missing required key [{section}] {key}", line=lines.get((section, None)), field=key)
    text = raw[section][key]
    try:
        if kind is int:
            val = float(text)
            if not val.is_integer():
                raise ValueError
            return int(val)
        if kind is bool:
            low = text.strip().lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        val = float(text)
        if not math.isfinite(val):
            raise ValueError
        return val
    except ValueError:
        raise ParseError(f"cannot read {text!r} as {kind.__name__}", line=lines.get((section, key)),
                         field=key) from None


def _floats(raw, lines, section, key):
    text = raw[section][key]
    try:
        return tuple(float(v) for v in re.split(r"[,\s]+", text.strip()) if v)
    except ValueError:
        raise ParseError(f"cannot read {text!r} as a list of numbers", line=lines.get((section, key)),
                         field=key) from None


def _check_keys(raw, lines):
    for section, keys in raw.items():
        kind = _section_kind(section)
        if kind is None:
            raise ParseError(f"unknown section [{section}]", line=lines.get((section, None)), field=section)
        for key in keys:
            if key not in _KEYS[kind]:
                raise ParseError(f"unknown key {key!r} in [{section}]", line=lines.get((section, key)), field=key)
        for key in _REQUIRED.get(kind, ()):
            if key not in keys:
                raise ParseError(f"missing required key {key!r} in [{section}]",
                                 line=lines.get((section, None)), field=key)
    for section in ("network", "cost", "energy"):
        if section not in raw:
            raise ParseError(f"missing section [{section}]", field=section)
    if not any(_TYPE_RE.match(s) for s in raw):
        raise ParseError("at least one [type.N] section is required", field="type")


def _pathloss(raw, lines):
    ch = raw.get("channel", {})
    law = {"pathloss_intercept_db", "pathloss_slope_db"}
    poly = {"alpha1", "alpha2", "delta"}
    if law & ch.keys() and poly & ch.keys():
        raise ParseError("give either the dB pathloss law or alpha1/alpha2/delta, not both",
                         line=lines.get(("channel", None)), field="channel")
    if poly & ch.keys():
        return PathlossModel(
            _number(raw, lines, "channel", "alpha1", default=0.0),
            _number(raw, lines, "channel", "alpha2"),
            _number(raw, lines, "channel", "delta"),
        )
    return PathlossModel.from_db_law(
        _number(raw, lines, "channel", "pathloss_intercept_db", default=133.0),
        _number(raw, lines, "channel", "pathloss_slope_db", default=38.3),
        _number(raw, lines, "channel", "pathloss_ref_m", default=1000.0),
    )


def _type(raw, lines, section, type_id):
    g = lambda key, kind=float, default=None: _number(raw, lines, section, key, kind, default)  # noqa: E731
    keys = raw[section]
    if "tx_power_dbm" in keys and "tx_power_w" in keys:
        raise ParseError("give tx_power_dbm or tx_power_w, not both", line=lines.get((section, "tx_power_w")),
                         field="tx_power_w")
    if "tx_power_w" in keys:
        power = g("tx_power_w")
    elif "tx_power_dbm" in keys:
        power = dbm_to_watts(g("tx_power_dbm"))
    else:
        raise ParseError(f"[{section}] needs tx_power_dbm or tx_power_w", line=lines.get((section, None)),
                         field="tx_power_dbm")
    shape = keys.get("scattering", "normal").strip().lower()
    if shape == "normal":
        scattering = NormalScattering(g("scattering_m"))
    elif shape == "uniform":
        scattering = UniformScattering(g("scattering_m"))
    else:
        raise ParseError(f"scattering must be normal or uniform, got {shape!r}",
                         line=lines.get((section, "scattering")), field="scattering")
    return IoTTypeSpec(
        id=type_id,
        parent_density=g("parent_density_km2") / KM2,
        daughters_per_parent=g("daughters"),
        scattering=scattering,
        reporting_period=g("reporting_period_s"),
        packet_time=g("packet_time_s"),
        signal_bandwidth=g("signal_bandwidth_hz"),
        replicas=g("replicas", int, 1),
        tx_power=power,
        retx_bound=g("retx_bound", int, 1),
        in_phi=g("served", bool, True),
    )


def _experiment(raw, lines):
    sec = "experiment"
    if sec not in raw:
        return ExperimentSettings()
    keys = raw[sec]
    kw = {}
    ints = {"type", "per_decade", "n_max", "episodes"}
    lists = {"z_grid_m", "lambda_a_grid_km2", "sweep_values", "scale_values", "s_grid"}
    strings = {"constraint", "sweep_path", "scale_parameter", "overlap_model", "solver"}
    for key in keys:
        if key in lists:
            kw[key] = _floats(raw, lines, sec, key)
        elif key in strings:
            kw[key] = keys[key].strip()
        else:
            kw[key] = _number(raw, lines, sec, key, int if key in ints else float)
    out = ExperimentSettings(**kw)
    if out.constraint not in ("outage", "cell_edge"):
        raise ParseError("constraint must be outage or cell_edge", line=lines.get((sec, "constraint")),
                         field="constraint")
    if out.overlap_model not in ("point", "fractional", "hard"):
        raise ParseError("overlap_model must be point, fractional or hard",
                         line=lines.get((sec, "overlap_model")), field="overlap_model")
    if out.solver not in ("bisection", "closed_form"):
        raise ParseError("solver must be bisection or closed_form", line=lines.get((sec, "solver")), field="solver")
    return out


def _build(raw, lines, source) -> ScenarioDocument:
    _check_keys(raw, lines)
    channel = ChannelModel(
        pathloss=_pathloss(raw, lines),
        nakagami_m=_number(raw, lines, "channel", "nakagami_m", int, 1),
        nakagami_omega=_number(raw, lines, "channel", "nakagami_omega", float, 1.0),
        sinr_threshold=db_to_linear(_number(raw, lines, "channel", "sinr_threshold_db", float, 0.0)),
    )
    network = NetworkConfig(
        ap_density=_number(raw, lines, "network", "ap_density_km2") / KM2,
        system_bandwidth=_number(raw, lines, "network", "system_bandwidth_hz"),
        code_count=_number(raw, lines, "network", "code_count", int, 1),
        rejection_factor=_number(raw, lines, "network", "rejection_factor", float, 0.0),
        noise_density=dbm_to_watts(_number(raw, lines, "network", "noise_density_dbm_hz")),
        channel=channel,
        ell_max=_number(raw, lines, "network", "ell_max", int, 1),
    )
    g = lambda sec, key: _number(raw, lines, sec, key)  # noqa: E731
    cost = CostCoefficients(g("cost", "c1"), g("cost", "c2"), g("cost", "c3"), g("cost", "ap_fixed_power_w"),
                            g("cost", "ap_load_power_w"), g("cost", "area_km2") * KM2)
    energy = DeviceEnergyModel(g("energy", "battery_j"), g("energy", "startup_j"), g("energy", "control_j"),
                               g("energy", "circuit_power_w"), g("energy", "amplifier_efficiency"))
    types = []
    for section in sorted((s for s in raw if _TYPE_RE.match(s)), key=lambda s: int(_TYPE_RE.match(s).group(1))):
        types.append(_type(raw, lines, section, int(_TYPE_RE.match(section).group(1))))
    seed = _number(raw, lines, "scenario", "seed", int, 0) if "scenario" in raw else 0
    scenario = Scenario(tuple(types), network, cost, energy, seed)
    report = validate(scenario)
    if not report.ok:
        raise ValidationError(report)
    return ScenarioDocument(raw, lines, scenario, _experiment(raw, lines), source)


def parse_document(text, source="<string>") -> ScenarioDocument:
    if not text.strip():
        raise ParseError("scenario file is empty", line=1)
    lines = _scan_lines(text)
    return _build(_parse_raw(text, source), lines, source)


def load_document(path) -> ScenarioDocument:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}") from e
    return parse_document(text, str(path))


def load_scenario(path) -> Scenario:
    """Parsed, unit-converted and validated scenario from a file."""
    return load_document(path).scenario


def builtin_path(name):
    """Path of a scenario file shipped with the package, e.g. ``"reference"``."""
    return resources.files("lpwa_plan") / "data" / f"{name}.scenario"


def builtin_names():
    return sorted(p.name[: -len(".scenario")] for p in (resources.files("lpwa_plan") / "data").iterdir()
                  if p.name.endswith(".scenario"))

"""Declarative run configuration: YAML schema, validation, construction.

Configs carry ordinary frequencies in GHz, times in ns and temperatures
in K; unit conversion to angular rates happens in the model builders,
never here. Validation produces a full report of violations with line
anchors into the source file where the YAML parser can supply them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from .siv_models import (
    CavityParams,
    DriveParams,
    GatePulse,
    SivParams,
    WaveguideParams,
)

__all__ = ["ScenarioConfig", "ConfigError", "load_config", "validate_config",
           "SCENARIOS", "SCHEMA"]

SCENARIOS = ("spectrum", "saturation", "switch", "correlations", "raman",
             "entangle", "custom")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

_DRIVE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "probe_freq": _NUM,
        "probe_flux": _NONNEG,
        "gate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "target": {"enum": ["u", "c"]},
                "duration": _POS,
                "strength": _POS,
            },
            "required": ["target"],
        },
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario"],
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "siv": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma": _NONNEG,
                "orbital_splitting": _NUM,
                "tau0": _POS,
                "temperature": _POS,
                "branching_ce": {"type": "number", "exclusiveMinimum": 0,
                                 "maximum": 1},
                "dephasing": _NONNEG,
                "nonradiative": {"type": "number", "minimum": 0,
                                 "exclusiveMaximum": 1},
            },
        },
        "siv2": {"$ref": "#/properties/siv"},
        "cavity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "g": _NONNEG,
                "kappa": _NONNEG,
                "kappa_wg_fraction": {"type": "number", "minimum": 0,
                                      "maximum": 1},
                "detuning_cavity": _NUM,
                "fock_cutoff": {"type": "integer", "minimum": 2},
            },
        },
        "drive": _DRIVE_SCHEMA,
        "waveguide": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma_1d": _NONNEG,
                "phase_phi": _NUM,
                "delta_rel": _NUM,
                "delta_sigma": _NONNEG,
                "collection_efficiency": {"type": "number", "minimum": 0,
                                          "maximum": 1},
                "drive1": _DRIVE_SCHEMA,
                "drive2": _DRIVE_SCHEMA,
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "variable": {"type": "string"},
                "start": _NUM,
                "stop": _NUM,
                "num": {"type": "integer", "minimum": 2},
                "grid": {"type": "array", "items": _NUM, "minItems": 1},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rtol": _POS,
                "n_traj": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "workers": {"type": "integer", "minimum": 1},
                "duration": _POS,
                "bin_width": _POS,
                "max_tau": _POS,
                "filter_fwhm": _NONNEG,
                "t_max": _POS,
                "t_points": {"type": "integer", "minimum": 2},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv"]}},
            },
        },
    },
}

_SOLVER_DEFAULTS = {"rtol": 1e-8, "n_traj": 0, "seed": 1234, "workers": 1,
                    "duration": 60.0, "bin_width": 0.2, "max_tau": 30.0,
                    "filter_fwhm": 0.0, "t_max": 50.0, "t_points": 101}


class ConfigError(ValueError):
    """Schema or invariant violations; ``report`` lists all of them."""

    def __init__(self, report: list[str]):
        super().__init__("\n".join(report))
        self.report = report


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    siv: SivParams
    siv2: SivParams | None
    cavity: CavityParams
    drive: DriveParams
    waveguide: WaveguideParams
    delta_sigma: float | None
    sweep: dict
    solver: dict
    output: dict
    raw: dict = field(repr=False)


def _line_map(text: str) -> dict[str, int]:
    """Map dotted config paths to 1-based line numbers."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    table: dict[str, int] = {}

    def walk(node, path):
        table[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                walk(value, f"{path}.{key.value}" if path else key.value)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                walk(item, f"{path}[{i}]")

    walk(root, "")
    return table


def _make_drive(d: dict | None, default_flux: float = 1e-4) -> DriveParams:
    d = dict(d or {})
    gate = d.pop("gate", None)
    return DriveParams(
        probe_freq=d.get("probe_freq", 0.0),
        probe_flux=d.get("probe_flux", default_flux),
        gate=GatePulse(**gate) if gate else None,
    )


def validate_config(path_or_dict) -> list[str]:
    """Full list of schema and invariant violations; empty when valid."""
    if isinstance(path_or_dict, (str, Path)):
        try:
            text = Path(path_or_dict).read_text()
        except OSError as exc:
            return [f"cannot read config: {exc}"]
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            return [f"YAML parse error: {exc}"]
        lines = _line_map(text)
    else:
        data = path_or_dict
        lines = {}
    if not isinstance(data, dict):
        return ["config must be a mapping"]

    report = []
    validator = jsonschema.Draft202012Validator(SCHEMA)
    for err in sorted(validator.iter_errors(data), key=lambda e: list(e.path)):
        path = ".".join(str(p) for p in err.absolute_path)
        anchor = f" (line {lines[path]})" if path in lines else ""
        where = path or "<root>"
        report.append(f"{where}{anchor}: {err.message}")
    if report:
        return report

    # invariant layer: construct the parameter records, which raise with
    # the invariant spelled out
    for section, ctor in (("siv", SivParams), ("siv2", SivParams),
                          ("cavity", CavityParams)):
        if section in data and data[section] is not None:
            try:
                ctor(**data[section])
            except (TypeError, ValueError) as exc:
                anchor = f" (line {lines[section]})" if section in lines else ""
                report.append(f"{section}{anchor}: {exc}")
    for section in ("drive",):
        if section in data and data[section] is not None:
            try:
                _make_drive(data[section])
            except (TypeError, ValueError) as exc:
                report.append(f"{section}: {exc}")
    if "waveguide" in data and data["waveguide"] is not None:
        wgd = dict(data["waveguide"])
        wgd.pop("delta_sigma", None)
        try:
            WaveguideParams(
                **{k: v for k, v in wgd.items() if k not in ("drive1", "drive2")},
                drive1=_make_drive(wgd.get("drive1"), default_flux=0.05),
                drive2=_make_drive(wgd["drive2"]) if wgd.get("drive2") else None)
        except (TypeError, ValueError) as exc:
            report.append(f"waveguide: {exc}")

    scenario = data.get("scenario")
    solver = {**_SOLVER_DEFAULTS, **(data.get("solver") or {})}
    if scenario == "correlations" and solver["n_traj"] < 1:
        report.append("solver.n_traj: correlations scenario requires n_traj >= 1")
    if solver["n_traj"] > 0 and "seed" not in (data.get("solver") or {}):
        report.append("solver.seed: a seed is required whenever trajectories "
                      "are requested")
    if scenario in ("spectrum", "saturation") and "sweep" not in data:
        report.append(f"sweep: scenario {scenario!r} requires a sweep block")
    if "sweep" in data and data["sweep"] is not None:
        sw = data["sweep"]
        if "grid" not in sw and not {"start", "stop", "num"} <= set(sw):
            report.append("sweep: give either grid or start/stop/num")
    return report


def load_config(path) -> ScenarioConfig:
    """Validate and materialize a config; raises ConfigError on problems."""
    report = validate_config(path)
    if report:
        raise ConfigError(report)
    data = yaml.safe_load(Path(path).read_text()) if isinstance(path, (str, Path)) \
        else path

    wgd = dict(data.get("waveguide") or {})
    delta_sigma = wgd.pop("delta_sigma", None)
    waveguide = WaveguideParams(
        **{k: v for k, v in wgd.items() if k not in ("drive1", "drive2")},
        drive1=_make_drive(wgd.get("drive1") or {"probe_freq": 2.0,
                                                 "probe_flux": 0.05}),
        drive2=_make_drive(wgd["drive2"]) if wgd.get("drive2") else None)

    sweep = dict(data.get("sweep") or {})
    if sweep and "grid" not in sweep:
        import numpy as np
        sweep["grid"] = np.linspace(sweep["start"], sweep["stop"],
                                    sweep["num"]).tolist()

    return ScenarioConfig(
        scenario=data["scenario"],
        siv=SivParams(**(data.get("siv") or {})),
        siv2=SivParams(**data["siv2"]) if data.get("siv2") else None,
        cavity=CavityParams(**(data.get("cavity") or {})),
        drive=_make_drive(data.get("drive")),
        waveguide=waveguide,
        delta_sigma=delta_sigma,
        sweep=sweep,
        solver={**_SOLVER_DEFAULTS, **(data.get("solver") or {})},
        output={"directory": "out", "formats": ["csv"],
                **(data.get("output") or {})},
        raw=data,
    )

"""Scenario files: parsing, validation, defaults and run manifests.

A scenario is a sectioned key-value text file (# or ; comments):

    [terrain]
    seed = 42
    sigma = 0.03

    [run]
    strategy = proposed

Every key has a documented default; the resolved configuration (file values
plus defaults) is echoed into the run manifest so a run can be reproduced
bitwise from the manifest alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ScenarioParseError, ScenarioValidationError
from .gait import GaitConfig
from .motion import LrstConfig, MdConfig
from .sim import ContactModel, SimConfig

DEFAULTS: dict[str, dict[str, float | str | None]] = {
    "robot": {"model": "quadruped"},
    "terrain": {
        "seed": 42,
        "sigma": 0.03,
        "extent_x": 2.2,
        "extent_y": 1.6,
        "resolution": 0.04,
        "origin_x": -0.7,
        "origin_y": -0.8,
    },
    "gait": {
        "swing_period": 1.75,
        "stride": 0.08,
        "step_height": 0.04,
        "stance_height": 0.11,
        "clearance_margin": 0.02,
        "release_time": 0.0,
        "grasp_time": 0.0,
        "heading_deg": 0.0,
        "cycles": 5,
    },
    "lrst": {
        "c1": 7.0,
        "c2": 1.75,
        "c3": 30.0,
        "samples": 32,
        "restarts": 2,
        "max_iter": 150,
        "tolerance": 1e-8,
    },
    "md": {"w_min": 1.2e-3, "w_max": 2.5e-3, "alpha": None},
    "contact": {"stiffness": 4000.0, "damping": 1.0, "hold_force": 0.9},
    "sim": {
        "gravity_g": 1e-6,
        "step": 0.002,
        "servo_frequency": 7.0,
        "duration": None,
    },
    "run": {"strategy": "proposed", "start_x": 0.0, "start_y": 0.0},
}

_STR_KEYS = {("robot", "model"), ("run", "strategy")}
_INT_KEYS = {("terrain", "seed"), ("gait", "cycles"), ("lrst", "samples"),
             ("lrst", "restarts"), ("lrst", "max_iter")}
_OPTIONAL_KEYS = {("md", "alpha"), ("sim", "duration")}


@dataclass
class Scenario:
    """Fully resolved run description."""

    values: dict[str, dict]
    defaulted: list[str] = field(default_factory=list)
    source: str = "<defaults>"

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def strategy(self) -> str:
        return self.values["run"]["strategy"]

    @property
    def n_limbs(self) -> int:
        return 4 if self.values["robot"]["model"] == "quadruped" else 2

    @property
    def total_period(self) -> float:
        return 2.0 * self.n_limbs * self.values["gait"]["swing_period"]

    @property
    def cycles(self) -> int:
        dur = self.values["sim"]["duration"]
        if dur is None:
            return int(self.values["gait"]["cycles"])
        return max(1, int(round(dur / self.total_period)))

    def gait_config(self) -> GaitConfig:
        g = self.values["gait"]
        return GaitConfig(
            n_limbs=self.n_limbs,
            swing_period=g["swing_period"],
            stride=g["stride"],
            step_height=g["step_height"],
            stance_height=g["stance_height"],
            clearance_margin=g["clearance_margin"],
            release_time=g["release_time"],
            grasp_time=g["grasp_time"],
            heading=np.deg2rad(g["heading_deg"]),
        )

    def lrst_config(self) -> LrstConfig:
        c = self.values["lrst"]
        return LrstConfig(
            c1=c["c1"], c2=c["c2"], c3=c["c3"],
            step_height=self.values["gait"]["step_height"],
            n_samples=int(c["samples"]), restarts=int(c["restarts"]),
            max_iter=int(c["max_iter"]), tolerance=c["tolerance"],
        )

    def md_config(self) -> MdConfig:
        m = self.values["md"]
        return MdConfig(w_min=m["w_min"], w_max=m["w_max"], fixed_alpha=m["alpha"])

    def contact_model(self) -> ContactModel:
        c = self.values["contact"]
        return ContactModel(
            stiffness=c["stiffness"], damping=c["damping"], hold_force=c["hold_force"]
        )

    def sim_config(self) -> SimConfig:
        s = self.values["sim"]
        return SimConfig(
            gravity_g=s["gravity_g"], step=s["step"], servo_frequency=s["servo_frequency"]
        )

    def manifest(self) -> str:
        lines = ["# microclimb run manifest v1", f"# source: {self.source}"]
        if self.defaulted:
            lines.append("# defaulted keys: " + " ".join(sorted(self.defaulted)))
        for section in sorted(self.values):
            lines.append(f"[{section}]")
            for key in sorted(self.values[section]):
                val = self.values[section][key]
                lines.append(f"{key} = {val if val is not None else ''}")
        return "\n".join(lines) + "\n"


def _parse_sections(text: str, source: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ScenarioParseError(f"{source}:{lineno}: malformed section header {raw!r}")
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ScenarioParseError(
                f"{source}:{lineno}: expected 'key = value', got {raw!r}"
            )
        if current is None:
            raise ScenarioParseError(f"{source}:{lineno}: key outside any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ScenarioParseError(f"{source}:{lineno}: empty key")
        sections[current][key.lower()] = (value, lineno)
    return sections


def _convert(section: str, key: str, raw: str, lineno: int, source: str):
    if (section, key) in _STR_KEYS:
        return raw.lower()
    if raw == "" and (section, key) in _OPTIONAL_KEYS:
        return None
    try:
        if (section, key) in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ScenarioParseError(
            f"{source}:{lineno}: key '{section}.{key}' has malformed numeric value {raw!r}"
        ) from exc


def _validate(values: dict[str, dict]) -> None:
    def need(cond: bool, key: str, reason: str):
        if not cond:
            raise ScenarioValidationError(key, reason)

    need(values["robot"]["model"] in ("quadruped", "planar"), "robot.model",
         "must be 'quadruped' or 'planar'")
    need(values["run"]["strategy"] in ("baseline", "proposed"), "run.strategy",
         "must be 'baseline' or 'proposed'")
    t = values["terrain"]
    need(t["resolution"] > 0, "terrain.resolution", "must be > 0")
    need(t["extent_x"] > 0 and t["extent_y"] > 0, "terrain.extent_x", "extents must be > 0")
    need(t["sigma"] >= 0, "terrain.sigma", "must be >= 0")
    g = values["gait"]
    need(g["swing_period"] > 0, "gait.swing_period", "must be > 0")
    need(g["stride"] >= 0, "gait.stride", "must be >= 0")
    need(g["step_height"] > 0, "gait.step_height", "must be > 0")
    need(g["cycles"] >= 0, "gait.cycles", "must be >= 0")
    need(
        g["release_time"] + 1e-12 < g["swing_period"],
        "gait.release_time", "must be smaller than the swing period",
    )
    need(
        g["grasp_time"] + 1e-12 < g["swing_period"],
        "gait.grasp_time", "must be smaller than the swing period",
    )
    c = values["lrst"]
    need(min(c["c1"], c["c2"], c["c3"]) >= 0, "lrst.c1", "weights must be >= 0")
    need(c["samples"] >= 16, "lrst.samples", "need at least 16 samples")
    m = values["md"]
    need(m["w_min"] < m["w_max"], "md.w_min", "must be < md.w_max")
    if m["alpha"] is not None:
        need(0.0 <= m["alpha"] <= 1.0, "md.alpha", "must lie in [0, 1]")
    k = values["contact"]
    need(k["stiffness"] > 0, "contact.stiffness", "must be > 0")
    need(k["damping"] >= 0, "contact.damping", "must be >= 0")
    need(k["hold_force"] > 0, "contact.hold_force", "must be > 0")
    s = values["sim"]
    need(s["gravity_g"] >= 0, "sim.gravity_g", "must be >= 0")
    need(s["step"] > 0, "sim.step", "must be > 0")
    need(s["servo_frequency"] > 0, "sim.servo_frequency", "must be > 0")
    if s["duration"] is not None:
        need(s["duration"] > 0, "sim.duration", "must be > 0")


def load_scenario(path) -> Scenario:
    """Parse, validate and default-resolve a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    parsed = _parse_sections(text, str(path))

    values: dict[str, dict] = {}
    defaulted: list[str] = []
    for section, keys in DEFAULTS.items():
        values[section] = {}
        file_keys = parsed.get(section, {})
        for key, default in keys.items():
            if key in file_keys:
                raw, lineno = file_keys[key]
                values[section][key] = _convert(section, key, raw, lineno, str(path))
            else:
                values[section][key] = default
                defaulted.append(f"{section}.{key}")
    for section in parsed:
        if section not in DEFAULTS:
            raise ScenarioValidationError(section, "unknown section")
        for key in parsed[section]:
            if key not in DEFAULTS[section]:
                raise ScenarioValidationError(f"{section}.{key}", "unknown key")
    _validate(values)
    return Scenario(values=values, defaulted=defaulted, source=str(path))


def builtin_scenario_path(name: str):
    """Path of one of the shipped canonical scenario files."""
    from importlib.resources import files

    candidate = files("microclimb").joinpath("scenarios", f"{name}.ini")
    if not candidate.is_file():
        raise ScenarioValidationError("scenario", f"no builtin scenario named {name!r}")
    return candidate

"""
Run configuration: sectioned `key = value` text.

    # comment
    [model]
    hbar = 0.1
    D = 1e-3
    [run]
    output_dir = runs/d1e-3

Functions:
    parse_config(text)  -> RunConfig (raises ConfigError listing every issue)
    dump_config(config) -> canonical text, floats at 17 significant digits
    config_hash(config) -> sha256 of the canonical text
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field as dc_field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from logic.grid import GridError, PhaseSpaceGrid, make_grid
from logic.model import ModelError, ModelParams
from logic.states import GaussianSpec, StateError, check_admissible, check_uncertainty

# "[model]"
SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]\w*)\s*\]$")
# "key = value", value may be empty
ENTRY_RE = re.compile(r"^([A-Za-z_]\w*)\s*=\s*(.*)$")

MODES = ("quantum", "classical", "both")
INITIAL_KINDS = ("cat", "gaussian")
DEFAULT_PERIODS = 149

# section -> key -> (kind, default); None means unset
SCHEMA: Dict[str, Dict[str, Tuple[str, Any]]] = {
    "model": {
        "m": ("float", 1.0),
        "hbar": ("float", 0.1),
        "D": ("float", None),  # 1e-3 unless k_meas fixes it
        "k_meas": ("float", None),
        "A": ("float", 10.0),
        "B": ("float", 0.5),
        "Lambda": ("float", 10.0),
        "omega": ("float", 6.07),
        "lambda_bar": ("float", 0.57),
        "area": ("float", 270.0),
        "u0_sq": ("float", None),
    },
    "grid": {
        "nq": ("int", 512),
        "np": ("int", 512),
        "q_min": ("float", -8.0),
        "q_max": ("float", 8.0),
        "p_min": ("float", -17.0),
        "p_max": ("float", 17.0),
    },
    "initial": {
        "kind": ("str", "cat"),
        "q_a": ("float", -1.0),
        "p_a": ("float", 0.0),
        "q_b": ("float", 1.0),
        "p_b": ("float", 0.0),
        "sigma_q": ("float", None),
        "sigma_p": ("float", None),
    },
    "run": {
        "mode": ("str", "both"),
        "dt": ("float", 1e-3),
        "t_end": ("float", None),
        "t_end_periods": ("float", None),
        "checkpoint_every": ("float", None),
        "checkpoint_times": ("floats", None),
        "diagnostics_every": ("int", 100),
        "margin_fraction": ("float", 0.1),
        "threshold": ("float", None),
        "output_dir": ("str", None),
        "seed": ("int", 0),
    },
    "langevin": {
        "n": ("int", 100_000),
        "dt": ("float", 1e-3),
        "t_end": ("float", 1.0),
        "sample_every": ("int", 100),
        "q0": ("float", 0.0),
        "p0": ("float", 0.0),
        "linearized": ("bool", False),
        "dump_trajectories": ("bool", False),
        "lyapunov_t": ("float", 200.0),
        "lyapunov_n": ("int", 200),
        "lyapunov_dt": ("float", 1e-3),
        "lyapunov_spread": ("float", 1.0),
        "lyapunov_transient": ("float", 20.0),
    },
    "manifold": {
        "t_max": ("float", None),  # three drive periods
        "resolution": ("float", 1e-2),
        "epsilon": ("float", None),
        "steps_per_period": ("int", 1000),
        "max_vertices": ("int", 200_000),
    },
}

REQUIRED = {("run", "output_dir")}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclass(frozen=True)
class ConfigIssue:
    line: Optional[int]
    key: str
    message: str

    def __str__(self):
        where = f"line {self.line}" if self.line is not None else "config"
        return f"{where}: {self.key}: {self.message}"


class ConfigError(ValueError):
    """Every problem found in one config text."""

    def __init__(self, issues: List[ConfigIssue]):
        self.issues = list(issues)
        super().__init__("\n".join(str(i) for i in self.issues))


def _convert(kind: str, raw: str):
    raw = raw.strip()
    if kind == "str":
        if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
            raw = raw[1:-1]
        if not raw:
            raise ValueError("empty string")
        return raw
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "floats":
        parts = [s for s in (x.strip() for x in raw.split(",")) if s]
        if not parts:
            raise ValueError("empty list")
        return tuple(float(s) for s in parts)
    raise ValueError(f"unknown kind {kind}")


def _format(kind: str, value) -> str:
    if kind == "float":
        return format(value, ".17g")
    if kind == "floats":
        return ", ".join(format(v, ".17g") for v in value)
    if kind == "bool":
        return "true" if value else "false"
    return str(value)


@dataclass
class RunConfig:
    """
    Typed values per section plus the line each key was read from.
    Derived objects (params, grid, initial specs, schedule) are built on
    demand; parse_config has already checked that they build.
    """

    values: Dict[str, Dict[str, Any]]
    lines: Dict[Tuple[str, str], int] = dc_field(default_factory=dict, compare=False)

    def get(self, section: str, key: str):
        return self.values[section][key]

    def replace(self, section: str, **changes) -> "RunConfig":
        values = {s: dict(v) for s, v in self.values.items()}
        for key, value in changes.items():
            if key not in SCHEMA[section]:
                raise KeyError(f"[{section}] {key}")
            values[section][key] = value
        return RunConfig(values, dict(self.lines))

    # Derived objects

    @property
    def params(self) -> ModelParams:
        v = self.values["model"]
        D = v["D"]
        if D is None:
            D = v["hbar"] ** 2 * v["k_meas"] if v["k_meas"] is not None else 1e-3
        return ModelParams(m=v["m"], hbar=v["hbar"], D=D, A_coef=v["A"], B_coef=v["B"],
                           Lambda=v["Lambda"], omega=v["omega"], lambda_bar=v["lambda_bar"],
                           area=v["area"], u0_sq=v["u0_sq"], k_meas=v["k_meas"])

    @property
    def grid(self) -> PhaseSpaceGrid:
        v = self.values["grid"]
        return make_grid(v["nq"], v["np"], (v["q_min"], v["q_max"]), (v["p_min"], v["p_max"]))

    @property
    def modes(self) -> Tuple[str, ...]:
        mode = self.values["run"]["mode"]
        return ("quantum", "classical") if mode == "both" else (mode,)

    @property
    def dt(self) -> float:
        return self.values["run"]["dt"]

    @property
    def t_end(self) -> float:
        run = self.values["run"]
        if run["t_end"] is not None:
            return run["t_end"]
        periods = run["t_end_periods"] if run["t_end_periods"] is not None else DEFAULT_PERIODS
        return periods * self.params.drive_period

    @property
    def output_dir(self) -> str:
        return self.values["run"]["output_dir"]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    def checkpoint_schedule(self) -> List[float]:
        """Explicit times, or every `checkpoint_every` (one drive period by default), always ending at t_end."""
        run = self.values["run"]
        t_end = self.t_end
        if run["checkpoint_times"] is not None:
            times = sorted(t for t in run["checkpoint_times"] if 0.0 <= t <= t_end)
        else:
            every = run["checkpoint_every"] or self.params.drive_period
            count = int(math.floor(t_end / every + 1e-9))
            times = list(every * np.arange(1, count + 1))
        if not times or not math.isclose(times[-1], t_end, rel_tol=1e-12, abs_tol=1e-12):
            times.append(t_end)
        return [float(t) for t in times]

    def initial_specs(self) -> List[GaussianSpec]:
        v = self.values["initial"]
        hbar = self.values["model"]["hbar"]
        sq = v["sigma_q"] if v["sigma_q"] is not None else math.sqrt(hbar / 2.0)
        sp = v["sigma_p"] if v["sigma_p"] is not None else math.sqrt(hbar / 2.0)
        specs = [GaussianSpec((v["q_a"], v["p_a"]), (sq, sp))]
        if v["kind"] == "cat":
            specs.append(GaussianSpec((v["q_b"], v["p_b"]), (sq, sp)))
        return specs

    @property
    def t_max_manifold(self) -> float:
        t_max = self.values["manifold"]["t_max"]
        return 3.0 * self.params.drive_period if t_max is None else t_max


def _defaults() -> Dict[str, Dict[str, Any]]:
    return {section: {key: default for key, (_, default) in keys.items()}
            for section, keys in SCHEMA.items()}


def _constraint_issues(config: RunConfig) -> List[ConfigIssue]:
    """Physical and range checks on a config whose values all parsed."""
    issues: List[ConfigIssue] = []

    def flag(section: str, key: str, message: str):
        issues.append(ConfigIssue(config.lines.get((section, key)), f"{section}.{key}", message))

    try:
        params = config.params
    except ModelError as err:
        params = None
        for problem in str(err).split("; "):
            name = re.match(r"^(\w+)", problem).group(1)
            name = {"A_coef": "A", "B_coef": "B"}.get(name, name)
            flag("model", name if name in SCHEMA["model"] else "D", problem)

    grid = None
    try:
        grid = config.grid
    except GridError as err:
        for problem in str(err).split("; "):
            key = "nq" if problem.startswith("nq") else "np" if problem.startswith("np") else (
                "q_max" if problem.startswith("q") else "p_max")
            flag("grid", key, problem)

    run = config.values["run"]
    if run["mode"] not in MODES:
        flag("run", "mode", f"must be one of {', '.join(MODES)}")
    if not run["dt"] > 0:
        flag("run", "dt", "must be > 0")
    if run["t_end"] is not None and run["t_end_periods"] is not None:
        flag("run", "t_end_periods", "t_end and t_end_periods are mutually exclusive")
    for key in ("t_end", "t_end_periods", "checkpoint_every"):
        if run[key] is not None and not run[key] > 0:
            flag("run", key, "must be > 0")
    if run["checkpoint_times"] is not None and any(t < 0 for t in run["checkpoint_times"]):
        flag("run", "checkpoint_times", "times must be >= 0")
    if run["diagnostics_every"] < 1:
        flag("run", "diagnostics_every", "must be >= 1")
    if not 0.0 < run["margin_fraction"] < 0.5:
        flag("run", "margin_fraction", "must lie in (0, 0.5)")
    if run["threshold"] is not None and not run["threshold"] > 0:
        flag("run", "threshold", "must be > 0")
    if params is not None and run["mode"] in ("quantum", "both") and not params.hbar > 0:
        flag("model", "hbar", "quantum mode needs hbar > 0")

    init = config.values["initial"]
    if init["kind"] not in INITIAL_KINDS:
        flag("initial", "kind", f"must be one of {', '.join(INITIAL_KINDS)}")
    widths_ok = True
    for key in ("sigma_q", "sigma_p"):
        if init[key] is not None and not init[key] > 0:
            flag("initial", key, "must be > 0")
            widths_ok = False
    if init["kind"] in INITIAL_KINDS and grid is not None and params is not None:
        hbar = params.hbar
        if hbar == 0:
            if init["kind"] == "cat":
                flag("initial", "kind", "a cat state needs hbar > 0")
            for key in ("sigma_q", "sigma_p"):
                if init[key] is None:
                    flag("initial", key, "must be set when hbar = 0")
                    widths_ok = False
        if widths_ok:
            try:
                specs = config.initial_specs()
                for spec in specs:
                    check_admissible(spec, grid)
            except StateError as err:
                flag("initial", "q_a", str(err))
            else:
                if hbar > 0 and run["mode"] in ("quantum", "both"):
                    try:
                        check_uncertainty(specs[0], hbar)
                    except StateError as err:
                        flag("initial", "sigma_q", str(err))
                if hbar > 0 and init["kind"] == "cat" and not specs[0].is_minimum_uncertainty(hbar):
                    flag("initial", "sigma_p", "a cat state needs sigma_q * sigma_p = hbar/2")

    lang = config.values["langevin"]
    for key in ("n", "sample_every", "lyapunov_n"):
        if lang[key] < 1:
            flag("langevin", key, "must be >= 1")
    for key in ("dt", "t_end", "lyapunov_t", "lyapunov_dt", "lyapunov_spread"):
        if not lang[key] > 0:
            flag("langevin", key, "must be > 0")
    if not 0 <= lang["lyapunov_transient"] < lang["lyapunov_t"]:
        flag("langevin", "lyapunov_transient", "must lie in [0, lyapunov_t)")

    man = config.values["manifold"]
    if man["t_max"] is not None and man["t_max"] < 0:
        flag("manifold", "t_max", "must be >= 0")
    for key in ("resolution", "epsilon"):
        if man[key] is not None and not man[key] > 0:
            flag("manifold", key, "must be > 0")
    for key in ("steps_per_period", "max_vertices"):
        if man[key] < 1:
            flag("manifold", key, "must be >= 1")

    return issues


def parse_config(text: str) -> RunConfig:
    values = _defaults()
    lines: Dict[Tuple[str, str], int] = {}
    issues: List[ConfigIssue] = []
    section: Optional[str] = None

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue

        match = SECTION_RE.match(line)
        if match:
            section = match.group(1)
            if section not in SCHEMA:
                issues.append(ConfigIssue(lineno, f"[{section}]", "unknown section"))
            continue

        match = ENTRY_RE.match(line)
        if not match:
            issues.append(ConfigIssue(lineno, line, "expected 'key = value' or '[section]'"))
            continue
        key, raw = match.group(1), match.group(2)
        if section is None:
            issues.append(ConfigIssue(lineno, key, "key outside any section"))
            continue
        if section not in SCHEMA:
            continue
        if key not in SCHEMA[section]:
            issues.append(ConfigIssue(lineno, f"{section}.{key}", "unknown key"))
            continue
        if (section, key) in lines:
            issues.append(ConfigIssue(lineno, f"{section}.{key}",
                                      f"duplicate key (first set on line {lines[(section, key)]})"))
            continue

        kind = SCHEMA[section][key][0]
        try:
            values[section][key] = _convert(kind, raw)
        except ValueError as err:
            issues.append(ConfigIssue(lineno, f"{section}.{key}", f"expected {kind}: {err}"))
            continue
        lines[(section, key)] = lineno

    for section, key in sorted(REQUIRED):
        if values[section][key] is None:
            issues.append(ConfigIssue(None, f"{section}.{key}", "missing required key"))

    config = RunConfig(values, lines)
    # keys that failed to parse keep their defaults, so constraints still apply
    issues += _constraint_issues(config)
    if issues:
        raise ConfigError(issues)
    return config


def dump_config(config: RunConfig) -> str:
    """Canonical text; unset optional keys are left out so they stay unset on re-parse."""
    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for key, (kind, _) in keys.items():
            value = config.values[section][key]
            if value is not None:
                out.append(f"{key} = {_format(kind, value)}")
        out.append("")
    return "\n".join(out)


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()

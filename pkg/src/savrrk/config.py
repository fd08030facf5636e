"""Run-configuration files: strict INI parsing with typed sections.

Unknown sections or keys are rejected outright (a silently ignored typo in
``epsilon`` or ``tau`` would destroy an experiment), every value is range
checked, and each failure class carries its own process exit code:

    2  missing file        3  syntax error
    4  unknown section/key 5  invalid or out-of-range value
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import BUILTIN_POTENTIALS, OPERATORS, ALLEN_CAHN
from .integrator import MODES, RT
from .presets import INITIAL_CONDITIONS, ExperimentPreset
from .tableau import BUILTIN_TABLEAUX


class ConfigError(Exception):
    exit_code = 5


class ConfigMissingFileError(ConfigError):
    exit_code = 2


class ConfigSyntaxError(ConfigError):
    exit_code = 3


class ConfigUnknownKeyError(ConfigError):
    exit_code = 4


class ConfigValueError(ConfigError):
    exit_code = 5


@dataclass
class RunConfig:
    """Validated contents of a run-configuration file."""

    # model
    operator: str
    epsilon: float
    c0: float = 0.0
    potential: str = "double-well"
    components: int = 1
    dealias: bool = False
    # grid
    nx: int = 128
    ny: int = 128
    lx: float = 2.0 * np.pi
    ly: float = 2.0 * np.pi
    x0: float = 0.0
    y0: float = 0.0
    # time
    tau: float = 0.0
    tau_list: tuple = ()
    t_final: float = 1.0
    tableau: str = "imex-rrk-3-2"
    tableau_file: str = ""
    mode: str = RT
    tau_ref: float = 0.0
    # init
    init_preset: str = "sine-half"
    init_params: dict = field(default_factory=dict)
    seed: int = 0
    # output
    directory: str = "out"
    energy_csv: bool = True
    gn_diagnostics: bool = False
    snapshot_times: tuple = ()
    name: str = "run"

    def to_preset(self) -> ExperimentPreset:
        tau_list = self.tau_list if self.tau_list else (self.tau,)
        return ExperimentPreset(
            name=self.name, operator=self.operator, epsilon=self.epsilon,
            c0=self.c0, potential=self.potential, k=self.components,
            nx=self.nx, ny=self.ny, lx=self.lx, ly=self.ly,
            x0=self.x0, y0=self.y0, ic=self.init_preset,
            ic_params=dict(self.init_params), seed=self.seed,
            tableau=self.tableau, t_final=self.t_final, tau_list=tau_list,
            mode=self.mode, snapshot_times=self.snapshot_times,
            tau_ref=self.tau_ref)


def _parse_float(raw, where):
    try:
        value = float(raw)
    except ValueError:
        raise ConfigValueError(f"{where}: not a number: {raw!r}") from None
    if not np.isfinite(value):
        raise ConfigValueError(f"{where}: value must be finite, got {raw!r}")
    return value


def _parse_int(raw, where):
    try:
        return int(raw)
    except ValueError:
        raise ConfigValueError(f"{where}: not an integer: {raw!r}") from None


def _parse_bool(raw, where):
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigValueError(f"{where}: not a boolean: {raw!r}")


def _parse_float_list(raw, where):
    items = [s for s in (piece.strip() for piece in raw.split(",")) if s]
    if not items:
        raise ConfigValueError(f"{where}: empty list")
    return tuple(_parse_float(item, where) for item in items)


def _parse_centers(raw, where):
    pairs = []
    for chunk in raw.split(";"):
        parts = chunk.split()
        if len(parts) != 2:
            raise ConfigValueError(
                f"{where}: expected 'x y' pairs separated by ';', got {raw!r}")
        pairs.append((_parse_float(parts[0], where), _parse_float(parts[1], where)))
    return tuple(pairs)


# section -> key -> (kind, required)
_SCHEMA = {
    "model": {
        "operator": "str", "epsilon": "float", "c0": "float",
        "potential": "str", "components": "int", "dealias": "bool",
    },
    "grid": {
        "nx": "int", "ny": "int", "lx": "float", "ly": "float",
        "x0": "float", "y0": "float",
    },
    "time": {
        "tau": "float", "tau_list": "float_list", "t_final": "float",
        "tableau": "str", "tableau_file": "str", "mode": "str",
        "tau_ref": "float",
    },
    "init": {
        "preset": "str", "expression": "str", "seed": "int",
        "amplitude": "float", "offset": "float", "radius": "float",
        "interface": "float", "centers": "centers",
    },
    "output": {
        "directory": "str", "energy_csv": "bool", "gn_diagnostics": "bool",
        "snapshot_times": "float_list",
    },
}

_PARSERS = {
    "str": lambda raw, where: raw.strip(),
    "float": _parse_float,
    "int": _parse_int,
    "bool": _parse_bool,
    "float_list": _parse_float_list,
    "centers": _parse_centers,
}


def _read_sections(path: Path) -> dict:
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       inline_comment_prefixes=(";", "#"))
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigMissingFileError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigMissingFileError(f"cannot read config file {path}: {exc}") from None
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigSyntaxError(str(exc)) from None

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            known = ", ".join(_SCHEMA)
            raise ConfigUnknownKeyError(
                f"{path}: unknown section [{section}]; known sections: {known}")
        for key, raw in parser.items(section):
            kind = _SCHEMA[section].get(key)
            if kind is None:
                known = ", ".join(sorted(_SCHEMA[section]))
                raise ConfigUnknownKeyError(
                    f"{path}: unknown key {key!r} in [{section}];"
                    f" known keys: {known}")
            values[(section, key)] = _PARSERS[kind](raw, f"[{section}] {key}")
    return values


def _validate(cfg: RunConfig, where="config"):
    if cfg.operator not in OPERATORS:
        raise ConfigValueError(
            f"{where}: operator must be one of {', '.join(OPERATORS)},"
            f" got {cfg.operator!r}")
    if cfg.epsilon <= 0:
        raise ConfigValueError(f"{where}: epsilon must be positive")
    if cfg.c0 < 0:
        raise ConfigValueError(f"{where}: c0 must be non-negative")
    if cfg.potential not in BUILTIN_POTENTIALS:
        raise ConfigValueError(
            f"{where}: unknown potential {cfg.potential!r};"
            f" available: {', '.join(sorted(BUILTIN_POTENTIALS))}")
    if cfg.components < 1:
        raise ConfigValueError(f"{where}: components must be >= 1")
    if cfg.components > 1 and cfg.operator != ALLEN_CAHN:
        raise ConfigValueError(
            f"{where}: components > 1 requires operator = {ALLEN_CAHN}")
    if cfg.nx < 4 or cfg.ny < 4 or cfg.nx % 2 or cfg.ny % 2:
        raise ConfigValueError(
            f"{where}: grid sizes must be even and >= 4, got {cfg.nx} x {cfg.ny}")
    if cfg.lx <= 0 or cfg.ly <= 0:
        raise ConfigValueError(f"{where}: domain lengths must be positive")
    if not cfg.tau and not cfg.tau_list:
        raise ConfigValueError(f"{where}: [time] needs tau or tau_list")
    if cfg.tau < 0 or any(t <= 0 for t in cfg.tau_list):
        raise ConfigValueError(f"{where}: step sizes must be positive")
    if cfg.t_final <= 0:
        raise ConfigValueError(f"{where}: t_final must be positive")
    if not cfg.tableau_file and cfg.tableau not in BUILTIN_TABLEAUX:
        raise ConfigValueError(
            f"{where}: unknown tableau {cfg.tableau!r};"
            f" builtins: {', '.join(sorted(BUILTIN_TABLEAUX))}")
    if cfg.mode not in MODES:
        raise ConfigValueError(
            f"{where}: mode must be one of {', '.join(MODES)}, got {cfg.mode!r}")
    if cfg.tau_ref < 0:
        raise ConfigValueError(f"{where}: tau_ref must be non-negative")
    if cfg.init_preset not in INITIAL_CONDITIONS:
        raise ConfigValueError(
            f"{where}: unknown initial condition {cfg.init_preset!r};"
            f" available: {', '.join(sorted(INITIAL_CONDITIONS))}")
    if cfg.init_preset == "expression" and "expression" not in cfg.init_params:
        raise ConfigValueError(f"{where}: expression init needs [init] expression")
    if cfg.init_preset == "tanh-circles":
        for needed, src in (("epsilon", "interface"), ("radius", "radius"),
                            ("centers", "centers")):
            if needed not in cfg.init_params:
                raise ConfigValueError(
                    f"{where}: tanh-circles init needs [init] {src}")


def parse_config(path) -> RunConfig:
    """Read, type and range-check a run configuration."""
    path = Path(path)
    values = _read_sections(path)

    def get(section, key, default=None):
        return values.get((section, key), default)

    if get("model", "operator") is None:
        raise ConfigValueError(f"{path}: [model] operator is required")
    if get("model", "epsilon") is None:
        raise ConfigValueError(f"{path}: [model] epsilon is required")

    init_params = {}
    init_preset = get("init", "preset", "sine-half")
    if get("init", "expression") is not None:
        if get("init", "preset") is not None:
            raise ConfigValueError(
                f"{path}: [init] preset and expression are mutually exclusive")
        init_preset = "expression"
        init_params["expression"] = get("init", "expression")
    for src, dst in (("amplitude", "amplitude"), ("offset", "offset"),
                     ("radius", "radius"), ("interface", "epsilon"),
                     ("centers", "centers")):
        if get("init", src) is not None:
            init_params[dst] = get("init", src)

    cfg = RunConfig(
        operator=get("model", "operator"),
        epsilon=get("model", "epsilon", 0.0),
        c0=get("model", "c0", 0.0),
        potential=get("model", "potential", "double-well"),
        components=get("model", "components", 1),
        dealias=get("model", "dealias", False),
        nx=get("grid", "nx", 128), ny=get("grid", "ny", 128),
        lx=get("grid", "lx", 2.0 * np.pi), ly=get("grid", "ly", 2.0 * np.pi),
        x0=get("grid", "x0", 0.0), y0=get("grid", "y0", 0.0),
        tau=get("time", "tau", 0.0),
        tau_list=get("time", "tau_list", ()),
        t_final=get("time", "t_final", 1.0),
        tableau=get("time", "tableau", "imex-rrk-3-2"),
        tableau_file=get("time", "tableau_file", ""),
        mode=get("time", "mode", RT),
        tau_ref=get("time", "tau_ref", 0.0),
        init_preset=init_preset,
        init_params=init_params,
        seed=get("init", "seed", 0),
        directory=get("output", "directory", "out"),
        energy_csv=get("output", "energy_csv", True),
        gn_diagnostics=get("output", "gn_diagnostics", False),
        snapshot_times=get("output", "snapshot_times", ()),
        name=path.stem,
    )
    _validate(cfg, where=str(path))
    return cfg


def config_from_preset(preset: ExperimentPreset) -> RunConfig:
    """The RunConfig equivalent of a builtin experiment preset."""
    params = dict(preset.ic_params)
    cfg = RunConfig(
        operator=preset.operator, epsilon=preset.epsilon, c0=preset.c0,
        potential=preset.potential, components=preset.k,
        nx=preset.nx, ny=preset.ny, lx=preset.lx, ly=preset.ly,
        x0=preset.x0, y0=preset.y0,
        tau=preset.tau_list[0], tau_list=tuple(preset.tau_list),
        t_final=preset.t_final, tableau=preset.tableau, mode=preset.mode,
        tau_ref=preset.tau_ref, init_preset=preset.ic, init_params=params,
        seed=preset.seed, snapshot_times=tuple(preset.snapshot_times),
        name=preset.name)
    return cfg


def echo_config(cfg: RunConfig) -> str:
    """Effective configuration as re-parseable INI text (provenance copy)."""
    out = []

    def sec(title):
        out.append(f"[{title}]")

    def kv(key, value):
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        elif isinstance(value, tuple):
            value = ", ".join(repr(float(v)) for v in value)
        out.append(f"{key} = {value}")

    sec("model")
    kv("operator", cfg.operator)
    kv("epsilon", cfg.epsilon)
    kv("c0", cfg.c0)
    kv("potential", cfg.potential)
    kv("components", cfg.components)
    kv("dealias", cfg.dealias)
    out.append("")
    sec("grid")
    for key in ("nx", "ny"):
        kv(key, getattr(cfg, key))
    for key in ("lx", "ly", "x0", "y0"):
        kv(key, getattr(cfg, key))
    out.append("")
    sec("time")
    if cfg.tau:
        kv("tau", cfg.tau)
    if cfg.tau_list:
        kv("tau_list", cfg.tau_list)
    kv("t_final", cfg.t_final)
    kv("tableau", cfg.tableau)
    if cfg.tableau_file:
        kv("tableau_file", cfg.tableau_file)
    kv("mode", cfg.mode)
    if cfg.tau_ref:
        kv("tau_ref", cfg.tau_ref)
    out.append("")
    sec("init")
    if cfg.init_preset == "expression":
        kv("expression", cfg.init_params["expression"])
    else:
        kv("preset", cfg.init_preset)
    kv("seed", cfg.seed)
    for src, dst in (("amplitude", "amplitude"), ("offset", "offset"),
                     ("radius", "radius"), ("epsilon", "interface")):
        if src in cfg.init_params and cfg.init_preset != "expression":
            kv(dst, cfg.init_params[src])
    if "centers" in cfg.init_params:
        centers = "; ".join(f"{x!r} {y!r}" for x, y in cfg.init_params["centers"])
        out.append(f"centers = {centers}")
    out.append("")
    sec("output")
    kv("directory", cfg.directory)
    kv("energy_csv", cfg.energy_csv)
    kv("gn_diagnostics", cfg.gn_diagnostics)
    if cfg.snapshot_times:
        kv("snapshot_times", cfg.snapshot_times)
    return "\n".join(out) + "\n"

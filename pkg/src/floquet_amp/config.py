"""Experiment configuration files (TOML).

Sections: ``[spin]``, ``[drive]``, ``[test]``, ``[optics]``, ``[sim]`` map onto
the dataclasses of the same role; ``[calibration]``, ``[profile]``,
``[sweep]`` and ``[fit]`` hold command settings. Every key is optional and
falls back to the dataclass default. ``[drive]`` accepts ``nu0``/``u`` in
place of ``b0``/``b_ac``.

Precedence: ``--set section.key=value`` flags > file values > defaults.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .bloch_sim import SimConfig
from .domain import DriveConfig, OpticsParams, SpinParams, TestField


class ConfigError(ValueError):
    """Malformed or invalid configuration; the message names the field."""


@dataclass(frozen=True)
class Calibration:
    eta00_target: float | None = None  # |eta_00(0)|; overrides spin.m_n when set


@dataclass(frozen=True)
class ProfileSettings:
    k_min: int = -3
    k_max: int = 3
    span_linewidths: float = 10.0
    step_hz: float | None = None  # default: linewidth / 20


@dataclass(frozen=True)
class SweepSettings:
    axis: str = "u"
    start: float = 0.0
    stop: float = 8.0
    steps: int = 161
    pairs: tuple = ((1, 0), (1, -1), (1, 1))


@dataclass(frozen=True)
class FitSettings:
    k_min: int = -3
    k_max: int = 3
    fit_offset: bool = False
    squared_input: bool = False  # True if the data column is already eta^2
    max_iter: int = 500


SECTIONS = {
    "spin": SpinParams,
    "drive": DriveConfig,
    "test": TestField,
    "optics": OpticsParams,
    "sim": SimConfig,
    "calibration": Calibration,
    "profile": ProfileSettings,
    "sweep": SweepSettings,
    "fit": FitSettings,
}


@dataclass(frozen=True)
class ExperimentConfig:
    spin: SpinParams = field(default_factory=SpinParams)
    drive: DriveConfig = field(default_factory=DriveConfig)
    test: TestField = field(default_factory=TestField)
    optics: OpticsParams = field(default_factory=OpticsParams)
    sim: SimConfig = field(default_factory=lambda: SimConfig(duration=210.0, record_every=10))
    calibration: Calibration = field(default_factory=Calibration)
    profile: ProfileSettings = field(default_factory=ProfileSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    fit: FitSettings = field(default_factory=FitSettings)

    def spin_params(self) -> SpinParams:
        """Spin parameters with the calibration applied."""
        if self.calibration.eta00_target is None:
            return self.spin
        from .steady_state import calibrate_baseline

        return calibrate_baseline(self.spin, self.calibration.eta00_target)

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            section = getattr(self, name)
            out[name] = {f.name: _plain(getattr(section, f.name)) for f in dataclasses.fields(section)}
        return out


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def _coerce(section, key, ftype, value):
    where = f"{section}.{key}"
    ftype = str(ftype)
    if value is None:
        if "None" in ftype:
            return None
        raise ConfigError(f"{where}: value required")
    try:
        if ftype.startswith("float"):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if ftype.startswith("int"):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if ftype == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if ftype == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if ftype == "tuple":
            return tuple(tuple(int(v) for v in pair) for pair in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot interpret {value!r} as {ftype}") from None
    return value


def _build_section(name, values: dict):
    cls = SECTIONS[name]
    values = dict(values)
    if name == "drive":
        values = _drive_aliases(values)
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key")
        kwargs[key] = _coerce(name, key, known[key].type, value)
    return cls(**kwargs)


def _drive_aliases(values):
    gamma = float(values.get("gamma_n", DriveConfig.gamma_n))
    if "nu0" in values:
        if "b0" in values:
            raise ConfigError("drive.nu0: give either b0 or nu0, not both")
        values["b0"] = float(values.pop("nu0")) / gamma
    if "u" in values:
        if "b_ac" in values:
            raise ConfigError("drive.u: give either b_ac or u, not both")
        nu_ac = float(values.get("nu_ac", DriveConfig.nu_ac))
        values["b_ac"] = float(values.pop("u")) * nu_ac / gamma
    return values


def from_dict(data: dict) -> ExperimentConfig:
    kwargs = {}
    for name, values in data.items():
        if name not in SECTIONS:
            raise ConfigError(f"{name}: unknown section")
        if not isinstance(values, dict):
            raise ConfigError(f"{name}: expected a section table")
        kwargs[name] = _build_section(name, values)
    return ExperimentConfig(**kwargs)


def loads(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    return from_dict(data)


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        text = repr(value)
        return text
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot write {value!r} to TOML")


def dumps(cfg: ExperimentConfig) -> str:
    """TOML text; floats use ``repr`` so parsing it back is bit-exact.

    Unset optional values (None) are omitted.
    """
    lines = []
    for name, values in cfg.to_dict().items():
        lines.append(f"[{name}]")
        for key, value in values.items():
            if value is None:
                continue
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def apply_overrides(cfg: ExperimentConfig, assignments) -> ExperimentConfig:
    """Apply ``section.key=value`` strings; values are parsed as TOML literals."""
    data = {}
    for item in assignments:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r}: expected section.key=value")
        lhs, rhs = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        try:
            value = tomllib.loads(f"v = {rhs.strip()}")["v"]
        except tomllib.TOMLDecodeError:
            value = rhs.strip()
        data.setdefault(section, {})[key] = value
    base = cfg.to_dict()
    for section, values in data.items():
        if section not in SECTIONS:
            raise ConfigError(f"{section}: unknown section")
        merged = {k: v for k, v in base[section].items() if v is not None}
        if section == "drive" and ("nu0" in values or "u" in values):
            # keep the physical meaning of the alias relative to the final nu_ac
            if "nu0" in values:
                merged.pop("b0", None)
            if "u" in values:
                merged.pop("b_ac", None)
        merged.update(values)
        base[section] = merged
    base = {s: {k: v for k, v in vals.items() if v is not None} for s, vals in base.items()}
    return from_dict(base)

"""Run configuration: a flat ``key = value`` format with dotted sections.

The canonical text form lists every key in a fixed order, so
``serialize_config(parse_config(text)) == text`` for any canonical file.
Blank lines and ``#`` comments are ignored by the parser.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from pinchflow.errors import ConfigError
from pinchflow.frames import FlowGeometry, WindowSpec
from pinchflow.solver import SolverConfig

FAMILIES = ("generic_pinch", "cylinder")
HEADER = "# pinchflow run configuration"


@dataclass(frozen=True)
class InitialData:
    family: str = "generic_pinch"
    c0: float = 0.9 * math.sqrt(2.0)
    c2: float = 0.08
    width: float = 5.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown initial family {self.family!r}; known: {', '.join(FAMILIES)}")
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")
        if not self.width > 0:
            raise ValueError("width must be positive")


@dataclass(frozen=True)
class RunConfig:
    geometry: FlowGeometry = field(default_factory=FlowGeometry)
    initial: InitialData = field(default_factory=InitialData)
    solver: SolverConfig = field(default_factory=SolverConfig)
    window: WindowSpec = field(default_factory=WindowSpec)
    output_dir: str = "runs/default"
    seed: int = 0

    def replace(self, **changes) -> "RunConfig":
        """Copy with dotted keys replaced, e.g. ``replace(**{"initial.c2": 0.1})``."""
        values = to_dict(self)
        for key, val in changes.items():
            if key not in _SPECS:
                raise ConfigError(f"unknown key {key!r}", field=key)
            values[key] = val
        return from_dict(values)


# key -> (kind, section attribute, field name)
_SPECS = {
    "geometry.m": ("int", "geometry", "m"),
    "geometry.k": ("int", "geometry", "k"),
    "initial.family": ("str", "initial", "family"),
    "initial.c0": ("float", "initial", "c0"),
    "initial.c2": ("float", "initial", "c2"),
    "initial.width": ("float", "initial", "width"),
    "solver.grid_size": ("int", "solver", "grid_size"),
    "solver.domain_radius": ("float", "solver", "domain_radius"),
    "solver.outer_bc": ("str", "solver", "outer_bc"),
    "solver.outer_value": ("auto_float", "solver", "outer_value"),
    "solver.cfl_safety": ("float", "solver", "cfl_safety"),
    "solver.dt_min": ("float", "solver", "dt_min"),
    "solver.dt_max": ("float", "solver", "dt_max"),
    "solver.u_min_stop": ("float", "solver", "u_min_stop"),
    "solver.gradient_abort": ("float", "solver", "gradient_abort"),
    "solver.refinement": ("str", "solver", "refinement"),
    "solver.max_steps": ("int", "solver", "max_steps"),
    "solver.stall_tol": ("float", "solver", "stall_tol"),
    "snapshots.dtau": ("float", "solver", "snapshot_dtau"),
    "window.xi0": ("float", "window", "xi0"),
    "window.multiplier": ("float", "window", "multiplier"),
    "output.dir": ("str", None, "output_dir"),
    "seed": ("int", None, "seed"),
}
KEYS = tuple(_SPECS)
_SECTION_TYPES = {"geometry": FlowGeometry, "initial": InitialData,
                  "solver": SolverConfig, "window": WindowSpec}


def _parse_value(kind: str, text: str, key: str):
    try:
        if kind == "int":
            val = int(text)
            if val < 0 and key == "seed":
                raise ValueError
            return val
        if kind == "float":
            val = float(text)
            if not math.isfinite(val):
                raise ValueError
            return val
        if kind == "auto_float":
            return None if text == "auto" else _parse_value("float", text, key)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind.replace('_', ' ')}",
                          field=key) from None
    if not text:
        raise ConfigError(f"{key}: empty value", field=key)
    return text


def _format_value(kind: str, val) -> str:
    if kind == "auto_float" and val is None:
        return "auto"
    if kind in ("float", "auto_float"):
        return repr(float(val))
    return str(val)


def parse_value(key: str, text: str):
    """Parse one value for ``key`` as it would appear in a config file."""
    if key not in _SPECS:
        raise ConfigError(f"unknown key {key!r}", field=key)
    return _parse_value(_SPECS[key][0], text.strip(), key)


def to_dict(cfg: RunConfig) -> dict:
    """Dotted key -> Python value, in canonical key order."""
    out = {}
    for key, (_, section, name) in _SPECS.items():
        holder = cfg if section is None else getattr(cfg, section)
        out[key] = getattr(holder, name)
    return out


def from_dict(values: dict) -> RunConfig:
    """Build and validate a config; missing keys take their defaults."""
    unknown = [k for k in values if k not in _SPECS]
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", field=unknown[0])
    sections = {name: {} for name in _SECTION_TYPES}
    top = {}
    for key, val in values.items():
        _, section, name = _SPECS[key]
        (top if section is None else sections[section])[name] = val
    built = {}
    for section, cls in _SECTION_TYPES.items():
        try:
            built[section] = cls(**sections[section])
        except (TypeError, ValueError) as exc:
            culprit = _guess_field(section, sections[section], str(exc))
            raise ConfigError(f"{culprit}: {exc}", field=culprit) from None
    if "output_dir" in top and not str(top["output_dir"]):
        raise ConfigError("output.dir: must not be empty", field="output.dir")
    if "seed" in top and not (0 <= int(top["seed"]) < 2 ** 64):
        raise ConfigError("seed: must be an unsigned 64-bit integer", field="seed")
    return RunConfig(**built, **top)


def _guess_field(section: str, given: dict, message: str) -> str:
    for key, (_, sec, name) in _SPECS.items():
        if sec == section and name in given and name in message:
            return key
    for key, (_, sec, name) in _SPECS.items():
        if sec == section and name in given:
            return key
    return section


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            col = len(raw) - len(raw.lstrip()) + 1
            raise ConfigError("expected 'key = value'", line=lineno, column=col)
        key_part, val_part = raw.split("=", 1)
        key = key_part.strip()
        key_col = len(key_part) - len(key_part.lstrip()) + 1
        if key not in _SPECS:
            raise ConfigError(f"unknown key {key!r}", field=key, line=lineno, column=key_col)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", field=key, line=lineno, column=key_col)
        val_col = len(key_part) + 2 + len(val_part) - len(val_part.lstrip())
        try:
            values[key] = _parse_value(_SPECS[key][0], val_part.strip(), key)
        except ConfigError as exc:
            raise ConfigError(str(exc), field=key, line=lineno, column=val_col) from None
    return from_dict(values)


def serialize_config(cfg: RunConfig) -> str:
    lines = [HEADER]
    previous = None
    for key, val in to_dict(cfg).items():
        section = key.split(".")[0] if "." in key else ""
        if section != previous:
            lines.append("")
            previous = section
        lines.append(f"{key} = {_format_value(_SPECS[key][0], val)}")
    return "\n".join(lines) + "\n"


def identity_text(cfg: RunConfig) -> str:
    """Canonical text without the output directory (basis of the config hash)."""
    lines = serialize_config(cfg).splitlines(keepends=True)
    return "".join(line for line in lines if not line.startswith("output.dir"))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def shipped_config(name: str = "default") -> Path:
    """Path of a config shipped with the package (``default``, ``cylinder``, ...)."""
    ref = resources.files("pinchflow") / "configs" / f"{name}.conf"
    if not ref.is_file():
        raise ConfigError(f"no shipped config named {name!r}")
    return Path(str(ref))


def shipped_names() -> list:
    folder = resources.files("pinchflow") / "configs"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".conf"))


def manifest_view(cfg: RunConfig) -> dict:
    """Config as stored in a run manifest: everything but the output directory."""
    d = to_dict(cfg)
    d.pop("output.dir")
    return d



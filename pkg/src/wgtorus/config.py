"""Run configuration: a YAML file with one block per pipeline stage.

Every field has a default reproducing the worked example (triangle profile,
sigma = 0.4, R = 3, h = 0.015, n = 1500, k = 2, m = 5), so an empty file is a
valid configuration. Errors carry the line number of the offending entry.
"""

from dataclasses import asdict, dataclass, field, fields
import hashlib
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .exceptions import ConfigError
from .geometry import build_curve, circle_profile, tabulated_profile, triangle_profile
from .semiclassics import ModeIndices, ScaleParams

__all__ = [
    "GeometryConfig",
    "ScaleConfig",
    "ModeConfig",
    "GridConfig",
    "BilliardConfig",
    "SweepConfig",
    "OutputConfig",
    "RunConfig",
    "parse_config",
    "config_from_text",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class GeometryConfig:
    profile: str = "triangle"
    sigma: float = 0.4
    L: float = TWO_PI
    R: float = 3.0
    table: Optional[str] = None
    curve_nodes: int = 4096


@dataclass(frozen=True)
class ScaleConfig:
    h: Optional[float] = None
    epsilon: Optional[float] = None
    n: int = 1500


@dataclass(frozen=True)
class ModeConfig:
    k: int = 2
    m: int = 5
    delta: Optional[float] = None
    ell: int = 3
    C_loc: float = 6.0
    regime: str = "auto"


@dataclass(frozen=True)
class GridConfig:
    s_nodes: int = 2048
    rho_nodes: int = 512
    rho_max_factor: float = 1.0
    oracle_nodes: int = 2048
    section_nodes: int = 256


@dataclass(frozen=True)
class BilliardConfig:
    dt: Optional[float] = 1e-3
    T: float = 10.0
    stride: int = 10
    s0: Optional[float] = None
    p_s: Optional[float] = 0.05
    rho0: float = 0.0
    p_rho: Optional[float] = 1.2e-4
    bounces: int = 500
    ray_origin: Optional[tuple] = None
    ray_direction: Optional[tuple] = None
    seed: int = 0


@dataclass(frozen=True)
class SweepConfig:
    h: tuple = (0.04, 0.03, 0.02, 0.015)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv", "json")


_BLOCKS = {
    "geometry": GeometryConfig,
    "scale": ScaleConfig,
    "mode": ModeConfig,
    "grid": GridConfig,
    "billiard": BilliardConfig,
    "sweep": SweepConfig,
    "output": OutputConfig,
}
_CHOICES = {
    ("geometry", "profile"): ("triangle", "circle", "tabulated"),
    ("mode", "regime"): ("auto", "NoTurningPoints", "TwoTurningPoints"),
}
_POW2 = {("geometry", "curve_nodes"), ("grid", "s_nodes"), ("grid", "rho_nodes"),
         ("grid", "oracle_nodes"), ("grid", "section_nodes")}
_POSITIVE = {("geometry", "sigma"), ("geometry", "L"), ("geometry", "R"), ("scale", "h"),
             ("scale", "epsilon"), ("scale", "n"), ("mode", "k"), ("mode", "ell"), ("mode", "C_loc"),
             ("mode", "delta"), ("grid", "rho_max_factor"), ("billiard", "dt"), ("billiard", "T"),
             ("billiard", "stride"), ("billiard", "bounces")}
_NONNEGATIVE = {("mode", "m"), ("billiard", "rho0"), ("billiard", "seed")}
_FORMATS = ("csv", "json", "svg")


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    scale: ScaleConfig = field(default_factory=lambda: ScaleConfig(h=0.015))
    mode: ModeConfig = field(default_factory=ModeConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    billiard: BilliardConfig = field(default_factory=BilliardConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: str = field(default=".", compare=False)

    @property
    def h(self):
        return self.scale.h if self.scale.h is not None else self.scale.epsilon ** (2.0 / 3.0)

    @property
    def epsilon(self):
        return self.scale.epsilon if self.scale.epsilon is not None else self.scale.h ** 1.5

    def to_dict(self):
        d = {name: asdict(getattr(self, name)) for name in _BLOCKS}
        d["scale"]["h"] = self.h
        d["scale"]["epsilon"] = self.epsilon
        return d

    def config_hash(self):
        """SHA-256 of the canonical JSON form of the resolved configuration."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def profile(self):
        g = self.geometry
        if g.profile == "triangle":
            return triangle_profile(g.sigma, g.L)
        if g.profile == "circle":
            return circle_profile(g.L)
        path = Path(self.base_dir) / g.table
        try:
            data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read curvature table {path}: {exc}") from exc
        if data.shape[1] != 2:
            raise ConfigError("curvature table needs two columns: s, k")
        return tabulated_profile(data[:, 0], data[:, 1])

    def curve(self):
        return build_curve(self.profile(), self.geometry.R, self.geometry.curve_nodes)

    def scale_params(self, n=None):
        return ScaleParams(self.epsilon, self.scale.n if n is None else n)

    def indices(self, n=None):
        return ModeIndices(self.scale.n if n is None else n, self.mode.k, self.mode.m)


def _line(node):
    return None if node is None else node.start_mark.line + 1


def _check_value(block, key, value, default_type, line):
    where = f"{block}.{key}"
    if value is None:
        return None
    if default_type is bool:
        raise ConfigError(f"{where}: unsupported boolean", line)
    if default_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}", line)
    elif default_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}", line)
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{where} must be finite", line)
    elif default_type is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}", line)
    elif default_type is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list, got {value!r}", line)
        value = tuple(value)
    if (block, key) in _CHOICES and value not in _CHOICES[(block, key)]:
        raise ConfigError(f"{where} must be one of {_CHOICES[(block, key)]}, got {value!r}", line)
    if (block, key) in _POSITIVE and not value > 0:
        raise ConfigError(f"{where} must be positive", line)
    if (block, key) in _NONNEGATIVE and value < 0:
        raise ConfigError(f"{where} must be nonnegative", line)
    if (block, key) in _POW2 and not (256 <= value <= 65536 and value & (value - 1) == 0):
        raise ConfigError(f"{where} must be a power of two between 2^8 and 2^16", line)
    return value


_TYPES = {
    GeometryConfig: {"profile": str, "sigma": float, "L": float, "R": float, "table": str, "curve_nodes": int},
    ScaleConfig: {"h": float, "epsilon": float, "n": int},
    ModeConfig: {"k": int, "m": int, "delta": float, "ell": int, "C_loc": float, "regime": str},
    GridConfig: {"s_nodes": int, "rho_nodes": int, "rho_max_factor": float, "oracle_nodes": int,
                 "section_nodes": int},
    BilliardConfig: {"dt": float, "T": float, "stride": int, "s0": float, "p_s": float, "rho0": float,
                     "p_rho": float, "bounces": int, "ray_origin": tuple, "ray_direction": tuple, "seed": int},
    SweepConfig: {"h": tuple},
    OutputConfig: {"directory": str, "formats": tuple},
}


def _build_block(name, mapping_node):
    cls = _BLOCKS[name]
    types = _TYPES[cls]
    values = {}
    lines = {}
    if not isinstance(mapping_node, yaml.MappingNode):
        raise ConfigError(f"block '{name}' must be a mapping", _line(mapping_node))
    for key_node, value_node in mapping_node.value:
        key = key_node.value
        line = _line(key_node)
        if key not in types:
            raise ConfigError(f"unknown key '{name}.{key}'", line)
        raw = yaml.safe_load(yaml.serialize(value_node))
        values[key] = _check_value(name, key, raw, types[key], line)
        lines[key] = line
    return values, lines


def _finish_block(name, values, lines):
    cls = _BLOCKS[name]
    if name == "sweep" and "h" in values:
        hs = values["h"]
        if len(hs) < 4 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in hs):
            raise ConfigError("sweep.h needs at least 4 positive numbers", lines["h"])
        values["h"] = tuple(float(v) for v in hs)
    if name == "output" and "formats" in values:
        bad = [f for f in values["formats"] if f not in _FORMATS]
        if bad:
            raise ConfigError(f"output.formats: unknown format(s) {bad}", lines["formats"])
    if name == "billiard":
        for key in ("ray_origin", "ray_direction"):
            v = values.get(key)
            if v is not None and (len(v) != 3 or not all(isinstance(x, (int, float)) for x in v)):
                raise ConfigError(f"billiard.{key} must be a list of 3 numbers", lines[key])
            if v is not None:
                values[key] = tuple(float(x) for x in v)
    if name == "geometry" and values.get("profile") == "tabulated" and not values.get("table"):
        raise ConfigError("geometry.table is required for a tabulated profile", lines.get("profile"))
    return cls(**values)


def config_from_text(text, base_dir="."):
    """Parse configuration text; see :func:`parse_config`."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          None if mark is None else mark.line + 1) from exc
    blocks = {}
    scale_line = 1
    if root is not None:
        if not isinstance(root, yaml.MappingNode):
            raise ConfigError("top level must be a mapping of blocks", _line(root))
        for key_node, value_node in root.value:
            name = key_node.value
            if name not in _BLOCKS:
                raise ConfigError(f"unknown block '{name}'", _line(key_node))
            if name in blocks:
                raise ConfigError(f"duplicate block '{name}'", _line(key_node))
            values, lines = _build_block(name, value_node)
            blocks[name] = _finish_block(name, values, lines)
            if name == "scale":
                scale_line = _line(key_node)
    scale = blocks.get("scale")
    if scale is None:
        scale = ScaleConfig(h=0.015)
    elif (scale.h is None) == (scale.epsilon is None):
        raise ConfigError("scale: give exactly one of h, epsilon", scale_line)
    blocks["scale"] = scale
    return RunConfig(**blocks, base_dir=str(base_dir))


def parse_config(path):
    """Read and validate a run configuration.

    Omitted blocks and keys take their defaults; an empty file gives the
    worked-example configuration.

    Raises
    ------
    ConfigError
        For unreadable files, malformed YAML, unknown keys, type mismatches,
        out-of-range values, or when both or neither of ``h``, ``epsilon`` are
        given in a ``scale`` block.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_text(text, base_dir=path.parent)

"""Plain-text run configuration: ``key = value`` lines, ``#`` comments."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

__all__ = ["ConfigError", "InitialCondition", "RunConfig", "parse_config", "format_config", "load_config"]

MODELS = ("cahn_hilliard", "mbe")
SCHEMES = ("leqrk", "leqrk_pc", "cs2")
TABLEAUX = ("gauss4", "dirk4")
FORCINGS = ("none", "mms")


class ConfigError(ValueError):
    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = f"line {line}: " if line is not None else ""
        what = f"{key}: " if key is not None else ""
        super().__init__(f"{where}{what}{message}")


@dataclass(frozen=True)
class InitialCondition:
    """``mms``, ``cosine_combo``, ``random(amplitude, seed)`` or ``file(path)``."""

    kind: str
    amplitude: float = 0.0
    seed: int = 0
    path: str = ""

    _RANDOM = re.compile(r"random\(\s*([^,\s)]+)\s*(?:,\s*([^)\s]+)\s*)?\)$")
    _FILE = re.compile(r"file\((.+)\)$")

    @classmethod
    def parse(cls, text: str) -> "InitialCondition":
        text = text.strip()
        if text in ("mms", "cosine_combo"):
            return cls(text)
        m = cls._RANDOM.match(text)
        if m:
            amp = float(m.group(1))
            seed = int(m.group(2)) if m.group(2) is not None else 0
            if seed < 0:
                raise ValueError("random seed must be nonnegative")
            return cls("random", amplitude=amp, seed=seed)
        m = cls._FILE.match(text)
        if m:
            return cls("file", path=m.group(1).strip())
        raise ValueError(
            f"expected mms, cosine_combo, random(amplitude, seed) or file(path), got {text!r}"
        )

    def __str__(self) -> str:
        if self.kind == "random":
            return f"random({self.amplitude!r}, {self.seed})"
        if self.kind == "file":
            return f"file({self.path})"
        return self.kind


@dataclass(frozen=True)
class RunConfig:
    model: str
    nx: int
    dt: float
    t_end: float
    scheme: str = "leqrk_pc"
    tableau: str = "gauss4"
    pc_iters: int = 5
    ny: int = 0  # 0 means "same as nx"
    lx: float = 2 * math.pi
    ly: float = 2 * math.pi
    lam: float = 1.0
    epsilon: float = 1.0
    gamma: float = 1.0
    initial: InitialCondition = InitialCondition("cosine_combo")
    forcing: str = "none"
    dealias: bool = False
    krylov_rel_tol: float = 1e-12
    krylov_max_iters: int = 2000
    pc_tol: float = 1e-10
    sample_every: int = 1
    series_path: str = ""
    snapshot_times: tuple = ()
    snapshot_dir: str = "snapshots"

    def __post_init__(self):
        if self.ny == 0:
            object.__setattr__(self, "ny", self.nx)
        _validate(self)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def replace(self, **changes) -> "RunConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return RunConfig(**values)


# config key -> dataclass attribute
_KEY_TO_ATTR = {"lambda": "lam"}
_ATTR_TO_KEY = {v: k for k, v in _KEY_TO_ATTR.items()}
_REQUIRED = ("model", "nx", "dt", "t_end")
_PI_EXPR = re.compile(r"^\s*(?:([-+0-9.eE]+)\s*\*\s*)?pi\s*(?:/\s*([-+0-9.eE]+))?\s*$")


def _is_whole_multiple(total: float, step: float) -> bool:
    ratio = total / step
    return abs(ratio - round(ratio)) <= np.spacing(ratio)


def _validate(cfg: RunConfig) -> None:
    def bad(key, msg):
        raise ConfigError(msg, key=key)

    if cfg.model not in MODELS:
        bad("model", f"must be one of {', '.join(MODELS)}")
    if cfg.scheme not in SCHEMES:
        bad("scheme", f"must be one of {', '.join(SCHEMES)}")
    if cfg.tableau not in TABLEAUX:
        bad("tableau", f"must be one of {', '.join(TABLEAUX)}")
    if cfg.forcing not in FORCINGS:
        bad("forcing", f"must be one of {', '.join(FORCINGS)}")
    for key in ("nx", "ny"):
        n = getattr(cfg, key)
        if n <= 0 or n % 2:
            bad(key, "must be a positive even integer")
    for key in ("lx", "ly", "lam", "epsilon", "krylov_rel_tol"):
        v = getattr(cfg, key)
        if not (v > 0 and math.isfinite(v)):
            bad(_ATTR_TO_KEY.get(key, key), "must be positive and finite")
    if not (cfg.dt > 0 and math.isfinite(cfg.dt)):
        bad("dt", "must be positive (dt > 0)")
    if not (cfg.t_end > 0 and math.isfinite(cfg.t_end)):
        bad("t_end", "must be positive (t_end > 0)")
    if not _is_whole_multiple(cfg.t_end, cfg.dt):
        bad("t_end", f"t_end/dt = {cfg.t_end / cfg.dt!r} is not an integer (uniform steps only)")
    if cfg.gamma < 0:
        bad("gamma", "must be nonnegative")
    if cfg.pc_iters < 0:
        bad("pc_iters", "must be nonnegative")
    if cfg.krylov_max_iters < 1:
        bad("krylov_max_iters", "must be positive")
    if cfg.pc_tol < 0:
        bad("pc_tol", "must be nonnegative")
    if cfg.sample_every < 1:
        bad("sample_every", "must be a positive integer")
    if cfg.forcing == "mms" and not (
        math.isclose(cfg.lx, 2 * math.pi) and math.isclose(cfg.ly, 2 * math.pi)
    ):
        bad("forcing", "mms forcing requires lx = ly = 2*pi")
    for ts in cfg.snapshot_times:
        if not 0 <= ts <= cfg.t_end:
            bad("snapshot_times", f"{ts!r} lies outside [0, t_end]")
        if ts > 0 and not _is_whole_multiple(ts, cfg.dt):
            bad("snapshot_times", f"{ts!r} is not a multiple of dt")


def _parse_float(text: str) -> float:
    m = _PI_EXPR.match(text)
    if m:
        factor = float(m.group(1)) if m.group(1) else 1.0
        div = float(m.group(2)) if m.group(2) else 1.0
        return factor * math.pi / div
    return float(text)


def _parse_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _parse_times(text: str) -> tuple:
    return tuple(_parse_float(v) for v in text.replace(",", " ").split())


_CONVERTERS = {
    "model": str,
    "scheme": str,
    "tableau": str,
    "forcing": str,
    "series_path": str,
    "snapshot_dir": str,
    "nx": _parse_int,
    "ny": _parse_int,
    "pc_iters": _parse_int,
    "krylov_max_iters": _parse_int,
    "sample_every": _parse_int,
    "lx": _parse_float,
    "ly": _parse_float,
    "dt": _parse_float,
    "t_end": _parse_float,
    "lam": _parse_float,
    "epsilon": _parse_float,
    "gamma": _parse_float,
    "krylov_rel_tol": _parse_float,
    "pc_tol": _parse_float,
    "initial": InitialCondition.parse,
    "dealias": _parse_bool,
    "snapshot_times": _parse_times,
}


def parse_config(text: str) -> RunConfig:
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError("expected 'key = value'", line=lineno)
        if key == "epsilon_sq":
            attr = "epsilon"
            convert = lambda v: math.sqrt(_parse_float(v))  # noqa: E731
        else:
            attr = _KEY_TO_ATTR.get(key, key)
            if attr not in _CONVERTERS or key in _ATTR_TO_KEY:
                raise ConfigError("unknown key", key=key, line=lineno)
            convert = _CONVERTERS[attr]
        if attr in values:
            raise ConfigError(f"duplicate setting (first on line {lines[attr]})", key=key, line=lineno)
        if value == "" and attr not in ("series_path", "snapshot_times"):
            raise ConfigError("missing value", key=key, line=lineno)
        try:
            values[attr] = convert(value)
        except ValueError as exc:
            raise ConfigError(str(exc), key=key, line=lineno) from None
        lines[attr] = lineno
    for key in _REQUIRED:
        if key not in values:
            raise ConfigError("required key is missing", key=key)
    try:
        return RunConfig(**values)
    except ConfigError as exc:
        attr = _KEY_TO_ATTR.get(exc.key, exc.key)
        raise ConfigError(str(exc).split(": ", 1)[-1], key=exc.key, line=lines.get(attr)) from None


def format_config(cfg: RunConfig) -> str:
    out = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            text = "true" if v else "false"
        elif isinstance(v, float):
            text = repr(v)
        elif f.name == "snapshot_times":
            text = ", ".join(repr(float(x)) for x in v)
        else:
            text = str(v)
        out.append(f"{_ATTR_TO_KEY.get(f.name, f.name)} = {text}".rstrip())
    return "\n".join(out) + "\n"


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())

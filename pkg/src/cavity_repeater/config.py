"""Run configuration: TOML ingestion, overrides, presets and sweep grids.

A config file is flat ``key = value`` pairs plus an optional ``[sweep]``
table mapping axis names to value lists::

    eta_s = 0.8
    L = 1000
    n = "optimal"

    [sweep]
    epsilon_CN = [1e-5, 2.6e-4, 5.1e-4]
"""

from __future__ import annotations

import itertools
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .rates import PARAM_FIELDS, REPORT_FIELDS, TOPOLOGY_FIELDS, ChainTopology, ParameterError, RepeaterParams

MAX_SWEEP_POINTS = 10**6
MODES = ("abstract", "microscopic")
SWEEP_AXES = PARAM_FIELDS + TOPOLOGY_FIELDS


class ConfigError(ValueError):
    """Unreadable or invalid configuration; ``field`` names the offending key when known."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class RunConfig:
    params: RepeaterParams = field(default_factory=RepeaterParams)
    L: float = 1000.0
    n: int | str = "optimal"
    n_m: int = 10
    n_s: int = 5
    n_range: tuple[int, int] = (1, 12)
    trials: int = 100_000
    seed: int = 0
    mode: str = "abstract"
    p0: float | None = None
    q: float | None = None
    outputs: tuple[str, ...] = REPORT_FIELDS
    sweep: tuple[tuple[str, tuple], ...] = ()

    def __post_init__(self):
        if not (self.n == "optimal" or (isinstance(self.n, int) and not isinstance(self.n, bool) and self.n >= 1)):
            raise ConfigError(f"n: must be a positive integer or \"optimal\", got {self.n!r}", "n")
        lo, hi = self.n_range
        if not (isinstance(lo, int) and isinstance(hi, int) and 1 <= lo <= hi):
            raise ConfigError(f"n_range: invalid range {list(self.n_range)!r}", "n_range")
        if not (isinstance(self.trials, int) and self.trials >= 1):
            raise ConfigError(f"trials: must be an integer >= 1, got {self.trials!r}", "trials")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {self.seed!r}", "seed")
        if self.mode not in MODES:
            raise ConfigError(f"mode: must be one of {MODES}, got {self.mode!r}", "mode")
        for name in ("p0", "q"):
            v = getattr(self, name)
            if v is not None and not (isinstance(v, (int, float)) and 0.0 <= v <= 1.0):
                raise ConfigError(f"{name}: must be in [0, 1], got {v!r}", name)
        for out in self.outputs:
            if out not in REPORT_FIELDS:
                raise ConfigError(f"outputs: unknown report field {out!r}", "outputs")
        for name, values in self.sweep:
            if name not in SWEEP_AXES:
                raise ConfigError(f"sweep.{name}: unknown parameter", f"sweep.{name}")
            if len(values) == 0:
                raise ConfigError(f"sweep.{name}: empty axis", f"sweep.{name}")
        self.topology(self.n if isinstance(self.n, int) else 1)

    def topology(self, n: int | None = None) -> ChainTopology:
        n = self.n if n is None else n
        return ChainTopology(L=self.L, n=n, n_m=self.n_m, n_s=self.n_s)

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    @property
    def sweep_points(self) -> int:
        return int(np.prod([len(v) for _, v in self.sweep], dtype=object)) if self.sweep else 1

    def grid(self):
        """Yield (axis values, point config) in lexicographic axis order."""
        names = [name for name, _ in self.sweep]
        for combo in itertools.product(*(values for _, values in self.sweep)):
            yield combo, self.apply(dict(zip(names, combo)))

    def apply(self, updates: dict) -> "RunConfig":
        return from_dict({**to_dict(self), **updates}, base=None)

    def to_toml(self) -> str:
        return tomli_w.dumps(to_dict(self))


_SCALAR_KEYS = ("L", "n", "n_m", "n_s", "n_range", "trials", "seed", "mode", "p0", "q", "outputs")
KNOWN_KEYS = frozenset(PARAM_FIELDS) | frozenset(_SCALAR_KEYS) | {"sweep"}


def to_dict(cfg: RunConfig) -> dict:
    d = dict(asdict(cfg.params))
    for key in _SCALAR_KEYS:
        v = getattr(cfg, key)
        if v is None:
            continue
        d[key] = list(v) if isinstance(v, tuple) else v
    if cfg.sweep:
        d["sweep"] = {name: list(values) for name, values in cfg.sweep}
    return d


def _number(key: str, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}", key)
    return v


def from_dict(d: dict, base: RunConfig | None = None) -> RunConfig:
    """Build a config from a parsed mapping; keys absent from ``d`` come from ``base``."""
    base = base or RunConfig()
    unknown = sorted(set(d) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}", unknown[0])
    try:
        pkw = {k: float(_number(k, d[k])) for k in PARAM_FIELDS if k in d}
        params = replace(base.params, **pkw)
        kw = {}
        for key in _SCALAR_KEYS:
            if key not in d:
                continue
            v = d[key]
            if key in ("n_range", "outputs"):
                if not isinstance(v, (list, tuple)):
                    raise ConfigError(f"{key}: expected a list, got {v!r}", key)
                v = tuple(v)
            elif key == "L":
                v = float(_number(key, v))
            elif key in ("p0", "q"):
                v = None if v is None else float(_number(key, v))
            kw[key] = v
        if "sweep" in d:
            if not isinstance(d["sweep"], dict):
                raise ConfigError("sweep: expected a table", "sweep")
            axes = []
            for name, values in d["sweep"].items():
                if not isinstance(values, (list, tuple)):
                    raise ConfigError(f"sweep.{name}: expected a list of values", f"sweep.{name}")
                axes.append((name, tuple(values)))
            kw["sweep"] = tuple(axes)
        return replace(base, params=params, **kw)
    except ParameterError as exc:
        raise ConfigError(str(exc), exc.field) from exc
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_toml(text: str, source: str = "<config>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line, col = getattr(exc, "lineno", None), getattr(exc, "colno", None)
        where = f"{source}:{line}:{col}" if line is not None else source
        raise ConfigError(f"{where}: {getattr(exc, 'msg', exc)}") from exc


def load_file(path: str | Path) -> dict:
    """Read a TOML config, or the ``config`` block of a run manifest (``.json``)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(doc, dict) or "config" not in doc:
            raise ConfigError(f"{path}: not a run manifest")
        return doc["config"]
    return parse_toml(text, str(path))


def parse_override(item: str) -> tuple[str, object]:
    """``KEY=VALUE`` with VALUE read as a TOML value (bare words become strings)."""
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key, value


def apply_overrides(d: dict, items: list[str]) -> dict:
    d = {k: (dict(v) if isinstance(v, dict) else v) for k, v in d.items()}
    for item in items:
        key, value = parse_override(item)
        if key.startswith("sweep."):
            d.setdefault("sweep", {})[key[len("sweep.") :]] = value if isinstance(value, list) else [value]
        else:
            d[key] = value
    return d


def _frange(start: float, stop: float, step: float) -> list[float]:
    k = int(round((stop - start) / step))
    return [float(round(start + i * step, 12)) for i in range(k + 1)]


EPS_AXIS = _frange(1e-5, 5.1e-4, 2.5e-5)
ETA_S_AXIS = _frange(0.7, 0.9, 0.01)
T_COH_AXIS = _frange(1.0, 51.0, 2.5)
L_AXIS = _frange(200.0, 1000.0, 50.0)

# sweep axes only; no reference curves are stored
PRESETS = {
    "fig5a": {"n_m": 10, "sweep": {"L": L_AXIS, "n": list(range(1, 13))}},
    "fig5b": {"n_m": 10, "n": "optimal", "sweep": {"t_coh": [1.0, 10.0, 51.0], "L": L_AXIS}},
    "fig5c": {"n_m": 10, "p_CN": 0.95, "eta_d": 0.95, "eta_c": 0.95, "sweep": {"L": L_AXIS, "n": list(range(1, 13))}},
    "fig6": {"L": 1000.0, "n_m": 10, "n": "optimal", "sweep": {"eta_s": ETA_S_AXIS, "epsilon_CN": EPS_AXIS}},
    "fig7": {"L": 1000.0, "n_m": 10, "n": "optimal", "sweep": {"t_coh": T_COH_AXIS, "epsilon_CN": EPS_AXIS}},
    "fig8": {"n_m": 10, "n": "optimal", "outputs": ["R_hz", "R_eff_hz"], "sweep": {"L": L_AXIS}},
    "figA3": {"L": 1000.0, "n_m": 100, "n": "optimal", "sweep": {"eta_s": ETA_S_AXIS, "epsilon_CN": EPS_AXIS}},
    "figA4": {"L": 1000.0, "n_m": 100, "n": "optimal", "sweep": {"t_coh": T_COH_AXIS, "epsilon_CN": EPS_AXIS}},
}

TABLE3_ETA_S = (0.7, 0.8, 0.9)
TABLE3_EPSILON = (1e-5, 2.6e-4, 5.1e-4)
TABLE3_EXPECTED = ((6, 6, 5), (7, 6, 5), (7, 6, 6))


def resolve(config_path: str | None = None, preset: str | None = None, overrides: list[str] | None = None) -> RunConfig:
    """Defaults, then preset, then config file, then ``--set`` overrides."""
    d: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}", "preset")
        d.update(PRESETS[preset])
    if config_path is not None:
        loaded = load_file(config_path)
        d.update(loaded)
    d = apply_overrides(d, overrides or [])
    return from_dict(d)

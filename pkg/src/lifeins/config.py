"""Flat ``key = value`` configuration files.

Keys are the :class:`ModelParams` field names, the simulation settings, an
optional sweep and the mortality grid.  ``#`` starts a comment.  Unknown or
repeated keys are errors, and every error names the offending line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .model import ModelParams

CASES = ("predetermined", "controlled", "earmarked-pre", "earmarked-ctl", "gompertz")

SIM_KEYS = {"n_paths": int, "dt": float, "horizon_T": float, "seed": int, "antithetic": bool,
            "dt_max": float, "stretch": float, "tail": float}
SWEEP_KEYS = {"sweep_var": str, "sweep_lo": float, "sweep_hi": float, "sweep_n": int}
GRID_KEYS = {"m_grid_lo": float, "m_grid_hi": float, "m_grid_n": int}
OTHER_KEYS = {"case": str}

SWEEPABLE = ("x0", "y0", "bequest_B", "gamma", "l", "earmark_q", "m")


@dataclass(frozen=True)
class Sweep:
    var: str
    lo: float
    hi: float
    n: int

    def values(self) -> list[float]:
        if self.n == 1:
            return [self.lo]
        step = (self.hi - self.lo) / (self.n - 1)
        return [self.lo + i * step for i in range(self.n)]


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    case: str = "predetermined"
    sim: dict = field(default_factory=dict)
    sweep: Sweep | None = None
    m_grid: tuple[float, float, int] = (0.005, 0.1, 16)
    source: str = "<defaults>"


def _convert(kind, raw: str, key: str, lineno: int):
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind is int:
            return int(text)
        if kind is float:
            v = float(text)
            if not math.isfinite(v):
                raise ValueError
            return v
        return text
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} = {raw.strip()!r} is not a valid {kind.__name__}") from None


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    model_keys = {name: float for name in ModelParams.field_names()}
    known = {**model_keys, **SIM_KEYS, **SWEEP_KEYS, **GRID_KEYS, **OTHER_KEYS}
    seen: dict[str, int] = {}
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: {key!r} already set on line {seen[key]}")
        if not raw:
            raise ConfigError(f"line {lineno}: {key!r} has no value")
        seen[key] = lineno
        values[key] = _convert(known[key], raw, key, lineno)

    def where(key: str) -> str:
        return f"line {seen[key]}" if key in seen else source

    params = ModelParams(**{k: v for k, v in values.items() if k in model_keys})
    case = values.get("case", "predetermined")
    if case not in CASES:
        raise ConfigError(f"{where('case')}: case must be one of {', '.join(CASES)}")
    sim = {k: v for k, v in values.items() if k in SIM_KEYS}
    for key in ("dt", "horizon_T", "dt_max", "stretch", "tail"):
        if key in sim and not sim[key] > 0:
            raise ConfigError(f"{where(key)}: {key} must be positive")
    if "n_paths" in sim and sim["n_paths"] < 1:
        raise ConfigError(f"{where('n_paths')}: n_paths must be at least 1")

    sweep = None
    present = [k for k in SWEEP_KEYS if k in values]
    if present:
        missing = [k for k in SWEEP_KEYS if k not in values]
        if missing:
            raise ConfigError(f"{where(present[0])}: sweep needs {', '.join(missing)} as well")
        sweep = Sweep(values["sweep_var"], values["sweep_lo"], values["sweep_hi"], values["sweep_n"])
        if sweep.var not in SWEEPABLE:
            raise ConfigError(f"{where('sweep_var')}: cannot sweep {sweep.var!r}; "
                              f"choose from {', '.join(SWEEPABLE)}")
        if sweep.n < 1 or not sweep.hi >= sweep.lo:
            raise ConfigError(f"{where('sweep_n')}: need sweep_n >= 1 and sweep_hi >= sweep_lo")

    lo = values.get("m_grid_lo", 0.005)
    hi = values.get("m_grid_hi", 0.1)
    n = values.get("m_grid_n", 16)
    if not (0 < lo < hi) or n < 2:
        raise ConfigError(f"{where('m_grid_lo')}: need 0 < m_grid_lo < m_grid_hi and m_grid_n >= 2")
    return RunConfig(params=params, case=case, sim=sim, sweep=sweep, m_grid=(lo, hi, n), source=source)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))

"""Service configuration: flat key=value file plus environment overrides.

Python 3.10 has no stdlib TOML reader, so the file format is plain
``key = value`` lines with ``#`` comments.  Every key can also be set via
the environment as ``CDDSAT_<KEY>`` (uppercased), which wins over the
file.  Unknown keys are rejected so typos surface immediately.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from .estimator import DEFAULT_STEP_FRACTION
from .sdd import SddParams
from .timing import DEFAULT_MEAN_SCAN_SECONDS

__all__ = ["ServiceConfig", "load_config", "ENV_PREFIX"]

ENV_PREFIX = "CDDSAT_"

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8077
    data_dir: str = "data"
    schedule: str = "inset1"
    sampler: str = "uniform"
    seed: int = 0
    scan_mode: str = "sequential"
    mean_scan_seconds: float = DEFAULT_MEAN_SCAN_SECONDS
    sorting_seconds: float = 0.0
    metric: str = "euclidean"
    step_fraction: float = DEFAULT_STEP_FRACTION
    sdd_threshold: int = 128
    sdd_weight_fraction: float = 0.5
    sdd_weight_roughness: float = 0.25
    sdd_weight_depth: float = 0.25
    sdd_cap_roughness_mm: float = 5.0
    sdd_cap_depth_mm: float = 20.0
    knowledge_path: str = ""
    verify_knowledge: bool = False
    idle_timeout_seconds: float = 0.0  # 0 disables idle expiry

    def sdd_params(self) -> SddParams:
        return SddParams(
            threshold=self.sdd_threshold,
            weight_fraction=self.sdd_weight_fraction,
            weight_roughness=self.sdd_weight_roughness,
            weight_depth=self.sdd_weight_depth,
            cap_roughness_mm=self.sdd_cap_roughness_mm,
            cap_depth_mm=self.sdd_cap_depth_mm,
        )


def _coerce(name: str, kind: type, raw: str):
    raw = raw.strip()
    if kind is str:
        return raw
    if kind is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"config key {name}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError:
        raise ValueError(
            f"config key {name}: expected {kind.__name__}, got {raw!r}"
        ) from None


def _parse_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        values[key.strip().lower()] = value.strip()
    return values


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
) -> ServiceConfig:
    env = os.environ if env is None else env
    by_name = {f.name: f.type for f in fields(ServiceConfig)}
    kinds = {
        name: {"str": str, "int": int, "float": float, "bool": bool}[tp]
        for name, tp in by_name.items()
    }
    raw: dict[str, str] = {}
    if path is not None:
        raw.update(_parse_file(Path(path)))
    for name in by_name:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            raw[name] = env[env_key]
    unknown = set(raw) - set(by_name)
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    values = {name: _coerce(name, kinds[name], text) for name, text in raw.items()}
    return ServiceConfig(**values)

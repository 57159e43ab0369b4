"""Flat ``key = value`` configuration shared by every command."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {n}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def _parse_bool(value: str) -> bool:
    v = value.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


@dataclass
class RunConfig:
    seed: int = 0
    mode: str = "streaming"
    # cells
    cell_size: int = 128
    spatial_radius: int = 1
    temporal_radius: int = 1
    # sampler
    alpha: float = 0.1
    beta: float = 10.0
    gamma: float = 1e-5
    iters_per_step: int = 10
    batch_sweeps: int = 10
    stop_after: int = -1
    # scoring
    max_peaks: int = 8
    min_separation: int = 20
    burn_in: int = 0
    # eval
    topic: str = "auto"
    # features
    grid_step: int = 16
    hue_bins: int = 12
    intensity_bins: int = 8
    texton_codewords: int = 1000
    codebook_iters: int = 100
    codebook_samples: int = 20000
    motion_bins: int = 0
    background: bool = False
    bg_density_ratio: float = 0.25
    bg_components: int = 3
    bg_threshold: float = 2.5
    bg_fraction: float = 0.7
    bg_learning_rate: float = 0.01
    bg_variance_floor: float = 4.0
    bg_initial_variance: float = 225.0

    def validate(self) -> "RunConfig":
        if self.mode not in ("streaming", "batch"):
            raise ConfigError(f"mode must be 'streaming' or 'batch', got {self.mode!r}")
        for name in ("cell_size", "grid_step", "hue_bins", "intensity_bins", "texton_codewords", "bg_components"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("alpha", "beta", "gamma"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("spatial_radius", "temporal_radius", "iters_per_step", "batch_sweeps",
                     "min_separation", "burn_in", "motion_bins", "max_peaks"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0 <= self.bg_density_ratio <= 1:
            raise ConfigError("bg_density_ratio must lie in [0, 1]")
        return self

    def update(self, values: dict[str, str]) -> "RunConfig":
        types = {f.name: f.type for f in dataclasses.fields(self)}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kind = types[key]
            try:
                if kind == "bool":
                    value = _parse_bool(raw)
                elif kind == "int":
                    value = int(raw)
                elif kind == "float":
                    value = float(raw)
                else:
                    value = raw
            except ValueError:
                raise ConfigError(f"bad value for {key}: {raw!r}") from None
            setattr(self, key, value)
        return self

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: dict[str, str] | None = None) -> "RunConfig":
        cfg = cls()
        if path is not None:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            cfg.update(parse_kv(text))
        if overrides:
            cfg.update(overrides)
        return cfg.validate()

    def dump(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

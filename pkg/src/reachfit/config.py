"""Pipeline configuration and its flat key-value file format.

Every report embeds the serialized config so runs are reproducible. Unknown
keys in a config file are errors.
"""

import dataclasses
from dataclasses import dataclass

from .errors import ConfigError
from .signal import InlierConfig


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for the batch pipeline; defaults match the published procedure."""

    filter_cutoff_hz: float | None = 10.0
    filter_order: int = 4
    inlier_delta_pct: float = 20.0
    inlier_delta_mm: float = 5.0
    inlier_sigma_k: float = 3.0
    dmj_ratio_min: float = 0.05
    dmj_ratio_max: float = 1.0
    dmj_grid_points: int = 40
    dmj_ratio_tol: float = 1e-3
    dmj_decouple: str = "world"  # world | plane
    dmj_correspondence: str = "curve3d"  # curve3d | plane
    parabola_tol: float = 1e-6
    bc_mode: str = "rest"  # rest | estimated
    marker: str = "object"  # object | giver
    min_peak_speed: float = 10.0
    fit_curve_samples: int = 2048
    error_curve_samples: int = 4096
    jobs: int = 1
    exclude_trials: tuple = ()

    def __post_init__(self):
        if self.dmj_decouple not in ("world", "plane"):
            raise ConfigError(f"dmj_decouple must be world|plane, got {self.dmj_decouple!r}")
        if self.dmj_correspondence not in ("curve3d", "plane"):
            raise ConfigError(
                f"dmj_correspondence must be curve3d|plane, got {self.dmj_correspondence!r}"
            )
        if self.bc_mode not in ("rest", "estimated"):
            raise ConfigError(f"bc_mode must be rest|estimated, got {self.bc_mode!r}")
        if self.marker not in ("object", "giver"):
            raise ConfigError(f"marker must be object|giver, got {self.marker!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not 0 < self.dmj_ratio_min < self.dmj_ratio_max <= 1.0:
            raise ConfigError("dmj ratio bounds must satisfy 0 < min < max <= 1")

    def inlier_config(self):
        return InlierConfig(
            delta_pct=self.inlier_delta_pct,
            delta_mm=self.inlier_delta_mm,
            sigma_k=self.inlier_sigma_k,
        )


def _coerce(name, raw, current):
    raw = raw.strip()
    if name == "filter_cutoff_hz":
        return None if raw.lower() in ("none", "off") else float(raw)
    if name == "exclude_trials":
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def parse_config(text):
    """PipelineConfig from flat ``key = value`` lines (# comments allowed)."""
    defaults = PipelineConfig()
    known = {f.name: getattr(defaults, f.name) for f in dataclasses.fields(defaults)}
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        try:
            overrides[key] = _coerce(key, value, known[key])
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return PipelineConfig(**overrides)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg):
    """Flat key-value text for embedding in reports (parse_config inverse)."""
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if f.name == "filter_cutoff_hz" and value is None:
            value = "none"
        elif f.name == "exclude_trials":
            value = ",".join(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"

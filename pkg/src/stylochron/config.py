"""Pipeline configuration.

Defaults < config file < command-line flags. The config file is a flat
``key = value`` text format with ``#`` comments; keys are listed in the
README. The only environment override is STYLOCHRON_OUT_DIR (output
directory), by design.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

OUT_DIR_ENV = "STYLOCHRON_OUT_DIR"


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return (int(w), int(h))
    except ValueError:
        raise ConfigError(f"grid must look like '70x70', got {text!r}") from None


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(",") if p.strip())


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


def _parse_threshold(text: str) -> int | str:
    return text if text == "otsu" else int(text)


def _parse_crop(text: str) -> tuple[int, int, int, int]:
    parts = _parse_int_list(text)
    if len(parts) != 4:
        raise ConfigError(f"crop needs 'left,top,right,bottom', got {text!r}")
    return parts  # type: ignore[return-value]


@dataclass(frozen=True)
class PipelineConfig:
    manifest: Path | None = None
    model: Path | None = None
    out_dir: Path = Path("out")
    seed: int | None = None
    # ink
    binarize_threshold: int | str = "otsu"
    crop: tuple[int, int, int, int] | None = None
    fragment_smooth: int = 0
    contour_samples: int = 200
    contour_encoding: str = "xy"
    # style features
    codebook_grid: tuple[int, int] = (70, 70)
    codebook_epochs: int = 50
    hinge_legs: tuple[int, ...] = (7,)
    hinge_q: int = 19
    weight_allograph: float = 1.0
    weight_hinge: float = 1.0
    # timeline
    timeline_start: float = -310.0
    timeline_end: float = 200.0
    bin_width: float = 10.0
    # augmentation
    morph_amplitude: float = 1.0
    morph_sigma: float = 8.0
    augment_copies: int = 0
    balance_plan: Path | None = None
    # balancing / reporting
    balance_thresholds: tuple[float, ...] = (0.05, 0.10, 0.20)
    minor_share: float = 0.04
    gog_draws: int = 1000
    # regression
    regression_mode: str = "evidence"
    alpha: float = 1.0
    beta: float = 1.0
    pca_dims: int = 20
    workers: int = 1

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("a seed is mandatory (reproducibility); set 'seed' or --seed")
        return int(self.seed)

    def require_manifest(self) -> Path:
        if self.manifest is None:
            raise ConfigError("no corpus manifest configured")
        if not Path(self.manifest).exists():
            raise ConfigError(f"manifest not found: {self.manifest}")
        return Path(self.manifest)

    def require_model(self) -> Path:
        if self.model is None:
            raise ConfigError("no model file configured")
        if not Path(self.model).exists():
            raise ConfigError(f"model file not found: {self.model}")
        return Path(self.model)


_CASTERS = {
    "manifest": Path,
    "model": Path,
    "out_dir": Path,
    "seed": int,
    "binarize_threshold": _parse_threshold,
    "crop": _parse_crop,
    "fragment_smooth": int,
    "contour_samples": int,
    "contour_encoding": str,
    "codebook_grid": _parse_grid,
    "codebook_epochs": int,
    "hinge_legs": _parse_int_list,
    "hinge_q": int,
    "weight_allograph": float,
    "weight_hinge": float,
    "timeline_start": float,
    "timeline_end": float,
    "bin_width": float,
    "morph_amplitude": float,
    "morph_sigma": float,
    "augment_copies": int,
    "balance_plan": Path,
    "balance_thresholds": _parse_float_list,
    "minor_share": float,
    "gog_draws": int,
    "regression_mode": str,
    "alpha": float,
    "beta": float,
    "pca_dims": int,
    "workers": int,
}

_PATH_KEYS = ("manifest", "model", "out_dir", "balance_plan")


def parse_config_file(path: str | Path) -> dict:
    """Read a key=value config file into an override dict.

    Relative paths are resolved against the config file's directory.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    overrides: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CASTERS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            parsed = _CASTERS[key](value)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
        if key in _PATH_KEYS:
            parsed = (path.parent / parsed).resolve()
        overrides[key] = parsed
    return overrides


def build_config(
    config_file: str | Path | None = None,
    **cli_overrides,
) -> PipelineConfig:
    """Merge defaults, config file, environment and CLI flags."""
    cfg = PipelineConfig()
    if config_file is not None:
        cfg = replace(cfg, **parse_config_file(config_file))
    env_out = os.environ.get(OUT_DIR_ENV)
    if env_out:
        cfg = replace(cfg, out_dir=Path(env_out))
    cleaned = {k: v for k, v in cli_overrides.items() if v is not None}
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(cleaned) - known
    if unknown:
        raise ConfigError(f"unknown config overrides: {sorted(unknown)}")
    if cleaned:
        cfg = replace(cfg, **cleaned)
    return cfg

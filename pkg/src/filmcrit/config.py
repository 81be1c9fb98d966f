"""Run configuration: one JSON document shared by every subcommand.

See the README for the schema. Unknown top-level keys are rejected so typos
surface as configuration errors rather than silently ignored settings.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .budget import DEFAULT_T_MAX, DEFAULT_THRESHOLD
from .campaign import CampaignGrid
from .model import FilmParams, SignalModel
from .synth import ApparatusParams

OUT_ENV = "FILMCRIT_OUT"
TOP_LEVEL_KEYS = {
    "film",
    "nominal_film",
    "signal",
    "apparatus",
    "model_grid",
    "campaign",
    "fit",
    "budget",
    "detect",
    "bridge",
    "seed",
    "thresholds",
    "output_dir",
    "description",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    detection: float = DEFAULT_THRESHOLD
    waive_validity: bool = False
    t_max: float = DEFAULT_T_MAX


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path
    film: FilmParams | None
    nominal_film: FilmParams | None
    signal: SignalModel
    apparatus: ApparatusParams
    seed: int | None
    thresholds: Thresholds
    output_dir: str | None
    sections: dict[str, dict] = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def require_film(self) -> FilmParams:
        if self.film is None:
            raise ConfigError("config needs a 'film' section")
        return self.film

    def require_seed(self, override: int | None) -> int:
        seed = override if override is not None else self.seed
        if seed is None:
            raise ConfigError("a seed is required: pass --seed or set 'seed' in the config")
        return int(seed)

    def campaign_grid(self) -> CampaignGrid:
        return CampaignGrid.from_dict(self.section("campaign"))

    def model_t_grid(self) -> np.ndarray:
        g = self.section("model_grid")
        return grid_from(g, default=(0.9, 1.0, 101))

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def grid_from(spec: Any, default: tuple[float, float, int]) -> np.ndarray:
    """A list of values, or {t_min, t_max, n} for an inclusive linspace."""
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    spec = spec or {}
    lo = float(spec.get("t_min", default[0]))
    hi = float(spec.get("t_max", default[1]))
    n = int(spec.get("n", default[2]))
    if n < 1 or hi < lo:
        raise ConfigError(f"invalid grid {spec!r}")
    return np.linspace(lo, hi, n)


def output_dir(cli_out: str | None, cfg: RunConfig | None) -> Path:
    """--out wins, then $FILMCRIT_OUT, then the config's output_dir, then ./out."""
    if cli_out:
        return Path(cli_out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if cfg is not None and cfg.output_dir:
        return cfg.resolve(cfg.output_dir)
    return Path("out")


def parse_config(raw: dict, base_dir: Path | str = ".") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base_dir = Path(base_dir)
    try:
        film = FilmParams.from_dict(raw["film"]) if "film" in raw else None
        nominal = FilmParams.from_dict(raw["nominal_film"]) if "nominal_film" in raw else None
        signal = SignalModel.from_dict(raw.get("signal", {"kind": "single_film"}), base_dir)
        apparatus = ApparatusParams.from_dict(raw.get("apparatus", {}))
        th = raw.get("thresholds", {})
        thresholds = Thresholds(
            detection=float(th.get("detection", DEFAULT_THRESHOLD)),
            waive_validity=bool(th.get("waive_validity", False)),
            t_max=float(th.get("t_max", DEFAULT_T_MAX)),
        )
    except FileNotFoundError as exc:
        raise ConfigError(f"referenced file not found: {exc.filename}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    seed = raw.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    sections = {k: raw.get(k, {}) for k in ("model_grid", "campaign", "fit", "budget", "detect", "bridge")}
    return RunConfig(
        raw=raw,
        base_dir=base_dir,
        film=film,
        nominal_film=nominal,
        signal=signal,
        apparatus=apparatus,
        seed=seed,
        thresholds=thresholds,
        output_dir=raw.get("output_dir"),
        sections=sections,
    )


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(raw, path.parent)


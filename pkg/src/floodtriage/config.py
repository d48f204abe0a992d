"""Flat key=value pipeline configuration.

One `key = value` pair per line; blank lines and `#` comments ignored.
Unknown keys are errors so typos fail loudly. Paths are resolved relative
to the config file's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .detect import (
    CHANNEL_BCR,
    CHANNEL_CCI,
    CHANNEL_HAND,
    DEFAULT_BCR_FLOOD_OFFSET_DB,
    DEFAULT_CCI_FLOOD_OFFSET,
    DetectionConfig,
)
from .errors import ParseError
from .pipeline import PipelineParams
from .ranking import TierBoundaries

_CHANNELS = (CHANNEL_BCR, CHANNEL_CCI, CHANNEL_HAND)


@dataclass
class PipelineConfig:
    # input paths; which are required depends on the enabled channels
    dem: Optional[str] = None
    pre: list[str] = field(default_factory=list)
    post: Optional[str] = None
    coh_pre: Optional[str] = None
    coh_co: Optional[str] = None
    urban: Optional[str] = None
    drainage: Optional[str] = None
    permanent_water: Optional[str] = None
    reference: Optional[str] = None
    parcels: Optional[str] = None
    truth_mask: Optional[str] = None
    truth_depth: Optional[str] = None
    truth_properties: Optional[str] = None
    output_dir: str = "out"
    sar_date: str = "1970-01-01"
    seed: Optional[int] = None

    # detection
    channels: tuple[str, ...] = _CHANNELS
    bcr_sigma_mult: float = 2.0
    cci_threshold: float = 0.30
    hand_threshold_m: float = 10.0
    posterior_threshold: float = 0.50
    prior_flood: float = 0.10
    bcr_flood_offset_db: float = DEFAULT_BCR_FLOOD_OFFSET_DB
    cci_flood_offset: float = DEFAULT_CCI_FLOOD_OFFSET
    apply_cci_premask: bool = False
    speckle_kernel: int = 5

    # depth
    n_sample: int = 500
    n_mc: int = 100
    dem_sigma_m: float = 0.5
    corr_length_m: float = 250.0
    decimation: int = 4

    # scoring
    lambda_m: float = 1.0
    theta_damage_usd: float = 5000.0
    rescale: float = 0.94
    curve_file: Optional[str] = None

    # tiers
    tier_t1: float = 0.40
    tier_t2: float = 0.15
    tier_c3_min: float = 0.70

    def to_params(self, seed: Optional[int] = None) -> PipelineParams:
        if seed is None:
            seed = self.seed
        if seed is None:
            raise ParseError("seed is mandatory (config key 'seed' or --seed)")
        detection = DetectionConfig(
            bcr_sigma_mult=self.bcr_sigma_mult,
            cci_threshold=self.cci_threshold,
            hand_threshold_m=self.hand_threshold_m,
            posterior_threshold=self.posterior_threshold,
            prior_flood=self.prior_flood,
            channels_enabled=frozenset(self.channels),
            bcr_flood_offset_db=self.bcr_flood_offset_db,
            cci_flood_offset=self.cci_flood_offset,
            apply_cci_premask=self.apply_cci_premask,
        )
        return PipelineParams(
            detection=detection,
            speckle_kernel=self.speckle_kernel,
            n_sample=self.n_sample,
            n_mc=self.n_mc,
            dem_sigma_m=self.dem_sigma_m,
            corr_length_m=self.corr_length_m,
            lambda_m=self.lambda_m,
            theta_damage_usd=self.theta_damage_usd,
            rescale=self.rescale,
            boundaries=TierBoundaries(self.tier_t1, self.tier_t2, self.tier_c3_min),
            curve_file=self.curve_file,
            decimation=self.decimation,
            seed=int(seed),
        )


_PATH_KEYS = ("dem", "post", "coh_pre", "coh_co", "urban", "drainage",
              "permanent_water", "reference", "parcels", "truth_mask",
              "truth_depth", "truth_properties", "curve_file")


def _coerce(name: str, kind, raw: str):
    if kind is bool or kind == "bool":
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise ValueError(f"bad boolean {raw!r}")
    return kind(raw)


def read_config(path) -> PipelineConfig:
    path = Path(path)
    base = path.parent
    known = {f.name: f for f in fields(PipelineConfig)}
    cfg = PipelineConfig()
    for lineno, line in enumerate(path.read_text().split("\n"), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{path.name} line {lineno}: expected key = value")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in known:
            raise ParseError(f"{path.name} line {lineno}: unknown key {key!r}")
        try:
            if key == "pre":
                value = [str(base / p.strip()) for p in raw.split(",") if p.strip()]
            elif key == "channels":
                chans = tuple(c.strip() for c in raw.split(",") if c.strip())
                bad = [c for c in chans if c not in _CHANNELS]
                if bad:
                    raise ValueError(f"unknown channels {bad}")
                value = chans
            elif key in _PATH_KEYS:
                value = str(base / raw)
            elif key == "output_dir":
                value = str(base / raw)
            elif key == "sar_date":
                value = raw
            elif key == "seed":
                value = int(raw)
            elif key == "apply_cci_premask":
                value = _coerce(key, bool, raw)
            elif key in ("speckle_kernel", "n_sample", "n_mc", "decimation"):
                value = int(raw)
            else:
                value = float(raw)
        except ValueError as exc:
            raise ParseError(f"{path.name} line {lineno}: {exc}") from exc
        setattr(cfg, key, value)
    return cfg


def write_config(cfg: PipelineConfig, path) -> None:
    """Serialize with paths relative to the config file's directory."""
    base = Path(path).parent.resolve()

    def rel(p):
        p = Path(p).resolve()
        try:
            return p.relative_to(base).as_posix()
        except ValueError:
            return str(p)

    lines = []
    for f in fields(PipelineConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if f.name == "pre":
            if not value:
                continue
            value = ",".join(rel(p) for p in value)
        elif f.name == "channels":
            value = ",".join(value)
        elif f.name in _PATH_KEYS or f.name == "output_dir":
            value = rel(value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")

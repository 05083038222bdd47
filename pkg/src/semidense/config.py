"""Run configuration: model widths, matching thresholds, training schedule.

Values load from a flat ``key = value`` text file with ``[section]`` headers;
every key can also be overridden by a CLI flag of the same name.  The seed is
additionally overridable through the SEMIDENSE_SEED environment variable.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field


@dataclass
class Config:
    # model
    channels: list = field(default_factory=lambda: [32, 64, 128, 256, 256])
    num_layers: int = 2          # interleaved self/cross rounds on deep features
    attn_scale: float = 20.0     # logit scale after query/key normalization
    heads: int = 8
    rope_base: float = 100.0
    scc_bins: int = 16           # per-axis soft-classification bins
    flow_blocks: int = 3
    injection: str = "gated"     # "gated" | "sum" (plain fusion fallback)

    # matching
    topk: int = 1024
    tau: float = 0.1
    theta_c: float = 5e-2
    theta_f: float = 1e-6

    # loss
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    lambda_c: float = 1.0
    lambda_f: float = 0.2
    pad_matches: int = 32

    # training
    lr: float = 2e-3
    weight_decay: float = 0.01
    batch_size: int = 1
    epochs: int = 30
    warmup_epochs: int = 3
    decay_start_epoch: int = 8
    decay_every_epochs: int = 4
    decay_factor: float = 0.5
    grad_clip: float = 1.0
    eval_every: int = 100
    early_stop_precision: float = 0.85
    early_stop_epe: float = 1.0

    # data
    seed: int = 0
    image_size: int = 256
    train_pairs: int = 64
    val_pairs: int = 16
    warp_rot_deg: float = 12.0
    warp_scale: float = 0.12
    warp_trans_px: float = 16.0
    warp_persp: float = 3e-5
    jitter_brightness: float = 0.06
    jitter_contrast: float = 0.1
    jitter_noise: float = 0.01

    def __post_init__(self):
        env_seed = os.environ.get("SEMIDENSE_SEED")
        if env_seed is not None:
            self.seed = int(env_seed)
        self.validate()

    def validate(self):
        if len(self.channels) != 5:
            raise ValueError(f"channel plan needs 5 entries, got {len(self.channels)}")
        if self.image_size % 32:
            raise ValueError(f"image_size {self.image_size} must be divisible by 32")
        if self.channels[4] % self.heads:
            raise ValueError(f"heads {self.heads} must divide model width {self.channels[4]}")
        if self.num_layers < 0 or self.attn_scale <= 0 or self.tau <= 0:
            raise ValueError("num_layers >= 0, attn_scale > 0 and tau > 0 required")
        if self.scc_bins < 2:
            raise ValueError("scc_bins must be at least 2")
        if self.injection not in ("gated", "sum"):
            raise ValueError(f"unknown injection mode '{self.injection}'")

    @property
    def model_dim(self) -> int:
        return self.channels[4]

    @property
    def head_dim(self) -> int:
        return self.channels[4] // self.heads


_SECTIONS = {
    "model": ["channels", "num_layers", "attn_scale", "heads", "rope_base", "scc_bins", "flow_blocks", "injection"],
    "matching": ["topk", "tau", "theta_c", "theta_f"],
    "loss": ["focal_alpha", "focal_gamma", "lambda_c", "lambda_f", "pad_matches"],
    "training": [
        "lr", "weight_decay", "batch_size", "epochs", "warmup_epochs", "decay_start_epoch",
        "decay_every_epochs", "decay_factor", "grad_clip", "eval_every",
        "early_stop_precision", "early_stop_epe",
    ],
    "data": [
        "seed", "image_size", "train_pairs", "val_pairs", "warp_rot_deg", "warp_scale",
        "warp_trans_px", "warp_persp", "jitter_brightness", "jitter_contrast", "jitter_noise",
    ],
}


def _parse_value(name: str, raw: str, current):
    raw = raw.strip()
    if name == "channels":
        return [int(v) for v in raw.replace("[", "").replace("]", "").split(",") if v.strip()]
    kind = type(current)
    if kind is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def load_config(path: str | None = None, overrides: dict | None = None) -> Config:
    """Build a Config from an optional file plus explicit overrides."""
    cfg = Config()
    fields = {f.name: f for f in dataclasses.fields(Config)}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line or line.startswith("["):
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value', got '{line}'")
                key, raw = (part.strip() for part in line.split("=", 1))
                if key not in fields:
                    raise ValueError(f"{path}:{lineno}: unknown config key '{key}'")
                setattr(cfg, key, _parse_value(key, raw, getattr(cfg, key)))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in fields:
            raise ValueError(f"unknown config key '{key}'")
        if isinstance(value, str):
            value = _parse_value(key, value, getattr(cfg, key))
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def save_config(cfg: Config, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for section, keys in _SECTIONS.items():
            fh.write(f"[{section}]\n")
            for key in keys:
                value = getattr(cfg, key)
                if key == "channels":
                    value = ",".join(str(c) for c in value)
                fh.write(f"{key} = {value}\n")
            fh.write("\n")


def config_to_dict(cfg: Config) -> dict:
    return dataclasses.asdict(cfg)


def config_from_dict(d: dict) -> Config:
    cfg = Config()
    for key, value in d.items():
        setattr(cfg, key, value)
    cfg.validate()
    return cfg

"""Run configuration: dimensions, schedule, paths, and ablation toggles.

Config files are flat JSON objects; unknown keys are rejected by name, and
command-line flags override file values which override defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .autodiff import ConfigError


@dataclass
class LrSchedule:
    """Anchored warmup followed by periodic halving.

    ``points`` maps epoch -> learning rate; values are linearly interpolated
    between anchors and held constant after the last one. From
    ``decay_start`` on, the rate is multiplied by ``decay_factor`` once per
    ``decay_every`` epochs, with no further decay past ``decay_stop``.
    """

    points: dict[int, float] = field(default_factory=lambda: {0: 0.0005, 4: 0.002})
    decay_start: int | None = 15
    decay_every: int = 2
    decay_factor: float = 0.5
    decay_stop: int = 20

    def __post_init__(self):
        if not self.points:
            raise ConfigError("lr schedule needs at least one anchor point")
        if any(e < 0 or lr <= 0 for e, lr in self.points.items()):
            raise ConfigError("lr anchors need epoch >= 0 and lr > 0")


def lr_at(schedule: LrSchedule, epoch: int) -> float:
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    anchors = sorted(schedule.points.items())
    if epoch <= anchors[0][0]:
        lr = anchors[0][1]
    elif epoch >= anchors[-1][0]:
        lr = anchors[-1][1]
    else:
        lr = anchors[-1][1]
        for (e0, v0), (e1, v1) in zip(anchors, anchors[1:]):
            if e0 <= epoch <= e1:
                lr = v0 + (v1 - v0) * (epoch - e0) / (e1 - e0)
                break
    if schedule.decay_start is not None and epoch >= schedule.decay_start:
        n_steps = (epoch - schedule.decay_start) // schedule.decay_every + 1
        max_steps = (schedule.decay_stop - schedule.decay_start) // schedule.decay_every + 1
        lr *= schedule.decay_factor ** min(n_steps, max_steps)
    return lr


@dataclass
class RunConfig:
    # dimensions
    d_v: int = 14
    d_q: int = 16
    d_w: int = 16
    d_h: int = 16
    d_j: int = 16
    d_mlp: int = 16
    n_heads: int = 4
    max_regions: int = 8
    max_len: int = 8
    # geometry
    far_threshold: float = 4.0
    geom_eps: float = 1e-3
    # training
    seed: int = 0
    batch_size: int = 32
    epochs: int = 50
    dropout: float = 0.2
    classifier_dropout: float = 0.5
    weight_norm: bool = False
    # ablations
    attention: bool = True
    q_adaptive: bool = True
    # inference ensemble
    ensemble_alpha: float = 0.4
    ensemble_beta: float = 0.3
    # learning-rate schedule
    lr_points: dict = field(default_factory=lambda: {0: 0.0005, 4: 0.002})
    lr_decay_start: int | None = 15
    lr_decay_every: int = 2
    lr_decay_factor: float = 0.5
    lr_decay_stop: int = 20
    # paths
    vocab_file: str | None = None
    answers_file: str | None = None
    train_file: str | None = None
    val_file: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = (
            "d_v", "d_q", "d_w", "d_h", "d_j", "d_mlp", "n_heads",
            "max_regions", "max_len", "batch_size", "epochs",
        )
        for key in positive:
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be a positive integer, got {getattr(self, key)}")
        if self.d_q % 2 != 0:
            raise ConfigError(f"d_q must be even for the bidirectional split, got {self.d_q}")
        if self.d_h % self.n_heads != 0:
            raise ConfigError(f"d_h={self.d_h} must be divisible by n_heads={self.n_heads}")
        if self.d_h % 8 != 0:
            raise ConfigError(f"d_h must be divisible by 8 for the geometry embedding, got {self.d_h}")
        if not self.far_threshold > 0:
            raise ConfigError(f"far_threshold must be positive, got {self.far_threshold}")
        if not self.geom_eps > 0:
            raise ConfigError(f"geom_eps must be positive, got {self.geom_eps}")
        for key in ("dropout", "classifier_dropout"):
            if not 0.0 <= getattr(self, key) < 1.0:
                raise ConfigError(f"{key} must lie in [0, 1), got {getattr(self, key)}")
        a, b = self.ensemble_alpha, self.ensemble_beta
        if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0 and a + b <= 1.0):
            raise ConfigError(f"ensemble weights invalid: alpha={a}, beta={b}")

    def schedule(self) -> LrSchedule:
        points = {int(k): float(v) for k, v in self.lr_points.items()}
        return LrSchedule(
            points=points,
            decay_start=self.lr_decay_start,
            decay_every=self.lr_decay_every,
            decay_factor=self.lr_decay_factor,
            decay_stop=self.lr_decay_stop,
        )

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        unknown = set(raw) - cls.field_names()
        if unknown:
            raise ConfigError(f"unknown config key: {sorted(unknown)[0]}")
        return cls(**raw)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def with_overrides(self, overrides: dict) -> "RunConfig":
        unknown = set(overrides) - self.field_names()
        if unknown:
            raise ConfigError(f"unknown config key: {sorted(unknown)[0]}")
        merged = dataclasses.asdict(self)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(merged)

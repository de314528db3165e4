"""Configuration dataclasses shared across the package."""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


@dataclass(frozen=True)
class CanvasConfig:
    W: int = 48
    H: int = 48
    Z: int = 3

    def __post_init__(self):
        if self.W < 4 or self.H < 4:
            raise ValueError(f"canvas W,H must be >= 4, got {self.W}x{self.H}")
        if self.Z < 1:
            raise ValueError(f"canvas Z must be >= 1, got {self.Z}")

    @property
    def diameter(self) -> int:
        """Largest anchor-to-anchor 3D Manhattan distance, in cells."""
        return (self.W - 1) + (self.H - 1) + 10 * (self.Z - 1)

    @property
    def n_anchors(self) -> int:
        return self.W * self.H * self.Z

    @classmethod
    def parse(cls, text: str) -> "CanvasConfig":
        """Parse ``"W,H,Z"`` or ``"WxHxZ"``."""
        parts = text.replace("x", ",").split(",")
        if len(parts) != 3:
            raise ValueError(f"canvas must be W,H,Z: {text!r}")
        return cls(*(int(p) for p in parts))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr_actor: float = 5e-4
    lr_critic: float = 5e-4
    weight_decay: float = 1e-4
    hidden: tuple[int, int] = (256, 256)
    seed: int = 0


@dataclass
class RunConfig:
    """Everything a CLI invocation may need; loaded from TOML, overridden by flags."""

    canvas: CanvasConfig = field(default_factory=CanvasConfig)
    k: int = 5
    epochs: int = 200
    lr_actor: float = 5e-4
    lr_critic: float = 5e-4
    batch_size: int = 64
    seed: int = 0
    count: int = 200
    samples: int = 3
    noise: float = 0.02
    jobs: int = 1
    select_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    hidden: tuple[int, int] = (256, 256)

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                           lr_actor=self.lr_actor, lr_critic=self.lr_critic,
                           hidden=tuple(self.hidden), seed=self.seed)

    @classmethod
    def from_toml(cls, path: str | Path) -> "RunConfig":
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(raw)
        if "canvas" in kw:
            c = kw["canvas"]
            kw["canvas"] = CanvasConfig(**c) if isinstance(c, dict) else CanvasConfig(*c)
        if "hidden" in kw:
            kw["hidden"] = tuple(int(v) for v in kw["hidden"])
        if "select_weights" in kw:
            kw["select_weights"] = tuple(float(v) for v in kw["select_weights"])
        return cls(**kw)

    def override(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import ConfigError


@dataclass(frozen=True)
class GbdtConfig:
    """Hyper-parameters of one boosted ensemble.

    The first five defaults are the values used for both stages of the
    two-stage model; the rest are conventional GBDT defaults.
    """

    max_depth: int = 6
    num_leaves: int = 10
    feature_fraction: float = 0.8
    bagging_fraction: float = 0.5
    learning_rate: float = 0.01
    num_rounds: int = 500
    early_stopping_rounds: int = 50
    max_bins: int = 255
    min_samples_leaf: int = 20
    lambda_l2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        checks = [
            (self.max_depth >= 1, "max_depth must be >= 1"),
            (self.num_leaves >= 2, "num_leaves must be >= 2"),
            (0.0 < self.feature_fraction <= 1.0, "feature_fraction must be in (0, 1]"),
            (0.0 < self.bagging_fraction <= 1.0, "bagging_fraction must be in (0, 1]"),
            (self.learning_rate > 0, "learning_rate must be > 0"),
            (self.num_rounds >= 1, "num_rounds must be >= 1"),
            (self.early_stopping_rounds >= 0, "early_stopping_rounds must be >= 0"),
            (2 <= self.max_bins <= 256, "max_bins must be in [2, 256]"),
            (self.min_samples_leaf >= 1, "min_samples_leaf must be >= 1"),
            (self.lambda_l2 >= 0, "lambda_l2 must be >= 0"),
            (0 <= self.seed < 2**64, "seed must be a 64-bit unsigned integer"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown GBDT parameters: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "GbdtConfig":
        return type(self)(**{**self.to_dict(), **changes})

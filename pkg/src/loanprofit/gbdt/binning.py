"""Quantile discretisation of feature columns into at most ``max_bins`` bins."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from ..errors import SchemaError, SizeError


@dataclass(frozen=True)
class BinMapper:
    """Per-feature thresholds; the bin of ``x`` is the number of thresholds below ``x``."""

    thresholds: List[np.ndarray]

    @property
    def n_features(self) -> int:
        return len(self.thresholds)

    @property
    def n_bins(self) -> np.ndarray:
        return np.array([len(t) + 1 for t in self.thresholds], dtype=np.int64)

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Bin indices, feature-major: result has shape ``(n_features, n_rows)``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise SchemaError(f"expected {self.n_features} feature columns, got shape {X.shape}")
        out = np.empty((self.n_features, X.shape[0]), dtype=np.uint8)
        for j, thr in enumerate(self.thresholds):
            out[j] = np.searchsorted(thr, X[:, j], side="left")
        return out


def _exact_thresholds(distinct: np.ndarray) -> np.ndarray:
    lower, upper = distinct[:-1], distinct[1:]
    mid = lower + (upper - lower) / 2.0
    # adjacent floats: the midpoint can round up onto the upper value
    return np.where(mid < upper, mid, lower)


def feature_thresholds(column: np.ndarray, max_bins: int) -> np.ndarray:
    distinct = np.unique(column)
    if len(distinct) <= max_bins:
        return _exact_thresholds(distinct)
    q = np.arange(1, max_bins) / max_bins
    return np.unique(np.quantile(column, q))


def build_bins(X, max_bins: int = 255) -> BinMapper:
    """Thresholds at approximate quantiles; lossless when a feature has few distinct values."""
    X = np.asarray(getattr(X, "values", X), dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise SizeError("cannot bin an empty matrix")
    if not 2 <= max_bins <= 256:
        raise ValueError("max_bins must be in [2, 256]")
    return BinMapper([feature_thresholds(X[:, j], max_bins) for j in range(X.shape[1])])

"""Boosting loop, fitted model container and sklearn-compatible estimators."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..errors import InputError, SchemaError
from .binning import BinMapper, build_bins
from .config import GbdtConfig
from .losses import LOGISTIC, LOSS_KINDS, SQUARED, base_score, grad_hess, loss_value, sigmoid, validation_metric
from .tree import BinnedDataset, Tree, grow_tree

logger = logging.getLogger(__name__)

MODEL_FORMAT = "loanprofit-gbdt"
MODEL_VERSION = 1
_PROBA_EPS = 1e-15


@dataclass
class GbdtModel:
    loss_kind: str
    base_score: float
    trees: List[Tree]
    config: GbdtConfig
    bin_mapper: BinMapper
    best_iteration: int
    feature_names: Optional[List[str]] = None
    train_loss: List[float] = field(default_factory=list)
    valid_loss: List[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.bin_mapper.n_features

    def raw_binned(self, binned: np.ndarray) -> np.ndarray:
        raw = np.full(binned.shape[1], self.base_score)
        for tree in self.trees[: self.best_iteration]:
            tree.add_output(binned, raw)
        return raw

    def split_counts(self) -> np.ndarray:
        """Number of splits per feature over the trees used for prediction."""
        counts = np.zeros(self.n_features, dtype=np.int64)
        for tree in self.trees[: self.best_iteration]:
            used = tree.feature[tree.feature >= 0]
            np.add.at(counts, used, 1)
        return counts

    def to_text(self) -> str:
        payload = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "loss_kind": self.loss_kind,
            "base_score": self.base_score,
            "best_iteration": self.best_iteration,
            "config": self.config.to_dict(),
            "feature_names": self.feature_names,
            "bin_thresholds": [t.tolist() for t in self.bin_mapper.thresholds],
            "trees": [t.to_preorder() for t in self.trees],
        }
        return json.dumps(payload, separators=(",", ":")) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GbdtModel":
        payload = json.loads(text)
        if payload.get("format") != MODEL_FORMAT or payload.get("version") != MODEL_VERSION:
            raise SchemaError(f"not a version-{MODEL_VERSION} model file")
        return cls(
            loss_kind=payload["loss_kind"],
            base_score=float(payload["base_score"]),
            trees=[Tree.from_preorder(t) for t in payload["trees"]],
            config=GbdtConfig.from_dict(payload["config"]),
            bin_mapper=BinMapper([np.asarray(t, dtype=np.float64) for t in payload["bin_thresholds"]]),
            best_iteration=int(payload["best_iteration"]),
            feature_names=payload["feature_names"],
        )


def _unpack(X) -> Tuple[np.ndarray, Optional[List[str]]]:
    names = getattr(X, "column_names", None)
    values = np.asarray(getattr(X, "values", X), dtype=np.float64)
    return values, (list(names) if names is not None else None)


def _check_targets(y, n_rows, loss_kind) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (n_rows,):
        raise InputError(f"expected {n_rows} targets, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InputError("targets must be finite")
    if loss_kind == LOGISTIC and not np.all((y == 0) | (y == 1)):
        raise InputError("logistic targets must be 0 or 1")
    return y


def fit(X, y, loss_kind: str = SQUARED, config: GbdtConfig = GbdtConfig(), valid=None) -> GbdtModel:
    """Boost ``config.num_rounds`` trees, early-stopping on ``valid=(X_valid, y_valid)`` if given."""
    if loss_kind not in LOSS_KINDS:
        raise InputError(f"unknown loss {loss_kind!r}")
    values, names = _unpack(X)
    if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
        raise InputError("training matrix must be non-empty and 2-D")
    if not np.all(np.isfinite(values)):
        raise InputError("training matrix contains missing or infinite values")
    y = _check_targets(y, values.shape[0], loss_kind)

    mapper = build_bins(values, config.max_bins)
    binned = mapper.transform(values)
    data = BinnedDataset(binned, mapper.n_bins)
    n = values.shape[0]
    rng = np.random.default_rng(config.seed)
    base = base_score(loss_kind, y)
    raw = np.full(n, base)

    vbinned = vy = vraw = None
    if valid is not None:
        vvalues, vnames = _unpack(valid[0])
        if names is not None and vnames is not None and vnames != names:
            raise SchemaError("validation columns differ from training columns")
        vbinned = mapper.transform(vvalues)
        vy = _check_targets(valid[1], vvalues.shape[0], loss_kind)
        vraw = np.full(vvalues.shape[0], base)

    n_bag = n if config.bagging_fraction >= 1.0 else max(1, int(round(config.bagging_fraction * n)))
    trees: List[Tree] = []
    train_loss, valid_loss = [], []
    best_iter, best_val = 0, np.inf
    for it in range(config.num_rounds):
        rows = None if n_bag == n else np.sort(rng.choice(n, size=n_bag, replace=False))
        g, h = grad_hess(loss_kind, raw, y)
        tree = grow_tree(data, g, h, config, rng, rows=rows)
        tree.add_output(binned, raw)
        trees.append(tree)
        train_loss.append(loss_value(loss_kind, raw, y))
        if vbinned is not None:
            tree.add_output(vbinned, vraw)
            v = validation_metric(loss_kind, vraw, vy)
            valid_loss.append(v)
            if v < best_val:
                best_val, best_iter = v, it + 1
            elif config.early_stopping_rounds and it + 1 - best_iter >= config.early_stopping_rounds:
                logger.debug("early stop at round %d, best %d", it + 1, best_iter)
                break

    best_iteration = best_iter if vbinned is not None and best_iter > 0 else len(trees)
    return GbdtModel(loss_kind, base, trees, config, mapper, best_iteration, names, train_loss, valid_loss)


def predict_raw(model: GbdtModel, X) -> np.ndarray:
    values, names = _unpack(X)
    if model.feature_names is not None and names is not None and names != model.feature_names:
        raise SchemaError("prediction columns differ from the columns the model was trained on")
    if values.ndim != 2 or values.shape[1] != model.n_features:
        raise SchemaError(f"expected {model.n_features} columns, got shape {values.shape}")
    return model.raw_binned(model.bin_mapper.transform(values))


def predict(model: GbdtModel, X) -> np.ndarray:
    """Probabilities in (0, 1) for logistic models, raw scores for squared ones."""
    raw = predict_raw(model, X)
    if model.loss_kind == LOGISTIC:
        return np.clip(sigmoid(raw), _PROBA_EPS, 1.0 - _PROBA_EPS)
    return raw


def set_threads(n_threads: Optional[int]) -> None:
    if n_threads is None:
        return
    import numba

    numba.set_num_threads(max(1, min(int(n_threads), numba.config.NUMBA_NUM_THREADS)))


class _BaseGBDT(BaseEstimator):
    _loss_kind = SQUARED

    def __init__(self, max_depth=6, num_leaves=10, feature_fraction=0.8, bagging_fraction=0.5,
                 learning_rate=0.01, num_rounds=500, early_stopping_rounds=50, max_bins=255,
                 min_samples_leaf=20, lambda_l2=1.0, seed=0, n_threads=None):
        self.max_depth = max_depth
        self.num_leaves = num_leaves
        self.feature_fraction = feature_fraction
        self.bagging_fraction = bagging_fraction
        self.learning_rate = learning_rate
        self.num_rounds = num_rounds
        self.early_stopping_rounds = early_stopping_rounds
        self.max_bins = max_bins
        self.min_samples_leaf = min_samples_leaf
        self.lambda_l2 = lambda_l2
        self.seed = seed
        self.n_threads = n_threads

    @property
    def config(self) -> GbdtConfig:
        params = self.get_params()
        params.pop("n_threads")
        return GbdtConfig(**params)

    @classmethod
    def from_config(cls, config: GbdtConfig, **kwargs):
        return cls(**config.to_dict(), **kwargs)

    def fit(self, X, y, eval_set=None):
        set_threads(self.n_threads)
        self.model_ = fit(X, y, self._loss_kind, self.config, valid=eval_set)
        self.n_features_in_ = self.model_.n_features
        if self.model_.feature_names is not None:
            self.feature_names_in_ = np.asarray(self.model_.feature_names, dtype=object)
        return self

    @property
    def feature_importances_(self) -> np.ndarray:
        """Split counts per feature."""
        check_is_fitted(self, "model_")
        return self.model_.split_counts()

    @classmethod
    def from_model(cls, model: GbdtModel):
        est = cls.from_config(model.config)
        est.model_ = model
        est.n_features_in_ = model.n_features
        return est


class GBDTRegressor(RegressorMixin, _BaseGBDT):
    """Squared-loss histogram GBDT regressor."""

    _loss_kind = SQUARED

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return predict(self.model_, X)


class GBDTClassifier(ClassifierMixin, _BaseGBDT):
    """Binary logistic-loss histogram GBDT classifier with labels 0/1."""

    _loss_kind = LOGISTIC

    def fit(self, X, y, eval_set=None):
        super().fit(X, y, eval_set=eval_set)
        self.classes_ = np.array([0, 1])
        return self

    @classmethod
    def from_model(cls, model: GbdtModel):
        est = super().from_model(model)
        est.classes_ = np.array([0, 1])
        return est

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        p = predict(self.model_, X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)

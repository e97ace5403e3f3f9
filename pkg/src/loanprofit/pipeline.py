"""One-stage profit scoring and the two-stage credit-into-profit model.

In two-stage mode a classifier first estimates each loan's probability of
default; that estimate is appended as an extra column before the ARR
regressor is trained. For the training rows the appended value is produced
out-of-fold by default, so the regressor never sees a PD computed by a
model that was fit on the same row's outcome.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.model_selection import KFold
from sklearn.utils.validation import check_is_fitted

from . import __version__
from .dataset import LoanTable, SplitSpec, prune_sparse_features
from .errors import ConfigError, DegenerateTargetError, SchemaError, SizeError
from .gbdt import LOGISTIC, SQUARED, GbdtConfig, GbdtModel, fit as gbdt_fit, predict as gbdt_predict, set_threads
from .preprocess import EncoderSpec, FeatureMatrix, LoanEncoder, append_column

logger = logging.getLogger(__name__)

ONE_STAGE = "one_stage"
TWO_STAGE = "two_stage"
IN_SAMPLE = "in-sample"
MANIFEST_FORMAT = "loanprofit-pipeline"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    stage1: GbdtConfig = field(default_factory=GbdtConfig)
    stage2: GbdtConfig = field(default_factory=GbdtConfig)
    pd_feature_name: str = "pd_hat"
    cross_fit_folds: Union[int, str] = 5
    split: SplitSpec = field(default_factory=SplitSpec)
    mode: str = TWO_STAGE
    validation_fraction: float = 0.1
    top_k_categories: int = 50
    max_missing_fraction: float = 0.7

    def __post_init__(self):
        if self.mode not in (ONE_STAGE, TWO_STAGE):
            raise ConfigError(f"mode must be {ONE_STAGE!r} or {TWO_STAGE!r}, got {self.mode!r}")
        if self.cross_fit_folds != IN_SAMPLE and not (
            isinstance(self.cross_fit_folds, (int, np.integer)) and self.cross_fit_folds >= 2
        ):
            raise ConfigError(f"cross_fit_folds must be an integer >= 2 or {IN_SAMPLE!r}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must be in [0, 1)")
        if not self.pd_feature_name:
            raise ConfigError("pd_feature_name must be non-empty")
        if self.top_k_categories < 1:
            raise ConfigError("top_k_categories must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        d["stage1"] = GbdtConfig.from_dict(d.get("stage1", {}))
        d["stage2"] = GbdtConfig.from_dict(d.get("stage2", {}))
        d["split"] = SplitSpec(**d.get("split", {}))
        return cls(**d)

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class Scores:
    loan_ids: np.ndarray
    arr_hat: np.ndarray
    pd_hat: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.loan_ids)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["loan_id", "pd_hat", "arr_hat"])
            for i, loan_id in enumerate(self.loan_ids):
                pd = "" if self.pd_hat is None else repr(float(self.pd_hat[i]))
                w.writerow([int(loan_id), pd, repr(float(self.arr_hat[i]))])


def _fit_stage(X: FeatureMatrix, y, loss_kind, config: GbdtConfig, validation_fraction: float) -> GbdtModel:
    """Fit one booster, holding out a seeded validation slice for early stopping."""
    n = X.rows
    n_valid = int(round(validation_fraction * n))
    if config.early_stopping_rounds == 0 or n_valid < 1 or n - n_valid < 2:
        return gbdt_fit(X, y, loss_kind, config)
    y = np.asarray(y, dtype=np.float64)
    perm = np.random.default_rng([config.seed, 17]).permutation(n)
    fit_idx, valid_idx = np.sort(perm[n_valid:]), np.sort(perm[:n_valid])
    sub = lambda idx: FeatureMatrix(X.values[idx], X.column_names, X.row_ids[idx])  # noqa: E731
    return gbdt_fit(sub(fit_idx), y[fit_idx], loss_kind, config, valid=(sub(valid_idx), y[valid_idx]))


class ProfitPipeline(BaseEstimator):
    """Predict each loan's ARR, optionally with a stage-1 PD estimate as an extra feature.

    ``fit`` takes a ``LoanTable`` of training loans (targets come from its
    outcomes); ``predict`` returns the predicted ARR and ``score_loans``
    returns both the PD estimate and the ARR prediction.
    """

    def __init__(self, mode=TWO_STAGE, stage1=None, stage2=None, pd_feature_name="pd_hat", cross_fit_folds=5,
                 validation_fraction=0.1, top_k_categories=50, max_missing_fraction=0.7, split=None,
                 n_threads=None):
        self.mode = mode
        self.stage1 = stage1
        self.stage2 = stage2
        self.pd_feature_name = pd_feature_name
        self.cross_fit_folds = cross_fit_folds
        self.validation_fraction = validation_fraction
        self.top_k_categories = top_k_categories
        self.max_missing_fraction = max_missing_fraction
        self.split = split
        self.n_threads = n_threads

    @property
    def config(self) -> PipelineConfig:
        return PipelineConfig(
            stage1=self.stage1 or GbdtConfig(),
            stage2=self.stage2 or GbdtConfig(),
            pd_feature_name=self.pd_feature_name,
            cross_fit_folds=self.cross_fit_folds,
            split=self.split or SplitSpec(),
            mode=self.mode,
            validation_fraction=self.validation_fraction,
            top_k_categories=self.top_k_categories,
            max_missing_fraction=self.max_missing_fraction,
        )

    @classmethod
    def from_config(cls, config: PipelineConfig, n_threads=None) -> "ProfitPipeline":
        return cls(mode=config.mode, stage1=config.stage1, stage2=config.stage2,
                   pd_feature_name=config.pd_feature_name, cross_fit_folds=config.cross_fit_folds,
                   validation_fraction=config.validation_fraction, top_k_categories=config.top_k_categories,
                   max_missing_fraction=config.max_missing_fraction, split=config.split, n_threads=n_threads)

    # -- fitting -----------------------------------------------------------

    def fit(self, X: LoanTable, y=None):
        cfg = self.config
        set_threads(self.n_threads)
        if len(X) == 0:
            raise SizeError("cannot fit on an empty table")
        features = prune_sparse_features(X, cfg.max_missing_fraction)
        self.encoder_ = LoanEncoder(features=features, top_k=cfg.top_k_categories).fit(X)
        matrix = self.encoder_.transform(X)
        if cfg.pd_feature_name in matrix.column_names:
            raise ConfigError(f"pd_feature_name {cfg.pd_feature_name!r} collides with an encoded column")
        self.schema_version_ = X.schema_version
        self.stage1_model_ = None
        self.crossfit_log_ = []
        if cfg.mode == TWO_STAGE:
            status = X.loan_status
            if len(np.unique(status)) < 2:
                raise DegenerateTargetError("two-stage fitting needs both fully paid and charged-off loans")
            pd_train = self._stage1_train_pd(matrix, status, cfg)
            self.stage1_model_ = _fit_stage(matrix, status, LOGISTIC, cfg.stage1, cfg.validation_fraction)
            if cfg.cross_fit_folds == IN_SAMPLE:
                pd_train = gbdt_predict(self.stage1_model_, matrix)
            matrix = append_column(matrix, cfg.pd_feature_name, pd_train)
            self.train_pd_ = pd_train
        self.stage2_model_ = _fit_stage(matrix, X.arr, SQUARED, cfg.stage2, cfg.validation_fraction)
        return self

    def _stage1_train_pd(self, matrix: FeatureMatrix, status, cfg: PipelineConfig):
        if cfg.cross_fit_folds == IN_SAMPLE:
            return None
        k = int(cfg.cross_fit_folds)
        if matrix.rows < k:
            raise SizeError(f"need at least {k} training loans for {k}-fold cross-fitting")
        pd = np.empty(matrix.rows)
        folds = KFold(n_splits=k, shuffle=True, random_state=cfg.stage1.seed % 2**32)
        for fold, (fit_idx, out_idx) in enumerate(folds.split(np.arange(matrix.rows))):
            sub = FeatureMatrix(matrix.values[fit_idx], matrix.column_names, matrix.row_ids[fit_idx])
            fold_cfg = cfg.stage1.replace(seed=(cfg.stage1.seed + 1 + fold) % 2**64)
            model = _fit_stage(sub, status[fit_idx], LOGISTIC, fold_cfg, cfg.validation_fraction)
            out = FeatureMatrix(matrix.values[out_idx], matrix.column_names, matrix.row_ids[out_idx])
            pd[out_idx] = gbdt_predict(model, out)
            self.crossfit_log_.append((fold, matrix.row_ids[fit_idx].copy(), matrix.row_ids[out_idx].copy()))
        return pd

    # -- scoring -----------------------------------------------------------

    def _check_table(self, table: LoanTable):
        check_is_fitted(self, "stage2_model_")
        if getattr(table, "schema_version", self.schema_version_) != self.schema_version_:
            raise SchemaError(
                f"table schema {table.schema_version!r} differs from training schema {self.schema_version_!r}"
            )

    def score_loans(self, table: LoanTable) -> Scores:
        self._check_table(table)
        matrix = self.encoder_.transform(table)
        pd_hat = None
        if self.stage1_model_ is not None:
            pd_hat = gbdt_predict(self.stage1_model_, matrix)
            matrix = append_column(matrix, self.pd_feature_name, pd_hat)
        arr_hat = gbdt_predict(self.stage2_model_, matrix)
        return Scores(matrix.row_ids, arr_hat, pd_hat)

    def predict(self, X: LoanTable) -> np.ndarray:
        return self.score_loans(X).arr_hat

    def stage2_importance(self) -> dict:
        """Split counts of the ARR regressor keyed by column name."""
        check_is_fitted(self, "stage2_model_")
        return dict(zip(self.stage2_model_.feature_names, self.stage2_model_.split_counts().tolist()))

    # -- persistence -------------------------------------------------------

    def save(self, directory, extra_manifest: Optional[dict] = None) -> Path:
        check_is_fitted(self, "stage2_model_")
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        cfg = self.config
        (out / "encoder.json").write_text(self.encoder_.spec_.to_text(), encoding="utf-8")
        (out / "stage2_model.json").write_text(self.stage2_model_.to_text(), encoding="utf-8")
        stage1_path = out / "stage1_model.json"
        if self.stage1_model_ is not None:
            stage1_path.write_text(self.stage1_model_.to_text(), encoding="utf-8")
        elif stage1_path.exists():
            stage1_path.unlink()
        manifest = {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "toolkit_version": __version__,
            "mode": cfg.mode,
            "config": cfg.to_dict(),
            "config_hash": cfg.digest(),
            "seeds": {"split": cfg.split.seed, "stage1": cfg.stage1.seed, "stage2": cfg.stage2.seed},
            "schema_version": self.schema_version_,
            "stage2_columns": self.stage2_model_.feature_names,
            "stage1_pd_source": (
                None if cfg.mode == ONE_STAGE
                else "in-sample" if cfg.cross_fit_folds == IN_SAMPLE
                else f"out-of-fold ({cfg.cross_fit_folds} folds)"
            ),
            "note": (
                "stage 2 can train on in-sample or out-of-fold stage-1 PDs and the choice changes results; "
                "in-sample PDs leak training labels. See stage1_pd_source"
            ) if cfg.mode == TWO_STAGE else None,
            "created_unix": time.time(),
        }
        if extra_manifest:
            manifest.update(extra_manifest)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return out

    @classmethod
    def load(cls, directory) -> "ProfitPipeline":
        src = Path(directory)
        try:
            manifest = json.loads((src / "manifest.json").read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise SchemaError(f"{src} is not a pipeline directory (no manifest.json)") from exc
        if manifest.get("format") != MANIFEST_FORMAT or manifest.get("version") != MANIFEST_VERSION:
            raise SchemaError(f"{src}: unsupported pipeline manifest")
        cfg = PipelineConfig.from_dict(manifest["config"])
        pipe = cls.from_config(cfg)
        spec = EncoderSpec.from_text((src / "encoder.json").read_text(encoding="utf-8"))
        pipe.encoder_ = LoanEncoder.from_spec(spec)
        pipe.encoder_.top_k = cfg.top_k_categories
        pipe.stage2_model_ = GbdtModel.from_text((src / "stage2_model.json").read_text(encoding="utf-8"))
        pipe.stage1_model_ = None
        if cfg.mode == TWO_STAGE:
            pipe.stage1_model_ = GbdtModel.from_text((src / "stage1_model.json").read_text(encoding="utf-8"))
        pipe.schema_version_ = manifest["schema_version"]
        pipe.manifest_ = manifest
        return pipe


def fit_one_stage(train: LoanTable, config: PipelineConfig = PipelineConfig(mode=ONE_STAGE),
                  n_threads=None) -> ProfitPipeline:
    if config.mode != ONE_STAGE:
        config = PipelineConfig(**{**config.__dict__, "mode": ONE_STAGE})
    return ProfitPipeline.from_config(config, n_threads=n_threads).fit(train)


def fit_two_stage(train: LoanTable, config: PipelineConfig = PipelineConfig(), n_threads=None) -> ProfitPipeline:
    if config.mode != TWO_STAGE:
        config = PipelineConfig(**{**config.__dict__, "mode": TWO_STAGE})
    return ProfitPipeline.from_config(config, n_threads=n_threads).fit(train)


def score(pipeline: ProfitPipeline, table: LoanTable) -> Scores:
    return pipeline.score_loans(table)

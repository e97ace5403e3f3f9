"""One-hot and min-max encoding fitted on the training split only."""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import EncodingError, SchemaError, StructuralError
from .loan_model import CATEGORICAL_FEATURES, PREDICTORS

logger = logging.getLogger(__name__)

ENCODER_FORMAT = "loanprofit-encoder"
ENCODER_VERSION = 1
MISSING_CATEGORY = "NA"
OTHER_SUFFIX = "__other__"
HIGH_CARDINALITY = ("emp_title", "zip_code", "addr_state")


@dataclass(frozen=True)
class CategoricalEncoding:
    categories: Tuple[str, ...]
    has_other: bool = False


@dataclass(frozen=True)
class NumericEncoding:
    minimum: float
    maximum: float
    impute_value: float

    def scale(self, x: np.ndarray) -> np.ndarray:
        span = self.maximum - self.minimum
        if span == 0:
            return np.zeros_like(x, dtype=np.float64)
        return np.clip((x - self.minimum) / span, 0.0, 1.0)


@dataclass(frozen=True)
class EncoderSpec:
    """Learned encoding: categories per categorical, (min, max, median) per numeric."""

    features: Tuple[str, ...]
    categorical: Mapping[str, CategoricalEncoding]
    numeric: Mapping[str, NumericEncoding]

    @property
    def column_names(self) -> List[str]:
        names = []
        for f in self.features:
            if f in self.categorical:
                enc = self.categorical[f]
                names.extend(f"{f}_{c}" for c in enc.categories)
                if enc.has_other:
                    names.append(f"{f}_{OTHER_SUFFIX}")
            else:
                names.append(f)
        return names

    def groups(self) -> Dict[str, List[int]]:
        """Column indices belonging to each input feature."""
        out, col = {}, 0
        for f in self.features:
            if f in self.categorical:
                enc = self.categorical[f]
                width = len(enc.categories) + int(enc.has_other)
            else:
                width = 1
            out[f] = list(range(col, col + width))
            col += width
        return out

    def to_text(self) -> str:
        payload = {
            "format": ENCODER_FORMAT,
            "version": ENCODER_VERSION,
            "features": [
                {"name": f, "kind": "categorical", "categories": list(self.categorical[f].categories),
                 "other": self.categorical[f].has_other}
                if f in self.categorical
                else {"name": f, "kind": "numeric", "min": self.numeric[f].minimum,
                      "max": self.numeric[f].maximum, "impute": self.numeric[f].impute_value}
                for f in self.features
            ],
        }
        return json.dumps(payload, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EncoderSpec":
        payload = json.loads(text)
        if payload.get("format") != ENCODER_FORMAT or payload.get("version") != ENCODER_VERSION:
            raise SchemaError(f"not a version-{ENCODER_VERSION} encoder file")
        features, cat, num = [], {}, {}
        for entry in payload["features"]:
            name = entry["name"]
            features.append(name)
            if entry["kind"] == "categorical":
                cat[name] = CategoricalEncoding(tuple(entry["categories"]), bool(entry["other"]))
            else:
                num[name] = NumericEncoding(float(entry["min"]), float(entry["max"]), float(entry["impute"]))
        return cls(tuple(features), cat, num)


@dataclass
class FeatureMatrix:
    values: np.ndarray
    column_names: List[str]
    row_ids: np.ndarray
    warnings: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise StructuralError("feature values must be a 2-D array")
        if self.values.shape[1] != len(self.column_names):
            raise StructuralError("column names do not match the number of columns")
        if len(set(self.column_names)) != len(self.column_names):
            raise StructuralError("column names must be unique")
        if len(self.row_ids) != self.values.shape[0]:
            raise StructuralError("row ids do not match the number of rows")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def columns(self) -> int:
        return self.values.shape[1]


def append_column(matrix: FeatureMatrix, name: str, values) -> FeatureMatrix:
    """Copy of ``matrix`` with one extra column, stored as given (no rescaling)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (matrix.rows,):
        raise StructuralError(f"expected {matrix.rows} values for column {name!r}, got shape {values.shape}")
    if name in matrix.column_names:
        raise StructuralError(f"column {name!r} already present")
    return FeatureMatrix(
        np.column_stack([matrix.values, values]),
        list(matrix.column_names) + [name],
        matrix.row_ids.copy(),
        dict(matrix.warnings),
    )


def _rows(data):
    """Feature dicts and ids from a LoanTable, a list of LoanRecords or a list of dicts."""
    records = getattr(data, "records", data)
    feats, ids = [], []
    for i, r in enumerate(records):
        if isinstance(r, Mapping):
            feats.append(r)
            ids.append(r.get("loan_id", i))
        else:
            feats.append(r.features)
            ids.append(r.loan_id)
    return feats, np.asarray(ids, dtype=np.int64)


def _category(value) -> str:
    return MISSING_CATEGORY if value is None else str(value)


def fit_encoder(
    train,
    retained_features: Sequence[str] = PREDICTORS,
    top_k: int = 50,
    high_cardinality: Sequence[str] = HIGH_CARDINALITY,
    categorical_features=CATEGORICAL_FEATURES,
) -> EncoderSpec:
    feats, _ = _rows(train)
    if not feats:
        raise EncodingError("cannot fit an encoder on an empty table")
    if not retained_features:
        raise EncodingError("no features to encode")
    cat, num = {}, {}
    for name in retained_features:
        values = [row.get(name) for row in feats]
        if all(v is None for v in values):
            raise EncodingError(f"feature {name!r} has no observed values in the training data")
        if name in categorical_features:
            counts = Counter(_category(v) for v in values)
            if name in high_cardinality and len(counts) > top_k:
                ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
                cat[name] = CategoricalEncoding(tuple(sorted(c for c, _ in ranked)), has_other=True)
            else:
                cat[name] = CategoricalEncoding(tuple(sorted(counts)), has_other=name in high_cardinality)
        else:
            x = np.array([v for v in values if v is not None], dtype=np.float64)
            num[name] = NumericEncoding(float(x.min()), float(x.max()), float(np.median(x)))
    spec = EncoderSpec(tuple(retained_features), cat, num)
    names = spec.column_names
    if len(set(names)) != len(names):
        raise EncodingError("encoded column names collide")
    return spec


def transform(data, spec: EncoderSpec) -> FeatureMatrix:
    feats, ids = _rows(data)
    n = len(feats)
    blocks, warnings = [], {}
    for name in spec.features:
        raw = [row.get(name) for row in feats]
        if name in spec.categorical:
            enc = spec.categorical[name]
            index = {c: j for j, c in enumerate(enc.categories)}
            width = len(enc.categories) + int(enc.has_other)
            block = np.zeros((n, width))
            unseen = 0
            for i, v in enumerate(raw):
                j = index.get(_category(v))
                if j is None:
                    if enc.has_other:
                        j = width - 1
                    else:
                        unseen += 1
                        continue
                block[i, j] = 1.0
            if unseen:
                warnings[name] = unseen
                logger.warning("%d rows with unseen %s categories encoded as all zeros", unseen, name)
            blocks.append(block)
        else:
            enc = spec.numeric[name]
            x = np.array([enc.impute_value if v is None else v for v in raw], dtype=np.float64)
            blocks.append(enc.scale(x)[:, None])
    values = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return FeatureMatrix(values, spec.column_names, ids, warnings)


class LoanEncoder(BaseEstimator, TransformerMixin):
    """Estimator wrapper around ``fit_encoder``/``transform``.

    ``features=None`` encodes every predictor. High-cardinality categoricals
    keep their ``top_k`` most frequent training categories plus an "other"
    column.
    """

    def __init__(self, features=None, top_k=50, high_cardinality=HIGH_CARDINALITY):
        self.features = features
        self.top_k = top_k
        self.high_cardinality = high_cardinality

    def fit(self, X, y=None):
        feats = PREDICTORS if self.features is None else tuple(self.features)
        self.spec_ = fit_encoder(X, feats, top_k=self.top_k, high_cardinality=self.high_cardinality)
        return self

    def transform(self, X) -> FeatureMatrix:
        check_is_fitted(self, "spec_")
        return transform(X, self.spec_)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "spec_")
        return np.asarray(self.spec_.column_names, dtype=object)

    @classmethod
    def from_spec(cls, spec: EncoderSpec) -> "LoanEncoder":
        enc = cls(features=list(spec.features))
        enc.spec_ = spec
        return enc

"""Flat ``key = value`` configuration files for the command line.

Recognised keys::

    mode                  one_stage | two_stage
    pd_feature_name       name of the appended PD column
    cross_fit_folds       integer >= 2, or in-sample
    train_fraction        share of loans used for training
    split_seed            seed of the train/test partition
    validation_fraction   share of each stage's training rows used for early stopping
    top_k_categories      categories kept for emp_title, zip_code, addr_state
    max_missing_fraction  features missing more often than this are dropped
    <gbdt key>            sets the key for both stages
    stage1.<gbdt key>     stage-1 (PD classifier) only
    stage2.<gbdt key>     stage-2 (ARR regressor) only

where ``<gbdt key>`` is one of max_depth, num_leaves, feature_fraction,
bagging_fraction, learning_rate, num_rounds, early_stopping_rounds,
max_bins, min_samples_leaf, lambda_l2, seed. ``#`` starts a comment.
Stage-specific keys win over shared ones regardless of order.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Dict, Iterable, Mapping

from .dataset import SplitSpec
from .errors import ConfigError, DataError
from .gbdt import GbdtConfig
from .pipeline import IN_SAMPLE, PipelineConfig

_GBDT_TYPES = {f.name: type(getattr(GbdtConfig(), f.name)) for f in dataclasses.fields(GbdtConfig)}
_PIPELINE_KEYS = {
    "mode": str,
    "pd_feature_name": str,
    "cross_fit_folds": "folds",
    "train_fraction": float,
    "split_seed": int,
    "validation_fraction": float,
    "top_k_categories": int,
    "max_missing_fraction": float,
}


def parse_lines(lines: Iterable[str], source: str = "<config>") -> Dict[str, str]:
    out = {}
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (part.strip() for part in text.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def read_config_file(path) -> Dict[str, str]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_lines(fh, str(path))


def _convert(key: str, value: str, kind):
    try:
        if kind == "folds":
            return IN_SAMPLE if value == IN_SAMPLE else int(value)
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {value!r}") from None


def build_pipeline_config(values: Mapping[str, str], base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    """Apply ``values`` on top of ``base``; unknown keys are errors."""
    top, shared, per_stage = {}, {}, {"stage1": {}, "stage2": {}}
    for key, raw in values.items():
        if key in _PIPELINE_KEYS:
            top[key] = _convert(key, raw, _PIPELINE_KEYS[key])
            continue
        stage, _, name = key.rpartition(".")
        if name in _GBDT_TYPES and stage in ("", "stage1", "stage2"):
            parsed = _convert(key, raw, _GBDT_TYPES[name])
            (per_stage[stage] if stage else shared)[name] = parsed
            continue
        raise ConfigError(f"unknown configuration key {key!r}")

    stages = {}
    for stage in ("stage1", "stage2"):
        current = getattr(base, stage).to_dict()
        current.update(shared)
        current.update(per_stage[stage])
        stages[stage] = GbdtConfig(**current)

    try:
        split = SplitSpec(top.pop("train_fraction", base.split.train_fraction),
                          top.pop("split_seed", base.split.seed))
    except DataError as exc:
        raise ConfigError(str(exc)) from None
    fields = {f.name: getattr(base, f.name) for f in dataclasses.fields(PipelineConfig)}
    fields.update(top)
    fields.update(stages)
    fields["split"] = split
    return PipelineConfig(**fields)


def render_config(config: PipelineConfig) -> str:
    """The config as a file ``build_pipeline_config`` reads back unchanged."""
    lines = [
        f"mode = {config.mode}",
        f"pd_feature_name = {config.pd_feature_name}",
        f"cross_fit_folds = {config.cross_fit_folds}",
        f"train_fraction = {config.split.train_fraction!r}",
        f"split_seed = {config.split.seed}",
        f"validation_fraction = {config.validation_fraction!r}",
        f"top_k_categories = {config.top_k_categories}",
        f"max_missing_fraction = {config.max_missing_fraction!r}",
    ]
    for stage in ("stage1", "stage2"):
        for key, value in getattr(config, stage).to_dict().items():
            lines.append(f"{stage}.{key} = {value!r}")
    return "\n".join(lines) + "\n"

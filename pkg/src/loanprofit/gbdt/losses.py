"""Squared and logistic losses with their first and second derivatives."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

SQUARED = "squared"
LOGISTIC = "logistic"
LOSS_KINDS = (SQUARED, LOGISTIC)


def sigmoid(raw):
    return expit(np.asarray(raw, dtype=np.float64))


def _sigmoid_scalar(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def loss_grad_hess(loss_kind: str, prediction_raw: float, target: float):
    """Gradient and hessian of the loss with respect to the raw score."""
    if loss_kind == SQUARED:
        return prediction_raw - target, 1.0
    if loss_kind == LOGISTIC:
        p = _sigmoid_scalar(prediction_raw)
        return p - target, p * (1.0 - p)
    raise ValueError(f"unknown loss {loss_kind!r}")


def grad_hess(loss_kind: str, raw: np.ndarray, y: np.ndarray):
    if loss_kind == SQUARED:
        return raw - y, np.ones_like(raw)
    p = sigmoid(raw)
    return p - y, p * (1.0 - p)


def loss_value(loss_kind: str, raw: np.ndarray, y: np.ndarray) -> float:
    """Mean squared error or mean log-loss (natural log) of raw scores."""
    if loss_kind == SQUARED:
        return float(np.mean((raw - y) ** 2))
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def validation_metric(loss_kind: str, raw: np.ndarray, y: np.ndarray) -> float:
    """RMSE for regression, log-loss for classification."""
    if loss_kind == SQUARED:
        return math.sqrt(loss_value(SQUARED, raw, y))
    return loss_value(LOGISTIC, raw, y)


def base_score(loss_kind: str, y: np.ndarray) -> float:
    m = float(np.mean(y))
    if loss_kind == SQUARED:
        return m
    p = min(max(m, 1e-12), 1.0 - 1e-12)
    return math.log(p / (1.0 - p))

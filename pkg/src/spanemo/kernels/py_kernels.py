"""Pure-numpy fallback for the loss kernels (same contract as the extension)."""

from __future__ import annotations

import numpy as np


def bce_batch(y: np.ndarray, y_hat: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    n_classes = y.shape[1]
    clamped = np.clip(y_hat, eps, 1.0 - eps)
    values = -(y * np.log(clamped) + (1.0 - y) * np.log(1.0 - clamped)).mean(axis=1)
    grad = (-y / clamped + (1.0 - y) / (1.0 - clamped)) / n_classes
    grad[(y_hat < eps) | (y_hat > 1.0 - eps)] = 0.0
    return values, grad


def lca_batch(y: np.ndarray, y_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    n_examples = y.shape[0]
    values = np.zeros(n_examples, dtype=np.float64)
    grad = np.zeros_like(y_hat)
    for i in range(n_examples):
        pos = np.flatnonzero(y[i] == 1)
        neg = np.flatnonzero(y[i] == 0)
        if pos.size == 0 or neg.size == 0:
            continue
        # pair matrix: rows negatives, columns positives
        pair = np.exp(y_hat[i, neg][:, None] - y_hat[i, pos][None, :])
        scale = 1.0 / (neg.size * pos.size)
        values[i] = pair.sum() * scale
        grad[i, neg] = pair.sum(axis=1) * scale
        grad[i, pos] = -pair.sum(axis=0) * scale
    return values, grad

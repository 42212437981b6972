"""Training objectives: binary cross-entropy, the label-correlation-aware
pairwise loss, and their alpha-weighted combination.

The pairwise term pushes every positive class's probability above every
negative class's probability for the same example: for each (negative p,
positive q) pair it pays ``exp(y_hat[p] - y_hat[q])``, averaged over all
pairs. Because it only sees differences of probabilities, adding a constant
to every entry leaves it unchanged, and each term lies in (1/e, e).

All reductions are means: over classes inside the BCE, over pairs inside the
pairwise loss, over examples inside a batch. The mean over examples keeps
the mixing weight alpha comparable across batch sizes.

Analytic gradients (with respect to the probabilities) come from the
kernel backend and are exercised against central finite differences in the
test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spanemo import kernels
from spanemo.errors import DimensionError, UsageError

# Probability clamp for the BCE logs.
BCE_EPS = 1e-7


@dataclass(frozen=True)
class LossConfig:
    """Mixing weight for the joint objective; reduction is fixed to mean-over-batch."""

    alpha: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class LossValue:
    """Joint loss and its two parts; total == (1-alpha)*bce + alpha*lca."""

    total: float
    bce_part: float
    lca_part: float


def _as_batch(batch_y, batch_y_hat) -> tuple[np.ndarray, np.ndarray]:
    if len(batch_y) != len(batch_y_hat):
        raise DimensionError(
            f"batch sizes differ: {len(batch_y)} targets vs {len(batch_y_hat)} predictions"
        )
    if len(batch_y) == 0:
        raise UsageError("empty batch")
    widths = {len(v) for v in batch_y} | {len(v) for v in batch_y_hat}
    if len(widths) != 1:
        raise DimensionError(f"inconsistent vector lengths in batch: {sorted(widths)}")
    y = np.asarray(batch_y, dtype=np.float64)
    y_hat = np.asarray(batch_y_hat, dtype=np.float64)
    return y, y_hat


def bce_loss(y, y_hat) -> float:
    """Mean over classes of -[y log p + (1-y) log(1-p)], p clamped to [eps, 1-eps]."""
    if len(y) != len(y_hat):
        raise DimensionError(f"length mismatch: {len(y)} vs {len(y_hat)}")
    values, _ = kernels.bce_batch(
        np.asarray(y, dtype=np.float64)[None, :],
        np.asarray(y_hat, dtype=np.float64)[None, :],
        BCE_EPS,
    )
    return float(values[0])


def lca_loss(y, y_hat) -> float:
    """Mean of exp(p_score - q_score) over all (negative p, positive q) pairs.

    Returns exactly 0.0 when either partition is empty (neutral or
    all-positive example); the pair set is empty there and the formula's
    normalizer would divide by zero.
    """
    if len(y) != len(y_hat):
        raise DimensionError(f"length mismatch: {len(y)} vs {len(y_hat)}")
    values, _ = kernels.lca_batch(
        np.asarray(y, dtype=np.float64)[None, :],
        np.asarray(y_hat, dtype=np.float64)[None, :],
    )
    return float(values[0])


def joint_loss(batch_y, batch_y_hat, cfg: LossConfig) -> LossValue:
    """Batch objective: (1-alpha) * mean BCE + alpha * mean pairwise loss."""
    value, _ = joint_loss_with_grad(batch_y, batch_y_hat, cfg)
    return value


def joint_loss_with_grad(batch_y, batch_y_hat, cfg: LossConfig) -> tuple[LossValue, np.ndarray]:
    """Joint loss plus its gradient with respect to every predicted probability.

    The gradient has the batch's (N, |C|) shape and already includes the
    1/N of the batch mean.
    """
    y, y_hat = _as_batch(batch_y, batch_y_hat)
    n = y.shape[0]
    bce_values, bce_grad = kernels.bce_batch(y, y_hat, BCE_EPS)
    lca_values, lca_grad = kernels.lca_batch(y, y_hat)
    bce_part = float(bce_values.mean())
    lca_part = float(lca_values.mean())
    total = (1.0 - cfg.alpha) * bce_part + cfg.alpha * lca_part
    grad = ((1.0 - cfg.alpha) * bce_grad + cfg.alpha * lca_grad) / n
    return LossValue(total=total, bce_part=bce_part, lca_part=lca_part), grad

"""Micro F1, macro F1, and the Jaccard index score for multi-label predictions.

Conventions, fixed once here so every consumer agrees:

* micro F1 pools true/false positives and false negatives over all
  (example, class) cells; an empty pool scores 0.
* per-class F1 uses the 0/0 -> 0 convention (macro F1 is sensitive to this
  on rare classes, so it is spelled out rather than implied).
* the Jaccard score averages |gold ∩ pred| / |gold ∪ pred| over examples,
  counting an example with empty gold *and* empty predicted sets as 1.0 —
  the official scorer's convention for neutral instances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from spanemo.errors import EmptyStratumError, UsageError


@dataclass(frozen=True)
class MetricReport:
    micro_f1: float
    macro_f1: float
    jaccard: float
    per_class_f1: tuple[float, ...]
    support: tuple[int, ...]
    n_examples: int

    def by_name(self, name: str) -> float:
        key = {"miF1": "micro_f1", "maF1": "macro_f1", "jacS": "jaccard"}.get(name)
        if key is None:
            raise UsageError(f"unknown metric {name!r}; expected miF1, maF1 or jacS")
        return getattr(self, key)

    def to_dict(self) -> dict:
        return {
            "miF1": self.micro_f1,
            "maF1": self.macro_f1,
            "jacS": self.jaccard,
            "per_class_f1": list(self.per_class_f1),
            "support": list(self.support),
            "n_examples": self.n_examples,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self, names: tuple[str, ...] | None = None) -> str:
        lines = [
            f"examples   {self.n_examples}",
            f"miF1       {self.micro_f1:.4f}",
            f"maF1       {self.macro_f1:.4f}",
            f"jacS       {self.jaccard:.4f}",
        ]
        if names:
            width = max(len(n) for n in names)
            lines.append("per-class F1:")
            for name, f1, sup in zip(names, self.per_class_f1, self.support):
                lines.append(f"  {name:<{width}}  {f1:.4f}  (support {sup})")
        return "\n".join(lines)


def _as_matrices(gold, pred) -> tuple[np.ndarray, np.ndarray]:
    if len(gold) != len(pred):
        raise UsageError(f"{len(gold)} gold rows vs {len(pred)} predicted rows")
    if len(gold) == 0:
        raise UsageError("cannot evaluate zero examples")
    g = np.asarray(gold, dtype=np.int64)
    p = np.asarray(pred, dtype=np.int64)
    if g.shape != p.shape or g.ndim != 2:
        raise UsageError(f"gold shape {g.shape} and pred shape {p.shape} must match (N, |C|)")
    return g, p


def _f1(tp: float, fp: float, fn: float) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 0.0


def evaluate(gold, pred) -> MetricReport:
    """Score predictions against gold label vectors (same length, same |C|)."""
    g, p = _as_matrices(gold, pred)

    tp_cells = (g == 1) & (p == 1)
    fp_cells = (g == 0) & (p == 1)
    fn_cells = (g == 1) & (p == 0)
    micro = _f1(tp_cells.sum(), fp_cells.sum(), fn_cells.sum())

    per_class = tuple(
        _f1(tp_cells[:, c].sum(), fp_cells[:, c].sum(), fn_cells[:, c].sum())
        for c in range(g.shape[1])
    )
    # exactly-rounded means, so results don't depend on summation order
    macro = math.fsum(per_class) / len(per_class)

    inter = tp_cells.sum(axis=1)
    union = ((g == 1) | (p == 1)).sum(axis=1)
    per_example = [i / u if u else 1.0 for i, u in zip(inter.tolist(), union.tolist())]
    jaccard = math.fsum(per_example) / len(per_example)

    return MetricReport(
        micro_f1=float(micro),
        macro_f1=macro,
        jaccard=jaccard,
        per_class_f1=per_class,
        support=tuple(int(s) for s in g.sum(axis=0)),
        n_examples=g.shape[0],
    )


def stratified_eval(gold, pred, min_k: int) -> MetricReport:
    """Evaluate only examples whose *gold* label count is at least ``min_k``."""
    if min_k < 1:
        raise UsageError(f"min_k must be >= 1, got {min_k}")
    g, p = _as_matrices(gold, pred)
    keep = g.sum(axis=1) >= min_k
    if not keep.any():
        raise EmptyStratumError(f"no examples carry >= {min_k} gold labels")
    return evaluate(g[keep], p[keep])

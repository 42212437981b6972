"""Model introspection: label-word associations, sentence heatmaps, label
correlation matrices, and the alpha sensitivity sweep.

All similarity work runs on the encoder's hidden states in eval mode:
each class is represented by the hidden state at its label-token position,
each sentence word by the mean of its piece vectors. Numbers are always
written as CSV next to any figure, so the plots are reproducible artifacts
rather than primary outputs.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from spanemo.data import PLACEHOLDER_TOKENS, Dataset
from spanemo.errors import UsageError
from spanemo.metrics import MetricReport
from spanemo.model import SpanEmoModel
from spanemo.trainer import TrainConfig, TrainResult, train


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def label_word_similarities(model: SpanEmoModel, tokens) -> tuple[np.ndarray, list[str]]:
    """(|C|, T') cosine matrix between label vectors and sentence-word vectors.

    Multi-piece sentence words are pooled by averaging their piece vectors.
    Requires a label-segment model (not the sentence-only ablation).
    """
    if model.sentence_only:
        raise UsageError("similarity analysis needs a model trained with the label segment")
    model_input = model.assemble(tokens)
    hidden = model.encoder.encode(model_input)
    label_vecs = hidden[np.asarray(model_input.label_positions, dtype=np.intp)]
    words = model_input.sentence_words
    values = np.zeros((len(model.space), len(words)))
    for j, (start, end) in enumerate(model_input.sentence_spans):
        word_vec = hidden[start:end].mean(axis=0)
        for i in range(len(model.space)):
            values[i, j] = cosine(label_vecs[i], word_vec)
    return values, list(words)


@dataclass
class AssociationTable:
    """Per emotion, the top words by mean cosine similarity (descending)."""

    emotions: tuple[str, ...]
    entries: dict[str, list[tuple[str, float]]]

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["emotion", "rank", "word", "similarity"])
            for emotion in self.emotions:
                for rank, (word, sim) in enumerate(self.entries[emotion], start=1):
                    writer.writerow([emotion, rank, word, f"{sim:.10g}"])

    def to_dict(self) -> dict:
        return {
            emotion: [{"word": w, "similarity": s} for w, s in self.entries[emotion]]
            for emotion in self.emotions
        }


def word_associations(model: SpanEmoModel, dataset: Dataset, k: int = 10,
                      exclude: tuple[str, ...] = PLACEHOLDER_TOKENS) -> AssociationTable:
    """Top-k words per emotion over a dataset.

    Similarities for each (emotion, word type) pair are aggregated by mean
    over all occurrences; ties break alphabetically, so the table is
    deterministic given checkpoint + dataset. Placeholder tokens are
    excluded. ``k`` larger than the vocabulary simply returns everything.
    """
    if len(dataset) == 0:
        raise UsageError("word_associations needs a non-empty dataset")
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    sums: list[dict[str, float]] = [{} for _ in model.space.names]
    counts: list[dict[str, int]] = [{} for _ in model.space.names]
    for ex in dataset:
        values, words = label_word_similarities(model, ex.tokens)
        for j, word in enumerate(words):
            if word in exclude:
                continue
            for i in range(len(model.space)):
                sums[i][word] = sums[i].get(word, 0.0) + values[i, j]
                counts[i][word] = counts[i].get(word, 0) + 1
    entries: dict[str, list[tuple[str, float]]] = {}
    for i, emotion in enumerate(model.space.names):
        means = [(word, sums[i][word] / counts[i][word]) for word in sums[i]]
        means.sort(key=lambda item: (-item[1], item[0]))
        entries[emotion] = means[:k]
    return AssociationTable(emotions=model.space.names, entries=entries)


@dataclass
class SimilarityMatrix:
    """Label-by-word cosine similarities for one sentence."""

    labels: tuple[str, ...]
    words: list[str]
    values: np.ndarray

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label"] + self.words)
            for name, row in zip(self.labels, self.values):
                writer.writerow([name] + [f"{v:.10g}" for v in row])


def sentence_heatmap(model: SpanEmoModel, tokens) -> SimilarityMatrix:
    """Similarity matrix for one example's sentence words."""
    if not tokens:
        raise UsageError("cannot build a heatmap for an empty sentence")
    values, words = label_word_similarities(model, tokens)
    if not words:
        raise UsageError("sentence produced no words within the sequence budget")
    return SimilarityMatrix(labels=model.space.names, words=words, values=values)


def render_heatmap(matrix: SimilarityMatrix, path_base: str) -> list[str]:
    """Write <path_base>.svg and .png (rows labels, columns words, lighter = higher)."""
    plt = _pyplot()
    fig, ax = plt.subplots(
        figsize=(max(4.0, 0.6 * len(matrix.words) + 2), 0.45 * len(matrix.labels) + 1.5)
    )
    im = ax.imshow(matrix.values, cmap="viridis", vmin=-1.0, vmax=1.0, aspect="auto")
    ax.set_yticks(range(len(matrix.labels)), matrix.labels)
    ax.set_xticks(range(len(matrix.words)), matrix.words, rotation=45, ha="right")
    fig.colorbar(im, ax=ax, label="cosine similarity")
    fig.tight_layout()
    paths = [f"{path_base}.svg", f"{path_base}.png"]
    for path in paths:
        fig.savefig(path)
    plt.close(fig)
    return paths


@dataclass
class CorrelationMatrix:
    """Pearson correlations between binary label columns.

    Constant columns have undefined correlation; those cells hold NaN and
    are rendered distinctly rather than silently zeroed.
    """

    names: tuple[str, ...]
    values: np.ndarray
    source: str

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([""] + list(self.names))
            for name, row in zip(self.names, self.values):
                cells = ["undefined" if math.isnan(v) else f"{v:.10g}" for v in row]
                writer.writerow([name] + cells)


def label_correlations(label_vectors, source: str, names: tuple[str, ...] | None = None) -> CorrelationMatrix:
    """Pairwise Pearson correlation of label columns over >= 2 examples."""
    if source not in ("gold", "predicted"):
        raise UsageError(f"source must be 'gold' or 'predicted', got {source!r}")
    x = np.asarray(label_vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise UsageError("label_correlations needs at least 2 examples")
    n_classes = x.shape[1]
    if names is None:
        names = tuple(f"label_{i}" for i in range(n_classes))
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered
    scale = np.sqrt(np.diag(cov))
    values = np.full((n_classes, n_classes), np.nan)
    nonconst = scale > 0.0
    denom = np.outer(scale, scale)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = cov / denom
    mask = np.outer(nonconst, nonconst)
    values[mask] = ratio[mask]
    values[np.diag_indices(n_classes)] = np.where(nonconst, 1.0, np.nan)
    return CorrelationMatrix(names=tuple(names), values=values, source=source)


def render_correlations(matrix: CorrelationMatrix, path_base: str) -> list[str]:
    """Write <path_base>.svg and .png; undefined cells are hatched out."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(0.6 * len(matrix.names) + 2.5, 0.6 * len(matrix.names) + 2))
    cmap = plt.get_cmap("RdBu_r").copy()
    cmap.set_bad(color="0.85")
    masked = np.ma.masked_invalid(matrix.values)
    im = ax.imshow(masked, cmap=cmap, vmin=-1.0, vmax=1.0)
    ax.set_xticks(range(len(matrix.names)), matrix.names, rotation=45, ha="right")
    ax.set_yticks(range(len(matrix.names)), matrix.names)
    for i in range(len(matrix.names)):
        for j in range(len(matrix.names)):
            v = matrix.values[i, j]
            text = "n/a" if math.isnan(v) else f"{v:.2f}"
            ax.text(j, i, text, ha="center", va="center", fontsize=7)
    ax.set_title(f"label correlations ({matrix.source})")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    paths = [f"{path_base}.svg", f"{path_base}.png"]
    for path in paths:
        fig.savefig(path)
    plt.close(fig)
    return paths


@dataclass
class SweepReport:
    """Validation metrics of one training run per mixing weight."""

    rows: list[dict]

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha", "miF1", "maF1", "jacS", "best_epoch", "error"])
            for row in self.rows:
                if "error" in row:
                    writer.writerow([f"{row['alpha']:.10g}", "", "", "", "", row["error"]])
                else:
                    writer.writerow([
                        f"{row['alpha']:.10g}",
                        f"{row['miF1']:.10g}",
                        f"{row['maF1']:.10g}",
                        f"{row['jacS']:.10g}",
                        row["best_epoch"],
                        "",
                    ])


DEFAULT_ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(11))


def alpha_sweep(cfg: TrainConfig, grid, train_set: Dataset, valid_set: Dataset,
                out_dir: str) -> SweepReport:
    """One training run per alpha value with a shared seed.

    Each cell trains from scratch under ``cfg`` with only alpha replaced;
    a failing cell is recorded with its error and the sweep continues.
    Reported metrics are the best-epoch validation scores.
    """
    grid = list(grid)
    if not grid:
        raise UsageError("alpha grid is empty")
    if any(not 0.0 <= a <= 1.0 for a in grid):
        raise UsageError(f"alpha grid must lie in [0, 1], got {grid}")
    if cfg.ablation != "none":
        raise UsageError("alpha_sweep requires ablation 'none' (ablations pin alpha)")
    rows: list[dict] = []
    for alpha in grid:
        cell_cfg = replace(cfg, alpha=float(alpha))
        cell_dir = os.path.join(out_dir, f"alpha_{alpha:g}")
        try:
            result: TrainResult = train(cell_cfg, train_set, valid_set, cell_dir)
            report: MetricReport = result.rows[result.best_epoch - 1].valid_report
            rows.append({
                "alpha": float(alpha),
                "miF1": report.micro_f1,
                "maF1": report.macro_f1,
                "jacS": report.jaccard,
                "best_epoch": result.best_epoch,
            })
        except Exception as exc:  # keep sweeping the remaining cells
            rows.append({"alpha": float(alpha), "error": f"{type(exc).__name__}: {exc}"})
    return SweepReport(rows=rows)


def render_sweep(report: SweepReport, path_base: str) -> list[str]:
    """Line plot of the three metrics over alpha."""
    plt = _pyplot()
    ok = [row for row in report.rows if "error" not in row]
    fig, ax = plt.subplots(figsize=(6, 4))
    if ok:
        alphas = [row["alpha"] for row in ok]
        for metric in ("miF1", "maF1", "jacS"):
            ax.plot(alphas, [row[metric] for row in ok], marker="o", label=metric)
    ax.set_xlabel("alpha")
    ax.set_ylabel("validation score")
    ax.set_ylim(0.0, 1.0)
    ax.legend()
    fig.tight_layout()
    paths = [f"{path_base}.svg", f"{path_base}.png"]
    for path in paths:
        fig.savefig(path)
    plt.close(fig)
    return paths


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt

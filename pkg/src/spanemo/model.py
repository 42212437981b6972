"""Encoders and scoring heads.

The model reads one probability per emotion class off the label-token
positions of the encoded sequence: every token position gets the scalar
score ``p · tanh(W h + b)`` (one shared hidden layer, one shared position
vector), and the sigmoid of the scores at the label positions is the
prediction vector. The "no label segment" ablation swaps in a pooled head
that classifies from the [CLS] position of a sentence-only input instead.

Two encoders satisfy the same contract: a small deterministic trainable
encoder (embedding table + window-average mixing) that makes the whole
pipeline testable on a laptop, and an adapter around a pretrained
bidirectional transformer (see ``spanemo.pretrained``).
"""

from __future__ import annotations

import abc
from typing import Sequence

import numpy as np

from spanemo.errors import DimensionError, UsageError
from spanemo.inputs import ModelInput, assemble_input, assemble_sentence_only
from spanemo.labels import LabelSpace
from spanemo.optim import Adam


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def predict(probs: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Threshold probabilities into a binary label vector (strictly greater)."""
    if not 0.0 < threshold < 1.0:
        raise UsageError(f"threshold must lie strictly inside (0, 1), got {threshold}")
    probs = np.asarray(probs, dtype=np.float64)
    return (probs > threshold).astype(np.int8)


# ---------------------------------------------------------------------------
# Encoders
# ---------------------------------------------------------------------------

class EncoderContract(abc.ABC):
    """What the trainer and heads need from any encoder.

    ``encode`` must be deterministic given parameters and input (dropout
    off in eval mode). Training uses ``encode_for_training`` /
    ``backward`` / ``step``; the encoder owns its optimizer state so
    adapters can keep gradients in their native framework.
    """

    hidden_width: int

    @abc.abstractmethod
    def encode(self, model_input: ModelInput) -> np.ndarray:
        """Hidden states for one input, shape (T, hidden_width); eval mode."""

    @abc.abstractmethod
    def encode_for_training(self, model_input: ModelInput) -> tuple[np.ndarray, object]:
        """Hidden states plus an opaque cache consumed by ``backward``."""

    @abc.abstractmethod
    def backward(self, cache: object, d_hidden: np.ndarray) -> None:
        """Accumulate parameter gradients from dLoss/dHidden."""

    @abc.abstractmethod
    def zero_grads(self) -> None: ...

    @abc.abstractmethod
    def step(self, lr: float) -> None:
        """Apply accumulated gradients with the encoder's own Adam state."""


class ToyEncoder(EncoderContract):
    """Trainable embedding table plus a window-average mixing layer.

    Each position's hidden state is its (embedding + optional position
    embedding) plus a learned gain times the mean embedding over a context
    window. The default window is the whole sequence: that routes sentence
    evidence into the label positions (a local window cannot reach across
    the [SEP]), and it makes the encoder exactly equivariant to token
    permutations when position embeddings are off, which tests rely on.
    """

    kind = "toy"

    def __init__(self, vocab_size: int, hidden_width: int = 32, window: int | None = None,
                 use_position_embeddings: bool = True, max_len: int = 128, seed: int = 0):
        if window is not None and window < 1:
            raise ValueError(f"window must be None or >= 1, got {window}")
        self.vocab_size = vocab_size
        self.hidden_width = hidden_width
        self.window = window
        self.use_position_embeddings = use_position_embeddings
        self.max_len = max_len
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = {
            "emb": rng.normal(0.0, 0.1, size=(vocab_size, hidden_width)),
            "gain": np.full(hidden_width, 0.5),
        }
        if use_position_embeddings:
            self.params["pos"] = rng.normal(0.0, 0.02, size=(max_len, hidden_width))
        self.grads = {name: np.zeros_like(p) for name, p in self.params.items()}
        self._adam = Adam()

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "vocab_size": self.vocab_size,
            "hidden_width": self.hidden_width,
            "window": self.window,
            "use_position_embeddings": self.use_position_embeddings,
            "max_len": self.max_len,
            "seed": self.seed,
        }

    def _mix(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Window (or global) mean of the rows, plus the per-row window sizes."""
        t = x.shape[0]
        if self.window is None:
            mean = np.broadcast_to(x.mean(axis=0), x.shape)
            return mean, np.full(t, float(t))
        cs = np.vstack([np.zeros((1, x.shape[1])), np.cumsum(x, axis=0)])
        idx = np.arange(t)
        hi = np.minimum(idx + self.window, t - 1)
        lo = np.maximum(idx - self.window, 0)
        n = (hi - lo + 1).astype(np.float64)
        return (cs[hi + 1] - cs[lo]) / n[:, None], n

    def _mix_transpose(self, z: np.ndarray) -> np.ndarray:
        """Adjoint of the mixing mean: scatter row contributions back to sources."""
        t = z.shape[0]
        if self.window is None:
            return np.broadcast_to(z.sum(axis=0) / t, z.shape).copy()
        n = np.minimum(np.arange(t) + self.window, t - 1) - np.maximum(np.arange(t) - self.window, 0) + 1
        scaled = z / n[:, None].astype(np.float64)
        cs = np.vstack([np.zeros((1, z.shape[1])), np.cumsum(scaled, axis=0)])
        idx = np.arange(t)
        hi = np.minimum(idx + self.window, t - 1)
        lo = np.maximum(idx - self.window, 0)
        return cs[hi + 1] - cs[lo]

    def _embed(self, ids: np.ndarray) -> np.ndarray:
        x = self.params["emb"][ids]
        if self.use_position_embeddings:
            if len(ids) > self.max_len:
                raise DimensionError(
                    f"sequence of length {len(ids)} exceeds position table ({self.max_len})"
                )
            x = x + self.params["pos"][: len(ids)]
        return x

    def encode(self, model_input: ModelInput) -> np.ndarray:
        ids = np.asarray(model_input.token_ids)
        x = self._embed(ids)
        mean, _ = self._mix(x)
        return x + self.params["gain"] * mean

    def encode_for_training(self, model_input: ModelInput) -> tuple[np.ndarray, object]:
        ids = np.asarray(model_input.token_ids)
        x = self._embed(ids)
        mean, _ = self._mix(x)
        hidden = x + self.params["gain"] * mean
        return hidden, (ids, mean)

    def backward(self, cache: object, d_hidden: np.ndarray) -> None:
        ids, mean = cache
        self.grads["gain"] += (d_hidden * mean).sum(axis=0)
        d_x = d_hidden + self._mix_transpose(self.params["gain"] * d_hidden)
        np.add.at(self.grads["emb"], ids, d_x)
        if self.use_position_embeddings:
            self.grads["pos"][: len(ids)] += d_x

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def step(self, lr: float) -> None:
        self._adam.step(self.params, self.grads, lr)


# ---------------------------------------------------------------------------
# Heads
# ---------------------------------------------------------------------------

def _dropout_mask(shape, rate: float, train: bool, rng: np.random.Generator | None) -> np.ndarray:
    """Inverted-dropout mask; all-ones in eval mode or at rate 0."""
    if not train or rate <= 0.0:
        return np.ones(shape)
    if rng is None:
        raise UsageError("training-mode scoring with dropout needs an RNG")
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


class SpanHead:
    """Shared token scorer: score(h) = p . tanh(W h + b), read at label positions."""

    kind = "span"

    def __init__(self, hidden_width: int, dropout: float = 0.1, seed: int = 0,
                 zero_init: bool = False):
        self.hidden_width = hidden_width
        self.dropout = dropout
        if zero_init:
            w = np.zeros((hidden_width, hidden_width))
            p = np.zeros(hidden_width)
        else:
            rng = np.random.default_rng(seed)
            scale = 1.0 / np.sqrt(hidden_width)
            w = rng.normal(0.0, scale, size=(hidden_width, hidden_width))
            p = rng.normal(0.0, scale, size=hidden_width)
        self.params: dict[str, np.ndarray] = {"W": w, "b": np.zeros(hidden_width), "p": p}
        self.grads = {name: np.zeros_like(v) for name, v in self.params.items()}

    def scores(self, hidden: np.ndarray, positions: Sequence[int] | None = None,
               train: bool = False, rng: np.random.Generator | None = None):
        """Scores at ``positions`` (all positions when None); returns (scores, cache)."""
        if hidden.ndim != 2 or hidden.shape[1] != self.hidden_width:
            raise DimensionError(
                f"hidden states of width {hidden.shape[-1] if hidden.ndim == 2 else hidden.shape}"
                f" do not match head width {self.hidden_width}"
            )
        h_sel = hidden if positions is None else hidden[np.asarray(positions, dtype=np.intp)]
        act = np.tanh(h_sel @ self.params["W"].T + self.params["b"])
        mask = _dropout_mask(act.shape, self.dropout, train, rng)
        dropped = act * mask
        scores = dropped @ self.params["p"]
        return scores, (h_sel, act, mask, positions)

    def backward(self, cache, d_scores: np.ndarray) -> np.ndarray:
        """Accumulate head gradients; returns dLoss/dHidden at the selected rows."""
        h_sel, act, mask, _ = cache
        self.grads["p"] += (act * mask).T @ d_scores
        d_act = np.outer(d_scores, self.params["p"]) * mask
        d_z = d_act * (1.0 - act * act)
        self.grads["W"] += d_z.T @ h_sel
        self.grads["b"] += d_z.sum(axis=0)
        return d_z @ self.params["W"]

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def config(self) -> dict:
        return {"kind": self.kind, "hidden_width": self.hidden_width, "dropout": self.dropout}


class PooledHead:
    """Sentence-only classifier head: |C|-way sigmoid over tanh(W h_cls + b)."""

    kind = "pooled"

    def __init__(self, hidden_width: int, n_classes: int, dropout: float = 0.1,
                 seed: int = 0, zero_init: bool = False):
        self.hidden_width = hidden_width
        self.n_classes = n_classes
        self.dropout = dropout
        if zero_init:
            w = np.zeros((hidden_width, hidden_width))
            u = np.zeros((n_classes, hidden_width))
        else:
            rng = np.random.default_rng(seed)
            scale = 1.0 / np.sqrt(hidden_width)
            w = rng.normal(0.0, scale, size=(hidden_width, hidden_width))
            u = rng.normal(0.0, scale, size=(n_classes, hidden_width))
        self.params: dict[str, np.ndarray] = {
            "W": w,
            "b": np.zeros(hidden_width),
            "U": u,
            "c": np.zeros(n_classes),
        }
        self.grads = {name: np.zeros_like(v) for name, v in self.params.items()}

    def scores(self, hidden: np.ndarray, positions=None, train: bool = False,
               rng: np.random.Generator | None = None):
        if hidden.shape[1] != self.hidden_width:
            raise DimensionError(
                f"hidden width {hidden.shape[1]} does not match head width {self.hidden_width}"
            )
        h_cls = hidden[0]
        act = np.tanh(self.params["W"] @ h_cls + self.params["b"])
        mask = _dropout_mask(act.shape, self.dropout, train, rng)
        dropped = act * mask
        logits = self.params["U"] @ dropped + self.params["c"]
        return logits, (h_cls, act, mask)

    def backward(self, cache, d_logits: np.ndarray) -> np.ndarray:
        h_cls, act, mask = cache
        self.grads["U"] += np.outer(d_logits, act * mask)
        self.grads["c"] += d_logits
        d_act = (self.params["U"].T @ d_logits) * mask
        d_z = d_act * (1.0 - act * act)
        self.grads["W"] += np.outer(d_z, h_cls)
        self.grads["b"] += d_z
        d_hidden = np.zeros((1, self.hidden_width))
        d_hidden[0] = self.params["W"].T @ d_z
        return d_hidden

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "hidden_width": self.hidden_width,
            "n_classes": self.n_classes,
            "dropout": self.dropout,
        }


def score_tokens(hidden: np.ndarray, head: SpanHead) -> np.ndarray:
    """Score every token position: p . tanh(W h_t + b), eval mode."""
    scores, _ = head.scores(np.asarray(hidden, dtype=np.float64), positions=None, train=False)
    return scores


# ---------------------------------------------------------------------------
# Full model
# ---------------------------------------------------------------------------

class SpanEmoModel:
    """Label space + tokenizer + encoder + head, wired for forward and backward."""

    def __init__(self, space: LabelSpace, vocab, encoder: EncoderContract, head,
                 sentence_only: bool = False, max_seq_len: int = 128):
        if sentence_only != (head.kind == "pooled"):
            raise UsageError("sentence_only models need the pooled head and vice versa")
        self.space = space
        self.vocab = vocab
        self.encoder = encoder
        self.head = head
        self.sentence_only = sentence_only
        self.max_seq_len = max_seq_len

    def assemble(self, tokens: Sequence[str]) -> ModelInput:
        if self.sentence_only:
            return assemble_sentence_only(tokens, self.vocab, self.max_seq_len)
        return assemble_input(self.space, tokens, self.vocab, self.max_seq_len)

    def forward_input(self, model_input: ModelInput) -> np.ndarray:
        """Eval-mode probabilities, one per class, each in (0, 1)."""
        hidden = self.encoder.encode(model_input)
        positions = None if self.sentence_only else model_input.label_positions
        scores, _ = self.head.scores(hidden, positions=positions, train=False)
        return sigmoid(scores)

    def forward(self, tokens: Sequence[str]) -> np.ndarray:
        return self.forward_input(self.assemble(tokens))

    def training_forward(self, model_input: ModelInput, rng: np.random.Generator):
        """Probabilities plus the tape needed by ``training_backward``."""
        hidden, enc_cache = self.encoder.encode_for_training(model_input)
        positions = None if self.sentence_only else model_input.label_positions
        scores, head_cache = self.head.scores(hidden, positions=positions, train=True, rng=rng)
        probs = sigmoid(scores)
        return probs, (model_input, hidden.shape, enc_cache, head_cache, probs)

    def training_backward(self, tape, d_probs: np.ndarray) -> None:
        """Chain dLoss/dProbs through sigmoid, head, and encoder; accumulate grads."""
        model_input, hidden_shape, enc_cache, head_cache, probs = tape
        d_scores = d_probs * probs * (1.0 - probs)
        d_sel = self.head.backward(head_cache, d_scores)
        d_hidden = np.zeros(hidden_shape)
        if self.sentence_only:
            d_hidden[0] = d_sel[0]
        else:
            d_hidden[np.asarray(model_input.label_positions, dtype=np.intp)] = d_sel
        self.encoder.backward(enc_cache, d_hidden)

    def zero_grads(self) -> None:
        self.encoder.zero_grads()
        self.head.zero_grads()

"""Fine-tuning loop: two learning-rate groups, early stopping, checkpointing,
and the ablation switches.

Defaults follow the reference configuration: batch size 32, 20 epochs,
early-stop patience 10, Adam with 2e-5 on the encoder and 1e-3 on the head,
dropout 0.1, alpha 0.2. Runs are reproducible: the seed fixes parameter
initialization, batch order, and dropout masks, so identical config + data
produce an identical training log with the toy encoder.

Ablations:

* ``no_lca``  — alpha forced to 0 (binary cross-entropy only)
* ``no_bce``  — alpha forced to 1 (pairwise loss only)
* ``no_label_segment`` — sentence-only input with the pooled [CLS] head,
  i.e. plain multi-label classification without label tokens.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass

import numpy as np

from spanemo.data import Dataset
from spanemo.errors import TrainingDivergedError, UsageError
from spanemo.inputs import SimpleVocab
from spanemo.labels import LabelSpace
from spanemo.metrics import MetricReport, evaluate
from spanemo.model import PooledHead, SpanEmoModel, SpanHead, ToyEncoder, predict
from spanemo.objectives import LossConfig, joint_loss, joint_loss_with_grad
from spanemo.optim import Adam

ABLATIONS = ("none", "no_lca", "no_bce", "no_label_segment")
SELECTION_METRICS = ("jacS", "miF1", "maF1")

CHECKPOINT_META = "meta.json"
CHECKPOINT_WEIGHTS = "weights.npz"
CHECKPOINT_VOCAB = "vocab.json"


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 20
    early_stop_patience: int = 10
    lr_encoder: float = 2e-5
    lr_head: float = 1e-3
    dropout: float = 0.1
    alpha: float = 0.2
    seed: int = 42
    ablation: str = "none"
    selection_metric: str = "jacS"
    threshold: float = 0.5
    max_seq_len: int = 128
    # toy-encoder construction knobs (ignored when a model is supplied)
    toy_hidden_width: int = 32
    toy_window: int | None = None
    toy_position_embeddings: bool = True

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.epochs < 1:
            raise UsageError("batch_size and epochs must be >= 1")
        if self.lr_encoder <= 0 or self.lr_head <= 0:
            raise UsageError("learning rates must be > 0")
        if not 0 <= self.early_stop_patience <= self.epochs:
            raise UsageError("early_stop_patience must lie in [0, epochs]")
        if not 0.0 <= self.alpha <= 1.0:
            raise UsageError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.dropout < 1.0:
            raise UsageError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.ablation not in ABLATIONS:
            raise UsageError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.selection_metric not in SELECTION_METRICS:
            raise UsageError(
                f"selection_metric must be one of {SELECTION_METRICS}, got {self.selection_metric!r}"
            )
        if not 0.0 < self.threshold < 1.0:
            raise UsageError(f"threshold must lie in (0, 1), got {self.threshold}")

    @property
    def effective_alpha(self) -> float:
        if self.ablation == "no_lca":
            return 0.0
        if self.ablation == "no_bce":
            return 1.0
        return self.alpha

    @property
    def sentence_only(self) -> bool:
        return self.ablation == "no_label_segment"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    valid_loss: float
    valid_report: MetricReport


@dataclass
class TrainResult:
    checkpoint_path: str
    log_path: str
    rows: list[EpochRow]
    best_epoch: int
    best_score: float
    stopped_early: bool


def build_toy_model(cfg: TrainConfig, space: LabelSpace, datasets: list[Dataset],
                    piece_map: dict[str, list[str]] | None = None) -> SpanEmoModel:
    """Toy-encoder model with all parameters derived from ``cfg.seed``."""
    vocab = SimpleVocab.build(
        [ex.tokens for ds in datasets for ex in ds.examples], space, piece_map=piece_map
    )
    encoder = ToyEncoder(
        vocab_size=len(vocab),
        hidden_width=cfg.toy_hidden_width,
        window=cfg.toy_window,
        use_position_embeddings=cfg.toy_position_embeddings,
        max_len=cfg.max_seq_len,
        seed=cfg.seed,
    )
    if cfg.sentence_only:
        head = PooledHead(encoder.hidden_width, len(space), dropout=cfg.dropout, seed=cfg.seed + 1)
    else:
        head = SpanHead(encoder.hidden_width, dropout=cfg.dropout, seed=cfg.seed + 1)
    return SpanEmoModel(space, vocab, encoder, head,
                        sentence_only=cfg.sentence_only, max_seq_len=cfg.max_seq_len)


def train(cfg: TrainConfig, train_set: Dataset, valid_set: Dataset, out_dir: str,
          model: SpanEmoModel | None = None) -> TrainResult:
    """Run the fine-tuning loop; returns paths to the best checkpoint and the log.

    The best checkpoint is the epoch with the highest validation
    ``cfg.selection_metric`` (strict improvement); training stops at the
    epoch limit or once ``early_stop_patience`` epochs pass without
    improvement.
    """
    if len(train_set) == 0:
        raise UsageError("training set is empty")
    if len(valid_set) == 0:
        raise UsageError("validation set is empty")
    if train_set.space != valid_set.space:
        raise UsageError("train and valid sets use different label spaces")
    if model is None:
        model = build_toy_model(cfg, train_set.space, [train_set, valid_set])
    if model.sentence_only != cfg.sentence_only:
        raise UsageError(
            f"model head does not match ablation {cfg.ablation!r}; "
            "build the model from the same config"
        )

    os.makedirs(out_dir, exist_ok=True)
    checkpoint_path = os.path.join(out_dir, "checkpoint")
    log_path = os.path.join(out_dir, "log.csv")

    # Inputs never change across epochs; assemble once.
    train_inputs = [model.assemble(ex.tokens) for ex in train_set]
    valid_inputs = [model.assemble(ex.tokens) for ex in valid_set]
    train_gold = [ex.labels for ex in train_set]
    valid_gold = [ex.labels for ex in valid_set]

    loss_cfg = LossConfig(alpha=cfg.effective_alpha)
    shuffle_rng = np.random.default_rng(cfg.seed)
    dropout_rng = np.random.default_rng(cfg.seed + 1)
    head_adam = Adam()

    rows: list[EpochRow] = []
    best_score = -math.inf
    best_epoch = 0
    since_improvement = 0
    stopped_early = False

    log_buffer = io.StringIO()
    writer = csv.writer(log_buffer)
    writer.writerow(["epoch", "split", "loss", "miF1", "maF1", "jacS"])

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_set))
        epoch_loss = 0.0
        n_batches = 0
        for batch_index, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = order[start:start + cfg.batch_size]
            model.zero_grads()
            probs_batch = []
            tapes = []
            for i in batch:
                probs, tape = model.training_forward(train_inputs[i], dropout_rng)
                probs_batch.append(probs)
                tapes.append(tape)
            value, grad = joint_loss_with_grad([train_gold[i] for i in batch], probs_batch, loss_cfg)
            if not math.isfinite(value.total):
                raise TrainingDivergedError(epoch, batch_index, value.total)
            for tape, g in zip(tapes, grad):
                model.training_backward(tape, g)
            head_adam.step(model.head.params, model.head.grads, cfg.lr_head)
            model.encoder.step(cfg.lr_encoder)
            epoch_loss += value.total
            n_batches += 1
        train_loss = epoch_loss / n_batches

        valid_probs = [model.forward_input(inp) for inp in valid_inputs]
        valid_loss = joint_loss(valid_gold, valid_probs, loss_cfg).total
        preds = [predict(p, cfg.threshold) for p in valid_probs]
        report = evaluate(valid_gold, preds)
        rows.append(EpochRow(epoch, train_loss, valid_loss, report))

        writer.writerow([epoch, "train", _fmt(train_loss), "", "", ""])
        writer.writerow([
            epoch, "valid", _fmt(valid_loss),
            _fmt(report.micro_f1), _fmt(report.macro_f1), _fmt(report.jaccard),
        ])

        score = report.by_name(cfg.selection_metric)
        if score > best_score:
            best_score = score
            best_epoch = epoch
            since_improvement = 0
            save_checkpoint(model, checkpoint_path, _checkpoint_meta(cfg, best_epoch, best_score))
        else:
            since_improvement += 1
            if since_improvement >= cfg.early_stop_patience:
                stopped_early = True
                break

    _atomic_write_text(log_path, log_buffer.getvalue())
    return TrainResult(
        checkpoint_path=checkpoint_path,
        log_path=log_path,
        rows=rows,
        best_epoch=best_epoch,
        best_score=best_score,
        stopped_early=stopped_early,
    )


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _checkpoint_meta(cfg: TrainConfig, best_epoch: int, best_score: float) -> dict:
    return {
        "format_version": 1,
        "train_config": cfg.to_dict(),
        "ablation": cfg.ablation,
        "alpha": cfg.effective_alpha,
        "threshold": cfg.threshold,
        "seed": cfg.seed,
        "selection_metric": cfg.selection_metric,
        "best_epoch": best_epoch,
        "best_score": best_score,
    }


# ---------------------------------------------------------------------------
# Checkpoint persistence
# ---------------------------------------------------------------------------

def save_checkpoint(model: SpanEmoModel, path: str, meta: dict | None = None) -> str:
    """Persist parameters + a JSON sidecar (label space, threshold, alpha, seed).

    Every file is written to a temp name and renamed into place, so a
    half-written checkpoint is never observed at ``path``.
    """
    os.makedirs(path, exist_ok=True)
    meta = dict(meta or {})
    meta.setdefault("format_version", 1)
    meta["space"] = model.space.to_dict()
    meta["sentence_only"] = model.sentence_only
    meta["max_seq_len"] = model.max_seq_len
    meta["encoder"] = model.encoder.config()
    meta["head"] = model.head.config()

    arrays: dict[str, np.ndarray] = {}
    if isinstance(model.encoder, ToyEncoder):
        for name, arr in model.encoder.params.items():
            arrays[f"encoder/{name}"] = arr
    else:
        model.encoder.save_native(path)  # adapter-managed formats
    for name, arr in model.head.params.items():
        arrays[f"head/{name}"] = arr

    buf = io.BytesIO()
    np.savez(buf, **arrays)
    _atomic_write_bytes(os.path.join(path, CHECKPOINT_WEIGHTS), buf.getvalue())
    if isinstance(model.vocab, SimpleVocab):
        _atomic_write_text(
            os.path.join(path, CHECKPOINT_VOCAB),
            json.dumps(model.vocab.to_dict(), ensure_ascii=False),
        )
    _atomic_write_text(
        os.path.join(path, CHECKPOINT_META),
        json.dumps(meta, indent=2, sort_keys=True, ensure_ascii=False),
    )
    return path


def load_checkpoint(path: str) -> tuple[SpanEmoModel, dict]:
    """Rebuild a model (and its metadata) from ``save_checkpoint`` output."""
    meta_path = os.path.join(path, CHECKPOINT_META)
    if not os.path.exists(meta_path):
        raise UsageError(f"no checkpoint at {path!r} (missing {CHECKPOINT_META})")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    space = LabelSpace.from_dict(meta["space"])
    with np.load(os.path.join(path, CHECKPOINT_WEIGHTS)) as npz:
        arrays = {key: npz[key] for key in npz.files}

    enc_cfg = dict(meta["encoder"])
    kind = enc_cfg.pop("kind")
    if kind == "toy":
        encoder = ToyEncoder(**enc_cfg)
        for name in encoder.params:
            encoder.params[name][...] = arrays[f"encoder/{name}"]
        with open(os.path.join(path, CHECKPOINT_VOCAB), encoding="utf-8") as fh:
            vocab = SimpleVocab.from_dict(json.load(fh))
    elif kind == "pretrained":
        from spanemo.pretrained import PretrainedTransformerEncoder

        encoder = PretrainedTransformerEncoder.load_native(path, enc_cfg)
        vocab = encoder.tokenizer
    else:
        raise UsageError(f"unknown encoder kind {kind!r} in checkpoint")

    head_cfg = meta["head"]
    if head_cfg["kind"] == "span":
        head = SpanHead(head_cfg["hidden_width"], dropout=head_cfg["dropout"], zero_init=True)
    else:
        head = PooledHead(head_cfg["hidden_width"], head_cfg["n_classes"],
                          dropout=head_cfg["dropout"], zero_init=True)
    for name in head.params:
        head.params[name][...] = arrays[f"head/{name}"]

    model = SpanEmoModel(space, vocab, encoder, head,
                         sentence_only=meta["sentence_only"],
                         max_seq_len=meta["max_seq_len"])
    return model, meta


def evaluate_checkpoint(checkpoint_path: str, dataset: Dataset,
                        threshold: float | None = None) -> MetricReport:
    """Deterministic eval-mode metrics for a saved checkpoint on a dataset."""
    model, meta = load_checkpoint(checkpoint_path)
    if model.space.names != dataset.space.names:
        raise UsageError(
            f"checkpoint label space {model.space.names} does not match "
            f"dataset label space {dataset.space.names}"
        )
    if threshold is None:
        threshold = meta.get("threshold", 0.5)
    gold = [ex.labels for ex in dataset]
    preds = [predict(model.forward(ex.tokens), threshold) for ex in dataset]
    return evaluate(gold, preds)


def predict_dataset(model: SpanEmoModel, dataset: Dataset,
                    threshold: float = 0.5) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Eval-mode probabilities and thresholded predictions for every example."""
    probs = [model.forward(ex.tokens) for ex in dataset]
    preds = [predict(p, threshold) for p in probs]
    return probs, preds


def _atomic_write_text(path: str, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _atomic_write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

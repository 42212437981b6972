"""Adapter around a pretrained bidirectional-transformer encoder.

Targets BERT-style checkpoints (a vocabulary containing [CLS]/[SEP]), loaded
by local path or registry id; the download cache honours the SPANEMO_CACHE
environment variable. torch and transformers are imported lazily so the rest
of the toolkit works without them.

The adapter keeps its gradients and optimizer state on the torch side: the
trainer hands it dLoss/dHidden, the adapter backpropagates through the
transformer and applies its own Adam step at the encoder learning rate.
"""

from __future__ import annotations

import os

import numpy as np

from spanemo.errors import UsageError
from spanemo.inputs import ModelInput
from spanemo.model import EncoderContract

DEFAULT_MODEL_IDS = {
    "english": "bert-base-uncased",
    "arabic": "asafaya/bert-base-arabic",
    "spanish": "dccuchile/bert-base-spanish-wwm-uncased",
}

ENCODER_WEIGHTS = "encoder.pt"
TOKENIZER_DIR = "tokenizer"


def _require_torch():
    try:
        import torch  # noqa: F401
        import transformers  # noqa: F401
    except ImportError as exc:
        raise UsageError(
            "the pretrained encoder needs the optional dependencies: "
            "pip install 'spanemo[pretrained]'"
        ) from exc
    return torch, transformers


class HFTokenizer:
    """Wraps a transformers tokenizer into the toolkit's piece interface."""

    def __init__(self, hf_tokenizer):
        self.hf = hf_tokenizer

    def pieces(self, token: str) -> list[str]:
        out = self.hf.tokenize(token)
        return out if out else [self.hf.unk_token]

    def piece_id(self, piece: str) -> int:
        return int(self.hf.convert_tokens_to_ids(piece))


class PretrainedTransformerEncoder(EncoderContract):
    kind = "pretrained"

    def __init__(self, model_id: str, cache_dir: str | None = None, seed: int | None = None,
                 _model=None, _tokenizer=None):
        torch, transformers = _require_torch()
        self._torch = torch
        if seed is not None:
            torch.manual_seed(seed)
        cache = cache_dir or os.environ.get("SPANEMO_CACHE")
        self.model_id = model_id
        if _model is None:
            _model = transformers.AutoModel.from_pretrained(model_id, cache_dir=cache)
        if _tokenizer is None:
            _tokenizer = transformers.AutoTokenizer.from_pretrained(model_id, cache_dir=cache)
        self.model = _model
        self.tokenizer = HFTokenizer(_tokenizer)
        self.hidden_width = int(self.model.config.hidden_size)
        self._optimizer = None

    def _tensors(self, model_input: ModelInput):
        torch = self._torch
        return {
            "input_ids": torch.tensor([model_input.token_ids], dtype=torch.long),
            "token_type_ids": torch.tensor([model_input.segment_ids], dtype=torch.long),
            "attention_mask": torch.tensor([model_input.attention_mask], dtype=torch.long),
        }

    def encode(self, model_input: ModelInput) -> np.ndarray:
        torch = self._torch
        self.model.eval()
        with torch.no_grad():
            out = self.model(**self._tensors(model_input))
        return out.last_hidden_state[0].numpy().astype(np.float64)

    def encode_for_training(self, model_input: ModelInput):
        self.model.train()
        out = self.model(**self._tensors(model_input))
        hidden = out.last_hidden_state[0]
        return hidden.detach().numpy().astype(np.float64), hidden

    def backward(self, cache, d_hidden: np.ndarray) -> None:
        torch = self._torch
        grad = torch.from_numpy(np.ascontiguousarray(d_hidden, dtype=np.float32))
        cache.backward(gradient=grad)

    def zero_grads(self) -> None:
        if self._optimizer is not None:
            self._optimizer.zero_grad()
        else:
            self.model.zero_grad()

    def step(self, lr: float) -> None:
        torch = self._torch
        if self._optimizer is None:
            self._optimizer = torch.optim.Adam(self.model.parameters(), lr=lr)
        for group in self._optimizer.param_groups:
            group["lr"] = lr
        self._optimizer.step()

    def config(self) -> dict:
        return {"kind": self.kind, "model_id": self.model_id}

    def save_native(self, path: str) -> None:
        torch = self._torch
        torch.save(self.model.state_dict(), os.path.join(path, ENCODER_WEIGHTS))
        self.tokenizer.hf.save_pretrained(os.path.join(path, TOKENIZER_DIR))
        self.model.config.save_pretrained(os.path.join(path, TOKENIZER_DIR))

    @classmethod
    def load_native(cls, path: str, cfg: dict) -> "PretrainedTransformerEncoder":
        torch, transformers = _require_torch()
        tok_dir = os.path.join(path, TOKENIZER_DIR)
        config = transformers.AutoConfig.from_pretrained(tok_dir)
        model = transformers.AutoModel.from_config(config)
        state = torch.load(os.path.join(path, ENCODER_WEIGHTS), map_location="cpu")
        model.load_state_dict(state)
        tokenizer = transformers.AutoTokenizer.from_pretrained(tok_dir)
        return cls(cfg["model_id"], _model=model, _tokenizer=tokenizer)

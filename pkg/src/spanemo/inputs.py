"""Two-segment input assembly: label words first, then the sentence.

The assembled sequence is ``[CLS] <label word pieces> [SEP] <sentence
pieces>`` with segment id 0 for everything up to and including the [SEP]
and 1 for the sentence. ``label_positions[i]`` points at the *first*
sub-word piece of label ``i``, preserving a 1-to-1 correspondence between
label tokens and classes even when a label word splits into several pieces.

Truncation only ever removes sentence pieces; the label segment is never
cut. The sentence-only variant (used by the "no label segment" ablation)
assembles ``[CLS] <sentence pieces> [SEP]`` with no label tokens at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

from spanemo.errors import InputTooLongError, UsageError
from spanemo.labels import LabelSpace

CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
UNK_TOKEN = "[UNK]"
PAD_TOKEN = "[PAD]"

DEFAULT_MAX_SEQ_LEN = 128


class Tokenizer(Protocol):
    """Minimal sub-word interface shared by the simple vocab and adapters."""

    def pieces(self, token: str) -> list[str]:
        """Sub-word pieces for one whitespace-level token (never empty)."""
        ...

    def piece_id(self, piece: str) -> int:
        ...


class SimpleVocab:
    """Whole-token vocabulary for the toy encoder.

    Unknown tokens map to [UNK]. ``piece_map`` optionally splits selected
    tokens into multiple pieces, which is how tests model sub-word
    tokenizers without pulling one in.
    """

    def __init__(self, tokens: Sequence[str], piece_map: dict[str, list[str]] | None = None):
        self.piece_map = dict(piece_map or {})
        specials = [PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN]
        seen = dict.fromkeys(specials)
        for tok in tokens:
            for piece in self.pieces(tok):
                seen.setdefault(piece)
        self.id_to_token = list(seen)
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}

    def __len__(self) -> int:
        return len(self.id_to_token)

    def pieces(self, token: str) -> list[str]:
        return list(self.piece_map.get(token, [token]))

    def piece_id(self, piece: str) -> int:
        return self.token_to_id.get(piece, self.token_to_id[UNK_TOKEN])

    def to_dict(self) -> dict:
        return {"tokens": self.id_to_token, "piece_map": self.piece_map}

    @classmethod
    def from_dict(cls, data: dict) -> "SimpleVocab":
        vocab = cls([], piece_map=data.get("piece_map", {}))
        vocab.id_to_token = list(data["tokens"])
        vocab.token_to_id = {tok: i for i, tok in enumerate(vocab.id_to_token)}
        return vocab

    @classmethod
    def build(cls, token_lists: Sequence[Sequence[str]], space: LabelSpace,
              piece_map: dict[str, list[str]] | None = None) -> "SimpleVocab":
        """Vocabulary over dataset tokens plus the label surface tokens."""
        all_tokens: list[str] = list(space.surface_tokens)
        for tokens in token_lists:
            all_tokens.extend(tokens)
        return cls(all_tokens, piece_map=piece_map)


@dataclass
class ModelInput:
    """Assembled token sequence with segment ids and label piece positions.

    ``sentence_spans[j]`` is the [start, end) piece range of sentence word
    ``sentence_words[j]``; analysis code uses it to pool multi-piece words
    back into one vector.
    """

    token_ids: list[int]
    segment_ids: list[int]
    label_positions: list[int]
    attention_mask: list[int]
    pieces: list[str]
    sentence_words: list[str] = field(default_factory=list)
    sentence_spans: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = len(self.token_ids)
        if not (len(self.segment_ids) == len(self.attention_mask) == len(self.pieces) == n):
            raise ValueError("token_ids, segment_ids, attention_mask, pieces must align")
        if any(b - a <= 0 for a, b in zip(self.label_positions, self.label_positions[1:])):
            raise ValueError("label_positions must be strictly increasing")
        for pos in self.label_positions:
            if not 0 <= pos < n:
                raise ValueError(f"label position {pos} outside sequence of length {n}")
            if self.segment_ids[pos] != 0:
                raise ValueError(f"label position {pos} not inside the label segment")

    def __len__(self) -> int:
        return len(self.token_ids)

    @property
    def uses_label_segment(self) -> bool:
        return bool(self.label_positions)


def assemble_input(space: LabelSpace, tokens: Sequence[str], vocab: Tokenizer,
                   max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> ModelInput:
    """Build the two-segment input for one sentence.

    Raises ``InputTooLongError`` when [CLS] + label pieces + [SEP] alone
    exceed ``max_seq_len`` (the sentence can be truncated to nothing, the
    label segment cannot).
    """
    pieces: list[str] = [CLS_TOKEN]
    segments: list[int] = [0]
    label_positions: list[int] = []
    for surface in space.surface_tokens:
        sub = vocab.pieces(surface)
        if not sub:
            raise UsageError(f"label surface token {surface!r} produced no vocabulary pieces")
        label_positions.append(len(pieces))
        pieces.extend(sub)
        segments.extend([0] * len(sub))
    pieces.append(SEP_TOKEN)
    segments.append(0)

    floor = len(pieces)
    if floor > max_seq_len:
        raise InputTooLongError(
            f"label segment needs {floor} positions but max_seq_len={max_seq_len}"
        )

    sentence_words: list[str] = []
    sentence_spans: list[tuple[int, int]] = []
    budget = max_seq_len - floor
    for word in tokens:
        sub = vocab.pieces(word)
        if len(sub) > budget:
            break
        start = len(pieces)
        pieces.extend(sub)
        segments.extend([1] * len(sub))
        sentence_words.append(word)
        sentence_spans.append((start, start + len(sub)))
        budget -= len(sub)

    ids = [vocab.piece_id(p) for p in pieces]
    return ModelInput(
        token_ids=ids,
        segment_ids=segments,
        label_positions=label_positions,
        attention_mask=[1] * len(ids),
        pieces=pieces,
        sentence_words=sentence_words,
        sentence_spans=sentence_spans,
    )


def assemble_sentence_only(tokens: Sequence[str], vocab: Tokenizer,
                           max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> ModelInput:
    """Single-segment input for the no-label-segment ablation: [CLS] sentence [SEP]."""
    if max_seq_len < 2:
        raise InputTooLongError(f"max_seq_len={max_seq_len} cannot hold [CLS] and [SEP]")
    pieces: list[str] = [CLS_TOKEN]
    sentence_words: list[str] = []
    sentence_spans: list[tuple[int, int]] = []
    budget = max_seq_len - 2
    for word in tokens:
        sub = vocab.pieces(word)
        if len(sub) > budget:
            break
        start = len(pieces)
        pieces.extend(sub)
        sentence_words.append(word)
        sentence_spans.append((start, start + len(sub)))
        budget -= len(sub)
    pieces.append(SEP_TOKEN)

    ids = [vocab.piece_id(p) for p in pieces]
    return ModelInput(
        token_ids=ids,
        segment_ids=[0] * len(ids),
        label_positions=[],
        attention_mask=[1] * len(ids),
        pieces=pieces,
        sentence_words=sentence_words,
        sentence_spans=sentence_spans,
    )

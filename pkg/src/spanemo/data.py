"""SemEval-2018 Task 1 E-c data ingestion, tweet normalization, and statistics.

File layout (official E-c format): UTF-8 TSV with a header row whose columns
are ``ID``, ``Tweet``, then one 0/1 column per class in label-space order.

Normalization is deliberately small and deterministic. It applies exactly
four rules, in this order:

1. replace URLs with the ``<url>`` placeholder,
2. replace @-mentions with ``<user>``,
3. lower-case everything,
4. collapse any run of 4+ identical characters to exactly 3 ("soooo" keeps
   its emphasis as "sooo" without blowing up the vocabulary),

then splits on whitespace and character class: word characters stay
together, each emoji becomes its own token, and runs of punctuation stay
together ("!!!" is one token). There is no spelling correction and no
hashtag segmentation; "#happy" tokenizes as "#", "happy".
"""

from __future__ import annotations

import json
import os
import re
import unicodedata
from dataclasses import dataclass

import numpy as np

from spanemo.errors import SchemaError, TsvParseError, UsageError
from spanemo.labels import LabelSpace, as_label_vector

USER_TOKEN = "<user>"
URL_TOKEN = "<url>"
PLACEHOLDER_TOKENS = (USER_TOKEN, URL_TOKEN)

# Longest allowed run of one character after collapsing.
MAX_CHAR_RUN = 3

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_RUN_RE = re.compile(r"(.)\1{%d,}" % MAX_CHAR_RUN, re.DOTALL)

# Invisible joiners/selectors that glue emoji sequences together; dropped so
# each emoji codepoint stands alone as a token.
_EMOJI_GLUE = {0x200D, 0xFE0E, 0xFE0F}


def _is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return 0x1F000 <= cp <= 0x1FAFF or 0x2600 <= cp <= 0x27BF or 0x1F1E6 <= cp <= 0x1F1FF


def _is_word_char(ch: str) -> bool:
    # Apostrophes stay word-internal so contractions survive as one token;
    # combining marks (e.g. Arabic diacritics) must not split their word.
    return ch.isalnum() or ch in ("_", "'", "’") or unicodedata.category(ch).startswith("M")


def _split_chunk(chunk: str) -> list[str]:
    """Split one whitespace-free chunk into word / emoji / punctuation tokens."""
    if chunk in PLACEHOLDER_TOKENS:
        return [chunk]
    tokens: list[str] = []
    buf: list[str] = []
    buf_is_word = False
    for ch in chunk:
        if ord(ch) in _EMOJI_GLUE:
            continue
        if _is_emoji(ch):
            if buf:
                tokens.append("".join(buf))
                buf = []
            tokens.append(ch)
            continue
        is_word = _is_word_char(ch)
        if buf and is_word != buf_is_word:
            tokens.append("".join(buf))
            buf = []
        buf.append(ch)
        buf_is_word = is_word
    if buf:
        tokens.append("".join(buf))
    return tokens


def normalize(raw_text: str) -> list[str]:
    """Normalize one tweet into a token list (empty input gives an empty list)."""
    text = _URL_RE.sub(f" {URL_TOKEN} ", raw_text)
    text = _MENTION_RE.sub(f" {USER_TOKEN} ", text)
    text = text.lower()
    text = _RUN_RE.sub(lambda m: m.group(1) * MAX_CHAR_RUN, text)
    tokens: list[str] = []
    for chunk in text.split():
        tokens.extend(_split_chunk(chunk))
    return tokens


@dataclass
class Example:
    """One tweet with its binary label vector (labels in label-space order)."""

    id: str
    raw_text: str
    tokens: list[str]
    labels: np.ndarray

    def label_count(self) -> int:
        return int(self.labels.sum())

    def is_neutral(self) -> bool:
        return self.label_count() == 0


@dataclass
class Dataset:
    split: str
    examples: list[Example]
    space: LabelSpace

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def label_matrix(self) -> np.ndarray:
        """All gold vectors stacked into an (N, |C|) int8 matrix."""
        if not self.examples:
            return np.zeros((0, len(self.space)), dtype=np.int8)
        return np.stack([ex.labels for ex in self.examples])


VALID_SPLITS = ("train", "valid", "test")


def infer_split(path: str) -> str:
    """Guess the split from the file name; defaults to 'train'."""
    name = os.path.basename(path).lower()
    if "test" in name:
        return "test"
    if "dev" in name or "valid" in name:
        return "valid"
    return "train"


def load_ec_tsv(path: str, space: LabelSpace, split: str | None = None) -> Dataset:
    """Load an official-layout E-c TSV file into a ``Dataset``.

    The header's label columns must match ``space.names`` exactly and in
    order (mismatches raise ``SchemaError`` naming the difference); label
    cells must be ``0`` or ``1`` (anything else raises ``TsvParseError``
    with the row id). Tweet text is preserved byte-exact.
    """
    if split is None:
        split = infer_split(path)
    if split not in VALID_SPLITS:
        raise UsageError(f"split must be one of {VALID_SPLITS}, got {split!r}")

    with open(path, encoding="utf-8") as fh:
        content = fh.read()
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SchemaError(f"{path}: empty file, expected a header row")

    header = _split_row(lines[0])
    if len(header) < 2 or header[0] != "ID" or header[1] != "Tweet":
        raise SchemaError(
            f"{path}: header must start with 'ID\\tTweet', got {header[:2]!r}"
        )
    file_labels = header[2:]
    if tuple(file_labels) != space.names:
        missing = [n for n in space.names if n not in file_labels]
        extra = [n for n in file_labels if n not in space.names]
        detail = []
        if missing:
            detail.append(f"missing columns {missing}")
        if extra:
            detail.append(f"unexpected columns {extra}")
        if not detail:
            detail.append(f"column order {list(file_labels)} != {list(space.names)}")
        raise SchemaError(f"{path}: label columns do not match the label space: " + "; ".join(detail))

    examples: list[Example] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        row = _split_row(line)
        if len(row) != 2 + len(space):
            raise TsvParseError(
                f"{path}:{lineno}: expected {2 + len(space)} columns, got {len(row)}"
            )
        ex_id, tweet = row[0], row[1]
        if ex_id in seen_ids:
            raise TsvParseError(f"{path}:{lineno}: duplicate id {ex_id!r}")
        seen_ids.add(ex_id)
        bits = []
        for name, cell in zip(space.names, row[2:]):
            if cell not in ("0", "1"):
                raise TsvParseError(
                    f"{path}:{lineno}: id {ex_id!r}, column {name!r}: "
                    f"expected 0 or 1, got {cell!r}"
                )
            bits.append(int(cell))
        examples.append(
            Example(id=ex_id, raw_text=tweet, tokens=normalize(tweet), labels=as_label_vector(bits, space))
        )
    return Dataset(split=split, examples=examples, space=space)


def _split_row(line: str) -> list[str]:
    if line.endswith("\r"):
        line = line[:-1]
    return line.split("\t")


def write_ec_tsv(path: str, space: LabelSpace, rows: list[tuple[str, str, np.ndarray]]) -> None:
    """Write (id, tweet, label vector) rows in the official E-c TSV layout."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ID\tTweet\t" + "\t".join(space.names) + "\n")
        for ex_id, tweet, bits in rows:
            cells = "\t".join(str(int(b)) for b in bits)
            fh.write(f"{ex_id}\t{tweet}\t{cells}\n")


def dump_jsonl(dataset: Dataset, path: str) -> None:
    """Canonical JSON-lines dump ({"id","tokens","labels"} per line)."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex in dataset.examples:
            fh.write(
                json.dumps(
                    {"id": ex.id, "tokens": ex.tokens, "labels": [int(b) for b in ex.labels]},
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_jsonl(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@dataclass
class DatasetStats:
    """Split sizes plus the distribution of gold-label counts.

    ``co_existing_pct[k]`` is the percentage of instances carrying exactly
    ``k`` gold labels, computed over all splits combined with neutral
    (all-zero) instances excluded from the denominator.
    """

    counts: dict[str, int]
    total: int
    class_count: int
    co_existing_counts: dict[int, int]
    co_existing_pct: dict[int, float]
    neutral_count: int

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "total": self.total,
            "class_count": self.class_count,
            "co_existing_counts": {str(k): v for k, v in self.co_existing_counts.items()},
            "co_existing_pct": {str(k): v for k, v in self.co_existing_pct.items()},
            "neutral_count": self.neutral_count,
        }

    def format_table(self) -> str:
        lines = []
        for split in VALID_SPLITS:
            if split in self.counts:
                lines.append(f"{split:>6} (#)  {self.counts[split]:,}")
        lines.append(f" total (#)  {self.total:,}")
        lines.append(f"classes (#)  {self.class_count}")
        for k in sorted(self.co_existing_counts):
            lines.append(f"{k} co.emo (%)  {self.co_existing_pct[k]:.2f}")
        lines.append(f"neutral (#)  {self.neutral_count}")
        return "\n".join(lines)


def compute_stats(datasets: list[Dataset]) -> DatasetStats:
    """Aggregate split counts and the exactly-k co-existing-label distribution."""
    if not datasets:
        raise UsageError("compute_stats needs at least one dataset")
    space = datasets[0].space
    for ds in datasets[1:]:
        if ds.space != space:
            raise UsageError("all datasets must share one label space")

    counts: dict[str, int] = {}
    for ds in datasets:
        counts[ds.split] = counts.get(ds.split, 0) + len(ds)
    total = sum(counts.values())

    k_counts: dict[int, int] = {}
    neutral = 0
    for ds in datasets:
        for ex in ds.examples:
            k = ex.label_count()
            if k == 0:
                neutral += 1
            else:
                k_counts[k] = k_counts.get(k, 0) + 1
    non_neutral = sum(k_counts.values())
    pct = {
        k: (100.0 * n / non_neutral if non_neutral else 0.0)
        for k, n in sorted(k_counts.items())
    }
    return DatasetStats(
        counts=counts,
        total=total,
        class_count=len(space),
        co_existing_counts=dict(sorted(k_counts.items())),
        co_existing_pct=pct,
        neutral_count=neutral,
    )

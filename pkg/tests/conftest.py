"""Shared fixtures: label spaces, TSV writing, and the synthetic overfit harness."""

from __future__ import annotations

import os

import numpy as np
import pytest

from spanemo.data import Dataset, Example
from spanemo.labels import LabelSpace, default_semeval_space

FIXTURE_TSV = os.path.join(os.path.dirname(__file__), "data", "synthetic_ec_50.tsv")

# Hand-counted expectations for the bundled 50-row fixture: 5 neutral rows,
# then 9 / 18 / 14 / 4 rows with exactly 1 / 2 / 3 / 4 gold labels.
FIXTURE_EXPECTED = {
    "total": 50,
    "neutral": 5,
    "k_counts": {1: 9, 2: 18, 3: 14, 4: 4},
    "k_pct": {1: 100 * 9 / 45, 2: 100 * 18 / 45, 3: 100 * 14 / 45, 4: 100 * 4 / 45},
}


@pytest.fixture
def space() -> LabelSpace:
    return default_semeval_space()


@pytest.fixture
def small_space() -> LabelSpace:
    return LabelSpace(("alpha", "beta", "gamma"), ("alpha", "beta", "gamma"))


def write_tsv(path, space: LabelSpace, rows) -> str:
    """rows: iterable of (id, tweet, bits); returns the path."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ID\tTweet\t" + "\t".join(space.names) + "\n")
        for ex_id, tweet, bits in rows:
            fh.write(f"{ex_id}\t{tweet}\t" + "\t".join(str(int(b)) for b in bits) + "\n")
    return str(path)


FILLER_TOKENS = ("today", "was", "really", "quite", "a", "day", "and", "then", "some", "more")


def make_trigger_dataset(space: LabelSpace, n: int = 32, seed: int = 7,
                         split: str = "train") -> Dataset:
    """Separable synthetic data: each class has a unique trigger token.

    Every example's sentence contains exactly the trigger tokens of its gold
    classes (in shuffled order among fillers), so a model that can route
    sentence evidence to the label scores can fit it perfectly.
    """
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(n):
        k = int(rng.integers(1, 4))
        labels = np.zeros(len(space), dtype=np.int8)
        chosen = rng.choice(len(space), size=k, replace=False)
        labels[chosen] = 1
        tokens = list(rng.choice(FILLER_TOKENS, size=4))
        tokens += [f"trigger{space.names[c]}" for c in chosen]
        order = rng.permutation(len(tokens))
        tokens = [tokens[j] for j in order]
        examples.append(
            Example(id=f"{split}-{i:03d}", raw_text=" ".join(tokens), tokens=tokens, labels=labels)
        )
    return Dataset(split=split, examples=examples, space=space)


def dataset_from_bits(space: LabelSpace, bit_rows, split: str = "train") -> Dataset:
    """Dataset with trivial one-token sentences and the given label rows."""
    examples = [
        Example(id=f"{split}-{i}", raw_text=f"w{i}", tokens=[f"w{i}"],
                labels=np.asarray(bits, dtype=np.int8))
        for i, bits in enumerate(bit_rows)
    ]
    return Dataset(split=split, examples=examples, space=space)

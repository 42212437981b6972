"""Emotion label space, binary label vectors, and the positive/negative partition.

Label order is frozen to the dataset's column order everywhere: vectors,
matrices, reports, and plots all index classes the same way, so nothing
downstream has to re-align.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from spanemo.errors import DimensionError

# Canonical class names of the SemEval-2018 E-c annotation scheme, in the
# official file's column order.
SEMEVAL_EC_NAMES = (
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "love",
    "optimism",
    "pessimism",
    "sadness",
    "surprise",
    "trust",
)

# Default label words placed in the input's first segment for the non-English
# sets. These are plain translations of the eleven class names and are meant
# to be overridden (e.g. via ``LabelSpace.with_surfaces`` or the CLI's
# ``--surfaces`` flag) if a different wording works better for a checkpoint.
ARABIC_SURFACES = (
    "غضب",
    "ترقب",
    "اشمئزاز",
    "خوف",
    "فرح",
    "حب",
    "تفاؤل",
    "تشاؤم",
    "حزن",
    "مفاجأة",
    "ثقة",
)

SPANISH_SURFACES = (
    "enfado",
    "anticipación",
    "asco",
    "miedo",
    "alegría",
    "amor",
    "optimismo",
    "pesimismo",
    "tristeza",
    "sorpresa",
    "confianza",
)


@dataclass(frozen=True)
class LabelSpace:
    """Ordered set of emotion classes plus the token written into the label segment.

    ``names`` fixes both the class order and the file column order;
    ``surface_tokens`` are the words the model actually reads (one per class,
    same order).
    """

    names: tuple[str, ...]
    surface_tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.names) < 2:
            raise ValueError("a label space needs at least 2 classes")
        if len(set(self.names)) != len(self.names):
            raise ValueError("label names must be unique")
        if len(self.surface_tokens) != len(self.names):
            raise ValueError(
                f"{len(self.surface_tokens)} surface tokens for {len(self.names)} names"
            )

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def with_surfaces(self, surfaces: Sequence[str]) -> "LabelSpace":
        """Same classes, different surface tokens (e.g. translated label words)."""
        return LabelSpace(self.names, tuple(surfaces))

    def to_dict(self) -> dict:
        return {"names": list(self.names), "surface_tokens": list(self.surface_tokens)}

    @classmethod
    def from_dict(cls, data: dict) -> "LabelSpace":
        return cls(tuple(data["names"]), tuple(data["surface_tokens"]))


def default_semeval_space(language: str = "english") -> LabelSpace:
    """The 11-class space in canonical column order.

    ``language`` selects the default surface tokens; the class names (and
    therefore the column order) are identical for all three sets.
    """
    surfaces = {
        "english": tuple(n.lower() for n in SEMEVAL_EC_NAMES),
        "arabic": ARABIC_SURFACES,
        "spanish": SPANISH_SURFACES,
    }
    if language not in surfaces:
        raise ValueError(f"unknown language {language!r}; expected one of {sorted(surfaces)}")
    return LabelSpace(SEMEVAL_EC_NAMES, surfaces[language])


class LabelPartition(NamedTuple):
    """Index sets of absent (negatives) and present (positives) classes."""

    negatives: tuple[int, ...]
    positives: tuple[int, ...]


def as_label_vector(bits: Iterable[int], space: LabelSpace | None = None) -> np.ndarray:
    """Validate and return a binary label vector as an int8 array.

    Raises ``DimensionError`` when the length disagrees with ``space`` and
    ``ValueError`` on non-binary entries.
    """
    arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
    if arr.ndim != 1:
        raise DimensionError(f"label vector must be 1-D, got shape {arr.shape}")
    if space is not None and arr.shape[0] != len(space):
        raise DimensionError(
            f"label vector has length {arr.shape[0]}, space has {len(space)} classes"
        )
    out = arr.astype(np.int8)
    if not np.isin(out, (0, 1)).all() or not np.array_equal(out, arr):
        raise ValueError(f"label vector entries must all be 0 or 1, got {arr!r}")
    return out


def as_probability_vector(probs: Iterable[float], space: LabelSpace | None = None) -> np.ndarray:
    """Validate and return a probability vector as a float64 array in [0, 1]."""
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"probability vector must be 1-D, got shape {arr.shape}")
    if space is not None and arr.shape[0] != len(space):
        raise DimensionError(
            f"probability vector has length {arr.shape[0]}, space has {len(space)} classes"
        )
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise ValueError("probabilities must lie in [0, 1]")
    return arr


def partition(y: Iterable[int]) -> LabelPartition:
    """Split class indices into negatives (bit 0) and positives (bit 1).

    Pure function; a neutral (all-zero) vector yields an empty positive set,
    which callers must handle explicitly.
    """
    bits = as_label_vector(y)
    positives = tuple(int(i) for i in np.flatnonzero(bits == 1))
    negatives = tuple(int(i) for i in np.flatnonzero(bits == 0))
    return LabelPartition(negatives=negatives, positives=positives)

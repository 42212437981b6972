"""Exception types shared across the toolkit.

The CLI maps ``UsageError`` (and argparse failures) to exit code 2 and every
other ``SpanEmoError`` to exit code 1, so raising the right class matters.
"""


class SpanEmoError(Exception):
    """Base class for all toolkit errors."""


class UsageError(SpanEmoError):
    """The caller asked for something invalid (bad arguments, bad combination)."""


class SchemaError(UsageError):
    """An input file's structure does not match the expected layout."""


class TsvParseError(SpanEmoError):
    """A data row could not be parsed; the message names the offending row."""


class DimensionError(SpanEmoError):
    """Vector or matrix shapes are inconsistent."""


class InputTooLongError(SpanEmoError):
    """The assembled token sequence cannot fit the encoder's maximum length."""


class EmptyStratumError(UsageError):
    """A stratified evaluation filter matched no examples."""


class TrainingDivergedError(SpanEmoError):
    """A non-finite loss was produced during training."""

    def __init__(self, epoch: int, batch_index: int, loss: float):
        self.epoch = epoch
        self.batch_index = batch_index
        self.loss = loss
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch}, batch {batch_index}"
        )

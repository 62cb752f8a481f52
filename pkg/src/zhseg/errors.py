"""Exception types shared across the toolkit."""


class SegError(Exception):
    """Base class for all zhseg errors."""


class EmptyWord(SegError):
    """A segmented sentence contains a zero-length word."""


class Utf8Error(SegError):
    """A corpus file contains bytes that do not decode as UTF-8."""

    def __init__(self, line: int, message: str = ""):
        self.line = line
        super().__init__(message or f"invalid UTF-8 on line {line}")


class EmptyCorpus(SegError):
    """No usable sentences were supplied."""


class DegenerateVocab(SegError):
    """Fewer than two distinct words survive the count threshold."""


class EmptyInput(SegError):
    """A query was made against an empty word sequence."""


class FormatError(SegError):
    """A model or emissions file is malformed."""

    def __init__(self, line: int, message: str = ""):
        self.line = line
        super().__init__(message or f"format error on line {line}")


class OrderMismatch(SegError):
    """An ARPA section order disagrees with the declared header."""


class RowCountMismatch(SegError):
    """An emissions block has a row count that disagrees with its header."""

    def __init__(self, block: int, message: str = ""):
        self.block = block
        super().__init__(message or f"row count mismatch in block {block}")


class LengthMismatch(SegError):
    """Gold and predicted segmentations disagree on the underlying text."""

    def __init__(self, sentence_index: int, message: str = ""):
        self.sentence_index = sentence_index
        super().__init__(message or f"character mismatch at sentence {sentence_index}")


class LmMissing(SegError):
    """A decoder was asked to weight fluency without a language model."""


class TooLong(SegError):
    """A sentence exceeds the exhaustive decoder's length guard."""

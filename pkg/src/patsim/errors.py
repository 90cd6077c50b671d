"""Exception hierarchy shared across the engine."""


class PatsimError(Exception):
    """Base class for all engine errors."""


class IngestError(PatsimError):
    """Raised when a JSONL record file cannot be ingested.

    Carries the 1-based line number of the offending record when the
    failure is tied to a specific line.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CorpusError(PatsimError):
    """Invalid corpus state or operation: zero vectors, empty corpus, etc."""


class FormatError(PatsimError):
    """Corrupt or unsupported on-disk file: bad magic, version, truncation, CRC."""


class SearchError(PatsimError):
    """Invalid search request: dimension mismatch, zero query, unknown id."""


class PairScoringError(PatsimError):
    """A pair scorer failed on a specific pair."""

    def __init__(self, message: str, index_a: int | None = None, index_b: int | None = None):
        super().__init__(message)
        self.index_a = index_a
        self.index_b = index_b

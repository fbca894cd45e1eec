"""Exception hierarchy shared by all aeckit modules.

Two branches matter to callers: ``DataError`` covers everything caused by the
input (malformed files, mismatched lengths, empty corpora) and maps to exit
code 2 at the CLI; anything else escaping a command is an internal error and
maps to exit code 3.
"""


class AeckitError(Exception):
    """Base class for all package errors."""


class DataError(AeckitError):
    """Problem with user-supplied data or files (CLI exit code 2)."""


class IoFailure(DataError):
    """A required file could not be read or written."""


class LineCountMismatch(DataError):
    """Parallel files disagree on line count."""


class LengthMismatch(DataError):
    """Paired sequences disagree on length."""


class EmptyCorpus(DataError):
    """An operation that needs at least one item got none."""


class EmptyReference(DataError):
    """WER is undefined for an empty reference."""


class CharOutsideRuleSet(DataError):
    """A codepoint the segmentation rule table does not classify.

    Carries the offending codepoint and its offset in the input string.
    """

    def __init__(self, codepoint: int, offset: int):
        self.codepoint = codepoint
        self.offset = offset
        super().__init__(
            "unclassified codepoint U+%04X at offset %d" % (codepoint, offset)
        )


class FormatError(DataError):
    """A model, config, or table file is malformed."""


class DimensionMismatch(DataError):
    """Matrix or link-set dimensions disagree."""


class SequenceTooLong(DataError):
    """Input exceeds the model's configured maximum length."""

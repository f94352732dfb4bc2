"""Exception types shared across the toolkit.

Hierarchy maps onto the CLI exit codes: ConfigError -> 2, DataError -> 3,
anything else -> 4.
"""

from __future__ import annotations


class TrailalignError(Exception):
    pass


class ConfigError(TrailalignError):
    pass


class ParseError(ConfigError):
    """Config file could not be parsed; `location` names the file/position."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location


class ValidationError(ConfigError):
    """A config field failed validation; `field` names it."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DataError(TrailalignError):
    pass


class MalformedRowError(DataError):
    """CSV row could not be parsed; `line_no` is 1-based and counts the header."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyDatasetError(DataError):
    pass


class MixedLabelModesError(DataError):
    """Tracker data mixes labeled (post/browse) and unlabeled rows."""


class InvalidGroundTruthError(DataError):
    pass


class InvalidCapError(DataError):
    pass


class CapTooSmallError(DataError):
    pass


class HorizonBeforeDataError(DataError):
    pass


class UnknownUserError(DataError):
    pass


class NoQueryTimesError(DataError):
    """The query window contains none of the user's posts; the pipeline halts."""


class EmptyBatchError(DataError):
    pass


class NoSuccessesError(DataError):
    pass

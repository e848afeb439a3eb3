"""Exception hierarchy.

Ingestion problems (bad files, bad rows) derive from :class:`IngestError`;
everything the forecasting algorithms can refuse derives from
:class:`AlgorithmError`. The CLI maps the two families onto different exit
codes.
"""


class DTSFError(Exception):
    """Base class for all package errors."""


class IngestError(DTSFError):
    pass


class MalformedRecord(IngestError):
    def __init__(self, line: int, reason: str = ""):
        self.line = line
        msg = f"malformed record at line {line}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class IrregularSpacing(IngestError):
    def __init__(self, index: int, detail: str = ""):
        self.index = index
        msg = f"irregular spacing at observation {index}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class EmptySeries(IngestError):
    def __init__(self, msg: str = "series is empty"):
        super().__init__(msg)


class AlgorithmError(DTSFError):
    pass


class InsufficientData(AlgorithmError):
    pass


class DegenerateWindow(AlgorithmError):
    pass


class DegenerateTarget(AlgorithmError):
    pass


class TooFewMatches(AlgorithmError):
    def __init__(self, found: int, wanted: int):
        self.found = found
        self.wanted = wanted
        super().__init__(f"only {found} admissible matches, {wanted} requested")


class AllConfigsFailed(AlgorithmError):
    pass


class LengthMismatch(AlgorithmError, ValueError):
    pass


class ZeroDenominator(AlgorithmError):
    def __init__(self, index=None, what: str = "denominator"):
        self.index = index
        where = "" if index is None else f" at index {index}"
        super().__init__(f"zero {what}{where}")

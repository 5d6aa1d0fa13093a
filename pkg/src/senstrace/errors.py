"""Exception hierarchy shared by the evaluator, wrapper layer and privacy runtime."""


class SensTraceError(Exception):
    """Base class for every error raised by this package."""


class AnalysisError(SensTraceError):
    """The dynamic analysis refused to continue (CLI exit code 2)."""


class UnboundVariable(AnalysisError):
    def __init__(self, name):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class TypeMismatch(AnalysisError):
    def __init__(self, expected, got):
        super().__init__(f"expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class SensitiveGuard(AnalysisError):
    """A branch condition depends on sensitive data."""


class SensitiveScalar(AnalysisError):
    """The scalar side of a scaling multiplication depends on sensitive data."""


class DanglingLocation(AnalysisError):
    def __init__(self, index):
        super().__init__(f"location {index} is not allocated")
        self.index = index


class DepthExceeded(AnalysisError):
    def __init__(self, limit):
        super().__init__(f"evaluation exceeded {limit} nested frames")
        self.limit = limit


class ParseError(SensTraceError):
    def __init__(self, message, span, expected=()):
        start, end = span
        super().__init__(f"{message} at {start}..{end}")
        self.span = span
        self.expected = frozenset(expected)


class InputError(SensTraceError):
    """Malformed inputs document."""


class UnknownMetric(InputError):
    def __init__(self, name):
        super().__init__(f"unknown metric {name!r}")
        self.name = name


# wrapper layer

class NonPositiveBound(SensTraceError):
    pass


class UnboundedSum(SensTraceError):
    pass


class ProbeEscape(SensTraceError):
    pass


# privacy runtime

class PrivacyError(SensTraceError):
    pass


class InfiniteSensitivity(PrivacyError):
    pass


class MetricIncompatible(PrivacyError):
    pass


class DeltaOutOfRange(PrivacyError):
    pass


class AlphaMismatch(PrivacyError):
    pass


class VariantMismatch(PrivacyError):
    """A cost of one privacy variant reached an accountant that cannot represent it."""


class HeterogeneousCosts(PrivacyError):
    pass


class NoQueryAboveThreshold(PrivacyError):
    pass


class QuerySensitivityViolation(PrivacyError):
    pass


class EmptyOptions(PrivacyError):
    pass


class FilterHalt(PrivacyError):
    """Raised when a privacy filter refuses a charge."""

    def __init__(self, source, proposed, budget):
        super().__init__(f"privacy filter halted: charging {proposed} to {source!r} exceeds {budget}")
        self.source = source
        self.proposed = proposed
        self.budget = budget


PrivacyFilterException = FilterHalt

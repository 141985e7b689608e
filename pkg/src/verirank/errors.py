"""Exception types shared across the toolkit."""


class VerirankError(Exception):
    """Base class for all toolkit-specific errors."""


# ---------------------------------------------------------------- datasets


class DatasetError(VerirankError):
    """A dataset file failed to parse or validate."""

    def __init__(self, message, *, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
            if line is not None:
                loc += f"{line}:"
            loc += " "
        elif line is not None:
            loc = f"line {line}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line


class DatasetParseError(DatasetError):
    pass


class DuplicateIdError(DatasetError):
    pass


class MissingFieldError(DatasetError):
    pass


class OrphanCandidateError(DatasetError):
    pass


class InsufficientCandidatesError(VerirankError):
    def __init__(self, problem_id, n, k):
        super().__init__(f"problem {problem_id!r} has {n} candidates, need k={k}")
        self.problem_id = problem_id
        self.n = n
        self.k = k


# ------------------------------------------------------- verilog front end


class LexicalError(VerirankError):
    def __init__(self, message, line, column):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class InvalidSourceError(VerirankError):
    """A source that must be syntactically valid is not; carries the report."""

    def __init__(self, report):
        first = ""
        for d in report.diagnostics:
            if d.severity == "error":
                first = f": {d.line}:{d.column}: {d.message}"
                break
        super().__init__("source failed the syntax gate" + first)
        self.report = report


# --------------------------------------------------------------- execution


class UnsupportedConstructError(VerirankError):
    pass


class CombinationalCycleError(VerirankError):
    def __init__(self, cycle):
        loop = " -> ".join(list(cycle) + [cycle[0]]) if cycle else "?"
        super().__init__(f"combinational cycle: {loop}")
        self.cycle = tuple(cycle)


class StimulusError(VerirankError):
    pass


# ----------------------------------------------------------------- gateway


class GatewayError(VerirankError):
    pass


class TransientTransportError(GatewayError):
    pass


class AuthenticationError(GatewayError):
    pass


class MalformedResponseError(GatewayError):
    pass


class ExhaustedRetriesError(GatewayError):
    pass


class CacheMissError(GatewayError):
    pass


class UnparseableVerdictError(GatewayError):
    def __init__(self, raw):
        shown = raw if len(raw) <= 120 else raw[:117] + "..."
        super().__init__(f"no verdict found in response: {shown!r}")
        self.raw = raw


# --------------------------------------------------------------- reranking


class MissingLogprobsError(VerirankError):
    def __init__(self, candidate_id):
        super().__init__(f"candidate {candidate_id!r} has no token log-probabilities")
        self.candidate_id = candidate_id


class EmbeddingDimensionError(VerirankError):
    pass


class StrategyUnavailableError(VerirankError):
    pass


# ------------------------------------------------- reporting and comparison


class ColumnMismatchError(VerirankError):
    pass


class ComparisonError(VerirankError):
    pass


class TooFewSamplesError(VerirankError):
    pass


class ConfigError(VerirankError):
    pass

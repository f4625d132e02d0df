"""Exception hierarchy.

Everything raised on purpose derives from :class:`DistillqError`; the CLI maps
that family to exit status 2.
"""


class DistillqError(Exception):
    """Base class for all package errors."""


class InvalidQubitCount(DistillqError, ValueError):
    pass


class InvalidProfile(DistillqError, ValueError):
    pass


class InvalidGate(DistillqError, ValueError):
    pass


class EmptyCircuit(DistillqError, ValueError):
    pass


class _LineError(DistillqError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class UnknownGate(_LineError):
    """Gate mnemonic outside the supported Clifford+T set."""


class MalformedLine(_LineError):
    """Missing, negative, out-of-range or wrongly counted targets."""


class InvalidConfig(DistillqError, ValueError):
    pass


class InsufficientTrace(DistillqError, ValueError):
    pass


class NonUniqueSteadyState(DistillqError, ValueError):
    """The chain has more than one closed communicating class."""


class ProductionExhausted(DistillqError, RuntimeError):
    """A T gate waits forever because production was switched off."""


class EmptyGrid(DistillqError, ValueError):
    pass

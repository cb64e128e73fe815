"""Exception hierarchy shared by all wdnsolve modules."""


class WdnError(Exception):
    """Base class for every error raised by wdnsolve."""


# -- input / model errors (CLI exit code 3) --------------------------------

class InputError(WdnError):
    """The network description or scenario is invalid."""


class InpSyntaxError(InputError):
    pass


class UnsupportedSection(InputError):
    pass


class DanglingNodeRef(InputError):
    pass


class DuplicateId(InputError):
    pass


class DisconnectedGraph(InputError):
    pass


class NoFixedHead(InputError):
    pass


class InvalidPipe(InputError):
    pass


# -- numerical kernel errors -----------------------------------------------

class DimensionMismatch(WdnError, ValueError):
    pass


class PatternMismatch(WdnError, ValueError):
    pass


class NotPositiveDefinite(WdnError, ArithmeticError):
    """A nonpositive pivot was met during numeric Cholesky factorization."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class AllZeroLoop(NotPositiveDefinite):
    """The loop-flow system is singular, typically a loop whose pipes all carry zero flow."""


class RankDeficient(WdnError):
    pass


# -- headloss errors -------------------------------------------------------

class NonPositiveInput(WdnError, ValueError):
    pass


class NonPositiveGeometry(NonPositiveInput):
    pass


class IndexOutOfRange(WdnError, IndexError):
    pass


class AllZeroDiagonal(WdnError, ValueError):
    pass


# -- solver outcome --------------------------------------------------------

class MaxIterations(WdnError):
    """Raised when a solver hits k_max; the partial result is attached."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result

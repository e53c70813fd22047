"""Exception types raised across the package."""


class SignatureAlgebraError(ValueError):
    """Base class for invalid operations on tensors and functionals."""


class DimensionMismatch(SignatureAlgebraError):
    pass


class TruncationMismatch(SignatureAlgebraError):
    pass


class DegreeExceedsTruncation(SignatureAlgebraError):
    pass


class NonzeroConstantTerm(SignatureAlgebraError):
    pass


class NotGroupLike(SignatureAlgebraError):
    pass


class TooFewSamples(SignatureAlgebraError):
    pass


class NonMonotoneTimes(SignatureAlgebraError):
    pass


class NonIncreasingTimes(SignatureAlgebraError):
    pass


class ModelError(ValueError):
    """Invalid signature volatility model specification."""


class RhoAtBoundary(ModelError):
    pass


class TruncationTooLow(ModelError):
    def __init__(self, required: int, given: int, what: str = "weight"):
        super().__init__(f"{what} needs signature level N >= {required}, got N = {given}")
        self.required = required
        self.given = given


class DegenerateWeight(ModelError):
    """The denominator functional of a weight is identically zero."""


class ZeroDenominator(ArithmeticError):
    def __init__(self, message: str, path_index: int | None = None):
        if path_index is not None:
            message = f"{message} (path {path_index})"
        super().__init__(message)
        self.path_index = path_index


class PathFunctionalError(RuntimeError):
    def __init__(self, path_index: int, cause: BaseException):
        super().__init__(f"functional failed on path {path_index}: {cause!r}")
        self.path_index = path_index

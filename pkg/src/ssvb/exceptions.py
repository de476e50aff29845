"""Exception and warning types raised across the package."""


class SsvbError(Exception):
    """Base class for all package-specific errors."""


class NonFiniteError(SsvbError):
    """Input data contains NaN or infinite entries."""


class ConstantColumnError(SsvbError):
    """A design column has zero variance and cannot be scaled."""

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"column {column} is constant (zero variance)")


class DimensionMismatchError(SsvbError):
    """Array shapes do not agree with the declared problem dimensions."""


class DegeneratePriorError(SsvbError):
    """Beta prior mass too weak: p + a0 + b0 - 2 <= 0."""


class SingularSystemError(SsvbError):
    """The coefficient-mean linear system could not be solved.

    With all inclusion probabilities bounded away from 0 and a finite slab
    variance the system is provably nonsingular, so this signals a
    corrupted solver state rather than a recoverable condition.
    """


class TooFewSamplesError(SsvbError):
    """Cross-validation requested more folds than samples."""


class ZeroOlsError(SsvbError):
    """A least-squares reference model error of exactly zero makes the
    relative model error undefined."""


class AllZeroSpectrumError(SsvbError):
    """The design matrix is identically zero, so no nonzero eigenvalue
    exists."""


class MismatchBeyondToleranceError(SsvbError):
    """Solver output drifted from the orthogonal-design closed form."""


class RankDeficientRefitWarning(UserWarning):
    """The two-stage refit design is rank deficient; the least-norm
    solution is used for prediction."""

"""Exception types shared across the package."""


class DirinfoError(Exception):
    """Base class for every error raised by this package."""


class SpecMismatch(DirinfoError):
    """Operands were built over different alphabet specs or incompatible shapes."""


class DomainError(DirinfoError):
    """A numeric argument lies outside its admissible domain."""


class NonConvergentSequence(DirinfoError):
    """A kernel sequence fails to converge in total variation."""


class InfeasibleConstraint(DirinfoError):
    """No admissible kernel satisfies the requested budget."""


class GridTooLarge(DirinfoError):
    """A brute-force grid would exceed the enumeration cap."""


class FormulaDisagreement(DirinfoError):
    """The two directed-information formulas disagree beyond tolerance."""


class ProblemFileError(DirinfoError):
    """A problem file is malformed or missing a required block."""

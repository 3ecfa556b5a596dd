"""Exception taxonomy shared by all degforge modules."""


class DegforgeError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DegforgeError, ValueError):
    """Malformed or out-of-range input: bad sizes, unknown names, parse failures."""


class ContractError(DegforgeError):
    """A documented precondition was violated by the caller."""


class NumericError(DegforgeError):
    """A numerical computation left its trusted regime (non-convergence,
    imaginary residue above threshold, failed runtime assertion)."""


class FitError(NumericError):
    """Not enough usable samples, or a degenerate fit."""


class InternalConsistencyError(DegforgeError):
    """A mathematical identity the package guarantees was violated.

    Raised instead of returning silently-wrong numbers; indicates a bug in
    norm bookkeeping or pairing logic, not bad user input.
    """

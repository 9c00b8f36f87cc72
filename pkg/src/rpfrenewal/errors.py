"""Exception hierarchy shared by all modules.

Input problems (bad matrices, schema violations, wrong-branch requests) are
``InputError``; they map to CLI exit code 2.  Failures of the numerics
(non-convergence, insufficient horizon) are ``NumericalError``; exit code 3.
"""


class InputError(ValueError):
    """Invalid input data or parameters."""


class SchemaError(InputError):
    """Problem-file violation; carries a JSON-pointer to the offending key."""

    def __init__(self, pointer, message):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


class UnsupportedInputError(InputError):
    """Input is structurally valid but outside what the algorithms certify."""


class WrongTheoremError(InputError):
    """The requested asymptotic branch does not match the lattice type."""


class NumericalError(RuntimeError):
    """Numerical routine failed; ``diagnostics`` holds solver state."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class HorizonError(NumericalError):
    """Simulation horizon too short; ``suggested_n_max`` gives a safe value."""

    def __init__(self, message, suggested_n_max, diagnostics=None):
        self.suggested_n_max = int(suggested_n_max)
        super().__init__(message, diagnostics)

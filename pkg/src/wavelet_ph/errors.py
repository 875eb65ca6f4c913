"""Exception types shared across the package.

The CLI maps these onto its exit codes: configuration problems exit 1, data
problems exit 2 and numerical failures exit 3.
"""


class ConfigError(ValueError):
    pass


class DataFormatError(ValueError):
    pass


class NumericalError(ArithmeticError):
    pass


class DegenerateBasisError(NumericalError):
    pass


class DegenerateThresholdError(NumericalError):
    """A barcode endpoint sits exactly on the cone threshold ``R``."""


class NonGenericError(NumericalError):
    """Tied vertex values make the diagram only one-sidedly differentiable."""

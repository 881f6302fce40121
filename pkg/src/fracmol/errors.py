"""Exception types raised by the numerical core."""


class FracMolError(Exception):
    """Base class for numerical failures (CLI maps these to exit code 3)."""


class NonConvergent(FracMolError):
    """The Mellin-Barnes integral does not converge for these parameters."""


class PoleCollision(FracMolError):
    """The two gamma pole families cannot be separated by a vertical contour."""


class ToleranceNotMet(FracMolError):
    """Contour truncation or quadrature could not reach the requested accuracy."""


class BracketNotFound(FracMolError):
    """No interior maximum was found inside the scanned time range."""

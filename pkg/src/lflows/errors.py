"""Exception hierarchy shared by every module."""


class FlowError(Exception):
    """Base class for lflows errors."""


class InvalidFlow(FlowError):
    """Flow parameters violate the bijectivity conditions for the requested operation."""


class NoBracket(FlowError):
    """No sign change found while bracketing a monotone root (psi not surjective)."""


class MaxIter(FlowError):
    """Iterative solver did not reach its tolerance within the iteration budget."""


class NonFiniteLogDet(FlowError):
    """Jacobian determinant vanished at the evaluated point (a critical point)."""


class CenterPoint(FlowError):
    """Radial log-determinant requested at the removed center point."""


class DimMismatch(FlowError, ValueError):
    """Input dimension does not match the flow dimension."""


class ConfigParse(FlowError, ValueError):
    """Malformed flow configuration document."""


class UnknownActivation(ConfigParse):
    pass


class DepthTooLarge(FlowError, ValueError):
    """Requested Cantor-set depth outside the exact-arithmetic budget."""

"""Exception types raised across the package."""


class PauliShapingError(Exception):
    """Base class for all package errors."""


class DimensionError(PauliShapingError, ValueError):
    """Operands disagree on qubit count or matrix shape."""


class CapacityError(PauliShapingError, ValueError):
    """Requested size exceeds the dense-matrix budget."""


class UnsupportedError(PauliShapingError, KeyError):
    """Unknown named object (Clifford, analysis, noise kind, ...)."""


class ValidationError(PauliShapingError, ValueError):
    """Input fails a physical or structural validity check."""


class UnreachableTarget(PauliShapingError):
    """A target PTM entry is nonzero where the implemented PTM vanishes.

    ``indices`` holds the offending (i, j) pairs.
    """

    def __init__(self, indices):
        self.indices = [tuple(int(v) for v in ij) for ij in indices]
        shown = ", ".join(str(ij) for ij in self.indices[:8])
        more = "" if len(self.indices) <= 8 else f" (+{len(self.indices) - 8} more)"
        super().__init__(f"target not reachable at entries {shown}{more}")


class StrongNoiseRegime(PauliShapingError, ValueError):
    """A 2x2 block has real eigenvalues, so its powers do not oscillate."""


class SingularError(PauliShapingError, ZeroDivisionError):
    """A required inverse or division does not exist."""


class InconsistentInputs(PauliShapingError, ValueError):
    """Learned quantities contradict each other (e.g. negative radicand)."""

"""Exception taxonomy, mapped to CLI exit codes.

ValidationFailure  -> exit 1 (mesh fails structural validation)
UsageError         -> exit 2 (bad arguments, malformed configs, type mismatches)
DegenerateGeometryError -> exit 3 (numeric degeneracy: zero-length projections,
                       antiparallel normals, zero variance, rank-deficient sampling)
"""


class MeshGaugeError(Exception):
    """Base class for all library errors."""


class ValidationFailure(MeshGaugeError):
    """Mesh failed structural validation; carries the defect list."""

    def __init__(self, message, defects=None):
        super().__init__(message)
        self.defects = list(defects) if defects else []


class UsageError(MeshGaugeError):
    """Malformed input: bad flags, bad configs, mismatched types or shapes."""


class DegenerateGeometryError(MeshGaugeError):
    """Numeric degeneracy the caller must resolve (not a bug in the input format)."""

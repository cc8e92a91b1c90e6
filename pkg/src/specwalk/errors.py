"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class SpecwalkError(Exception):
    """Base class for all package errors."""


class IoError(SpecwalkError):
    """File could not be read or written."""


class FormatError(SpecwalkError):
    """File exists but its contents are malformed (bad magic, size mismatch, ...)."""


class ChecksumMismatch(FormatError):
    """Pack file payload does not match its stored checksum."""


class InvalidParam(SpecwalkError):
    """Caller-supplied parameter violates a precondition."""


class DimsMismatch(SpecwalkError):
    """Two objects that must share grid dimensions do not."""


class ImageMismatch(SpecwalkError):
    """Pack content hash does not match the supplied image."""


class DegenerateGraph(SpecwalkError):
    """A vertex has zero degree; the Laplacian would be ill-defined."""


class ZeroVector(SpecwalkError):
    """A nonzero vector was required."""


class SingularSystem(SpecwalkError):
    """The random walker system has no unique solution (gamma=0 and no seeds)."""


class SingularSmallSystem(SpecwalkError):
    """The dense seed system is numerically singular."""

    def __init__(self, message: str, condition: float = float("inf")):
        super().__init__(message)
        self.condition = condition


class InsufficientBasis(SpecwalkError):
    """Fewer eigenvectors requested than labels to represent."""


class EmptyBasis(SpecwalkError):
    """All coarsened basis columns collapsed to zero."""


class NotConverged(SpecwalkError):
    """An iterative solve hit its iteration cap.

    Carries whatever partial result is useful to the caller: per-column
    residuals for CG, a converged eigenpair prefix for the eigensolver.
    """

    def __init__(self, message: str, residuals: np.ndarray | None = None,
                 partial=None, converged: int = 0):
        super().__init__(message)
        self.residuals = residuals
        self.partial = partial
        self.converged = converged

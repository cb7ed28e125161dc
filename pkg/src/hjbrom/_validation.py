"""Input validation helpers shared across the package."""

import numpy as np

from .errors import StabilityError


def as_matrix(m, name="matrix", square=False):
    """Coerce to a finite 2-d float array, raising ValueError otherwise."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {m.shape}")
    if m.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def as_vector(v, name="vector", size=None):
    """Coerce to a finite 1-d float array."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    if size is not None and v.size != size:
        raise ValueError(f"{name} must have length {size}, got {v.size}")
    return v


def check_symmetric(m, name="matrix", tol=1e-12):
    """Raise ValueError unless ``m`` is symmetric to relative tolerance."""
    scale = np.linalg.norm(m, "fro")
    if np.linalg.norm(m - m.T, "fro") > tol * max(scale, 1.0):
        raise ValueError(f"{name} is not symmetric to tolerance {tol:g}")
    return m


def symmetrize(m):
    """Project onto the symmetric matrices; suppresses round-off drift."""
    return 0.5 * (m + m.T)


def spectral_abscissa(m):
    """Largest real part over the eigenvalues of ``m``."""
    return float(np.max(np.linalg.eigvals(m).real))


def check_hurwitz(m, name="matrix"):
    """Raise StabilityError unless all eigenvalues have negative real part."""
    alpha = spectral_abscissa(m)
    if alpha >= 0.0:
        raise StabilityError(
            f"{name} is not stable: spectral abscissa {alpha:g} >= 0"
        )
    return m

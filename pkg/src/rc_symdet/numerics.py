"""Linear-algebra and transform primitives.

The DFT convention used everywhere in the package is the usual OFDM one:
the forward transform is unnormalized and the inverse carries ``1/N``.
"""

import numpy as np

from .errors import NumericError, ShapeError

__all__ = [
    "fft",
    "ifft",
    "pseudo_inverse",
    "least_squares",
    "spectral_radius",
    "DEFAULT_PINV_RTOL",
]

DEFAULT_PINV_RTOL = 1e-10


def _check_length(v, size, axis):
    if size is not None and v.shape[axis] != size:
        raise ShapeError(f"expected length {size} along axis {axis}, got {v.shape[axis]}")
    if v.shape[axis] < 1:
        raise ShapeError("transform length must be >= 1")


def fft(v, size=None, axis=-1):
    """Unnormalized forward DFT along ``axis``."""
    v = np.asarray(v)
    _check_length(v, size, axis)
    return np.fft.fft(v, axis=axis)


def ifft(v, size=None, axis=-1):
    """Inverse DFT (``1/N`` scaled) along ``axis``; exact inverse of :func:`fft`."""
    v = np.asarray(v)
    _check_length(v, size, axis)
    return np.fft.ifft(v, axis=axis)


def pseudo_inverse(a, rel_tol=DEFAULT_PINV_RTOL):
    """Moore-Penrose pseudo-inverse through the SVD.

    Singular values below ``rel_tol * s_max`` are treated as zero.
    """
    a = np.asarray(a)
    if a.ndim != 2:
        raise ShapeError(f"pseudo_inverse expects a matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise NumericError("pseudo_inverse input contains NaN or Inf")
    if a.size == 0:
        return np.zeros(a.shape[::-1], dtype=a.dtype)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    cutoff = rel_tol * (s[0] if s.size else 0.0)
    s_inv = np.zeros_like(s)
    keep = s > cutoff
    s_inv[keep] = 1.0 / s[keep]
    return (vh.conj().T * s_inv) @ u.conj().T


def least_squares(a, b, rel_tol=DEFAULT_PINV_RTOL, ridge=0.0):
    """Minimum-norm solution of ``min ||a x - b||`` (optionally ridge-regularized)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"row mismatch: {a.shape[0]} vs {b.shape[0]}")
    if ridge > 0.0:
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NumericError("least_squares input contains NaN or Inf")
        gram = a.conj().T @ a
        gram[np.diag_indices_from(gram)] += ridge
        return np.linalg.solve(gram, a.conj().T @ b)
    return pseudo_inverse(a, rel_tol) @ b


def spectral_radius(a):
    """Largest eigenvalue magnitude of a square matrix."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"spectral_radius needs a square matrix, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("spectral_radius input contains NaN or Inf")
    if a.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(a))))

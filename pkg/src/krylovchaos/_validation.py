"""Input validation helpers shared by the estimators and functional API.

scikit-learn's ``check_array`` rejects complex input, so the checks here are
written against plain numpy.
"""
from __future__ import annotations

import numpy as np


def check_square_matrix(H, name: str = "H") -> np.ndarray:
    """Return ``H`` as a 2-D complex128 array, raising ``ValueError`` otherwise."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {H.shape}")
    if H.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    H = H.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(H)):
        raise ValueError(f"{name} contains non-finite entries")
    return H


def check_vector(v, dim: int | None = None, name: str = "psi0") -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {dim}")
    v = v.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def check_unit_norm(v, atol: float = 1e-10, name: str = "psi0") -> None:
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > atol:
        raise ValueError(f"{name} must have unit norm, got {nrm:.3e}")


def check_times(times) -> np.ndarray:
    """Times must be finite, non-negative and strictly increasing."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1 or t.size == 0:
        raise ValueError("times must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(t)):
        raise ValueError("times must be finite")
    if t[0] < 0:
        raise ValueError("times must start at t >= 0")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    return t


def check_system_size(L, *, even: bool = False) -> int:
    if int(L) != L or L < 1:
        raise ValueError(f"L must be a positive integer, got {L!r}")
    L = int(L)
    if even and L % 2:
        raise ValueError(f"L must be even for an equal bipartition, got {L}")
    return L

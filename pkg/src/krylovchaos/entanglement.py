"""Half-chain entanglement entropy of eigenstates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_system_size, check_vector
from .spectral import Spectrum, eigendecompose

__all__ = [
    "EntropySample",
    "EntropySummary",
    "reduced_density_matrix",
    "von_neumann_entropy",
    "half_chain_entropies",
    "eigenstate_entropy_stats",
    "summarize_entropies",
    "page_value",
]

_EIG_FLOOR = 1e-14


@dataclass
class EntropySample:
    entropies: np.ndarray
    eigenvalue_re: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.entropies))


@dataclass
class EntropySummary:
    S_mean: float
    sigma_S: float  # std over realizations of the per-realization mean
    sigma_S_pooled: float  # std over every eigenstate of every realization
    n_realizations: int


def _split(state: np.ndarray, L: int) -> np.ndarray:
    # site 1 is the most significant bit, so rows index sites 1..L/2
    half = 2 ** (L // 2)
    return state.reshape(half, half)


def reduced_density_matrix(state, L: int, keep: str = "left") -> np.ndarray:
    """Reduced density matrix of sites ``1..L/2`` (``keep="left"``) or ``L/2+1..L``.

    The state is normalized first.
    """
    L = check_system_size(L, even=True)
    psi = check_vector(state, 2**L, name="state")
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("zero state")
    M = _split(psi / nrm, L)
    if keep == "left":
        return M @ M.conj().T
    if keep == "right":
        return (M.T @ M.conj()).astype(np.complex128)
    raise ValueError(f"keep must be 'left' or 'right', got {keep!r}")


def _entropy_from_probs(p: np.ndarray) -> np.ndarray:
    p = np.where(p > _EIG_FLOOR, p, 1.0)  # 0 ln 0 := 0
    return -np.sum(p * np.log(p), axis=-1)


def von_neumann_entropy(rho) -> float:
    """``-Tr(rho ln rho)`` of a Hermitian, unit-trace density matrix."""
    rho = np.asarray(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-8:
        raise ValueError(f"density matrix trace is {tr:.12g}, expected 1")
    p = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return float(_entropy_from_probs(p))


def half_chain_entropies(vectors: np.ndarray, L: int) -> np.ndarray:
    """Half-chain entropy of each column of ``vectors`` via batched Schmidt values."""
    L = check_system_size(L, even=True)
    half = 2 ** (L // 2)
    V = np.asarray(vectors, dtype=np.complex128)
    V = V / np.linalg.norm(V, axis=0)
    blocks = V.T.reshape(-1, half, half)
    s = np.linalg.svd(blocks, compute_uv=False)
    return _entropy_from_probs(s**2)


def eigenstate_entropy_stats(H, L: int, spectrum: Spectrum | None = None) -> EntropySample:
    """Entropies of every right eigenvector of ``H``, each unit-normalized.

    Pass ``spectrum`` (with vectors) to reuse an existing decomposition.
    """
    if spectrum is None or spectrum.vectors is None:
        spectrum = eigendecompose(H, vectors=True)
    S = half_chain_entropies(spectrum.vectors, L)
    return EntropySample(S, spectrum.eigenvalues.real.copy())


def summarize_entropies(samples) -> EntropySummary:
    """Mean entropy and its spread across realizations.

    ``sigma_S`` is the sample standard deviation of the per-realization mean
    entropies (0 for a single realization); ``sigma_S_pooled`` pools every
    eigenstate of every realization instead.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("no entropy samples")
    means = np.array([s.mean for s in samples])
    pooled = np.concatenate([s.entropies for s in samples])
    sigma = float(means.std(ddof=1)) if means.size > 1 else 0.0
    return EntropySummary(float(means.mean()), sigma, float(pooled.std(ddof=1)), len(samples))


def page_value(L: int) -> float:
    """Average half-chain entropy of a random pure state, ``(L ln 2 - 1) / 2``."""
    L = check_system_size(L, even=True)
    return (L * np.log(2.0) - 1.0) / 2.0

"""Complex spectra, complex spacing ratios and reference random-matrix ensembles."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_square_matrix

__all__ = [
    "Spectrum",
    "CsrSample",
    "eigendecompose",
    "csr_ratios",
    "mean_radial",
    "mean_angular",
    "sample_reference_ensemble",
    "LogisticSizeExtrapolation",
    "ExtrapolationError",
    "extrapolate_r_infinity",
    "REFERENCE_VALUES",
]

# (<r>, <cos theta>) at dim 1000; GOE and AI-dagger from finite-size sampling,
# 2D Poisson is the infinite-plane value.
REFERENCE_VALUES = {
    "GOE": (0.5689, -0.4038),
    "AIdagger": (0.7222, -0.1727),
    "Poisson2D": (2.0 / 3.0, 0.0),
}


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    source: str = "model"
    vectors: np.ndarray | None = None
    # (re_min, re_max, im_min, im_max) when the points are known to be drawn
    # uniformly inside a box; enables the boundary-safe CSR estimator
    support: tuple | None = None

    def __len__(self):
        return self.eigenvalues.shape[0]

    def to_csv(self, path) -> None:
        z = self.eigenvalues
        np.savetxt(path, np.column_stack([z.real, z.imag]), delimiter=",", header="re,im", comments="")


@dataclass
class CsrSample:
    ratios: np.ndarray
    n_excluded: int = 0
    n_boundary: int = 0


def eigendecompose(H, vectors: bool = False, check_pairs: int = 8, source: str = "model") -> Spectrum:
    """All eigenvalues of a general complex matrix, optionally with right eigenvectors.

    When vectors are requested, ``check_pairs`` evenly spaced pairs are
    spot-checked for relative backward error below 1e-10.
    """
    H = check_square_matrix(H)
    if not vectors:
        return Spectrum(scipy.linalg.eigvals(H, check_finite=False), source)
    evals, V = scipy.linalg.eig(H, check_finite=False)
    V = V / np.linalg.norm(V, axis=0)
    if check_pairs:
        scale = max(np.abs(H).sum(axis=0).max(), np.finfo(float).tiny)
        for k in np.linspace(0, len(evals) - 1, min(check_pairs, len(evals))).astype(int):
            err = np.linalg.norm(H @ V[:, k] - evals[k] * V[:, k]) / scale
            if err > 1e-10:
                raise np.linalg.LinAlgError(f"eigenpair {k} backward error {err:.2e}")
    return Spectrum(evals, source, V)


def csr_ratios(
    spec: Spectrum | np.ndarray, drop_edge_fraction: float = 0.0, dup_tol: float = 1e-14, chunk: int = 512
) -> CsrSample:
    """``r_j = (z_NN - z_j) / (z_NNN - z_j)`` with neighbours by Euclidean distance.

    Eigenvalues with a partner closer than ``dup_tol`` are excluded as centres
    and counted.  Distance ties are broken by index order.
    ``drop_edge_fraction`` removes that fraction of centres farthest from the
    spectral centroid (neighbour search still uses every eigenvalue).

    If ``spec.support`` is set, centres whose next-nearest-neighbour disc
    crosses the support box are dropped.  For uniform points the nearest
    neighbour is uniform inside that disc whatever its radius, so the
    surviving ratios are distributed as in the unbounded plane.
    """
    z = np.asarray(spec.eigenvalues if isinstance(spec, Spectrum) else spec, dtype=np.complex128)
    d = z.shape[0]
    if d < 3:
        raise ValueError("need at least three eigenvalues")
    ratios = np.empty(d, dtype=np.complex128)
    r_nnn = np.empty(d)
    dup = np.zeros(d, dtype=bool)
    for start in range(0, d, chunk):
        rows = np.arange(start, min(start + chunk, d))
        dist = np.abs(z[rows, None] - z[None, :])
        dist[np.arange(rows.size), rows] = np.inf
        dup[rows] = dist.min(axis=1) < dup_tol
        order = np.argsort(dist, axis=1, kind="stable")[:, :2]
        nn, nnn = order[:, 0], order[:, 1]
        ratios[rows] = (z[nn] - z[rows]) / (z[nnn] - z[rows])
        r_nnn[rows] = np.abs(z[nnn] - z[rows])
    keep = ~dup
    n_boundary = 0
    support = spec.support if isinstance(spec, Spectrum) else None
    if support is not None:
        x0, x1, y0, y1 = support
        wall = np.minimum.reduce([z.real - x0, x1 - z.real, z.imag - y0, y1 - z.imag])
        inside = wall >= r_nnn
        n_boundary = int(np.sum(keep & ~inside))
        keep &= inside
    if drop_edge_fraction > 0:
        radius = np.abs(z - z.mean())
        cut = np.quantile(radius, 1.0 - drop_edge_fraction)
        keep &= radius <= cut
    return CsrSample(ratios[keep], int(dup.sum()), n_boundary)


def mean_radial(sample: CsrSample) -> float:
    if sample.ratios.size == 0:
        raise ValueError("empty CSR sample")
    return float(np.mean(np.abs(sample.ratios)))


def mean_angular(sample: CsrSample) -> float:
    if sample.ratios.size == 0:
        raise ValueError("empty CSR sample")
    return float(np.mean(np.cos(np.angle(sample.ratios))))


def sample_reference_ensemble(kind: str, dim: int, count: int, seed: int) -> list:
    """Spectra of ``count`` random matrices of size ``dim``.

    ``GOE``: ``(A + A^T)/2`` with real Gaussian ``A``.  ``AIdagger``: the same
    with complex Gaussian entries (complex symmetric, not Hermitian).
    ``Poisson2D``: independent uniform points in the unit square; the
    returned spectra carry that square as ``support``.
    """
    if dim < 3:
        raise ValueError("dim must be at least 3")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    out = []
    for _ in range(count):
        if kind == "GOE":
            A = rng.standard_normal((dim, dim))
            M = 0.5 * (A + A.T)
            z = scipy.linalg.eigvalsh(M, check_finite=False).astype(np.complex128)
        elif kind == "AIdagger":
            A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            M = 0.5 * (A + A.T)
            z = scipy.linalg.eigvals(M, check_finite=False)
        elif kind == "Poisson2D":
            z = rng.random(dim) + 1j * rng.random(dim)
            out.append(Spectrum(z, source=kind, support=(0.0, 1.0, 0.0, 1.0)))
            continue
        else:
            raise ValueError(f"unknown ensemble {kind!r}")
        out.append(Spectrum(z, source=kind))
    return out


class ExtrapolationError(RuntimeError):
    def __init__(self, message, best_params=None):
        super().__init__(message)
        self.best_params = best_params


def _logistic(L, r_inf, delta_r, a, L0):
    return r_inf + delta_r / (1.0 + np.exp(-a * (np.asarray(L, dtype=float) - L0)))


class LogisticSizeExtrapolation(RegressorMixin, BaseEstimator):
    """Fit ``<r>(L) = r_inf + dr / (1 + exp(-a (L - L0)))``.

    The model is unchanged under ``(r_inf, dr, a) -> (r_inf + dr, -dr, -a)``;
    fitted parameters are reported with ``a <= 0`` so that ``r_inf_`` is
    always the ``L -> inf`` limit.
    """

    def __init__(self, init=None, max_nfev=20000):
        self.init = init
        self.max_nfev = max_nfev

    def fit(self, L, r):
        L = np.asarray(L, dtype=float).ravel()
        r = np.asarray(r, dtype=float).ravel()
        if L.shape != r.shape:
            raise ValueError("L and r must have the same length")
        if np.unique(L).size < 4:
            raise ValueError("need at least four distinct system sizes")
        if self.init is not None:
            x0 = np.asarray(self.init, dtype=float)
        else:
            order = np.argsort(L)
            x0 = np.array([r[order[0]], r[order[-1]] - r[order[0]], 1.0, np.median(L)])

        def resid(p):
            return _logistic(L, *p) - r

        sol = least_squares(resid, x0, method="lm", max_nfev=self.max_nfev, xtol=1e-15, ftol=1e-15)
        if not sol.success or not np.all(np.isfinite(sol.x)):
            raise ExtrapolationError(f"logistic fit failed: {sol.message}", sol.x)
        r_inf, delta_r, a, L0 = (float(v) for v in sol.x)
        if a > 0:
            r_inf, delta_r, a = r_inf + delta_r, -delta_r, -a
        self.r_inf_, self.delta_r_, self.a_, self.L0_ = r_inf, delta_r, a, L0
        self.residual_ = float(np.sum(sol.fun**2))
        return self

    def predict(self, L):
        check_is_fitted(self, "r_inf_")
        return _logistic(L, self.r_inf_, self.delta_r_, self.a_, self.L0_)


def extrapolate_r_infinity(r_by_L: dict, init=None) -> LogisticSizeExtrapolation:
    Ls = sorted(r_by_L)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return LogisticSizeExtrapolation(init=init).fit(Ls, [r_by_L[k] for k in Ls])

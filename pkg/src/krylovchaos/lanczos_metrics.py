"""Statistics of bi-Lanczos coefficients: Krylov variance, reciprocity, q-log fits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .bilanczos import TridiagonalForm

__all__ = [
    "CoefficientEnsemble",
    "krylov_variance",
    "log_ratios",
    "reciprocity",
    "theta_profile",
    "magnitude_profiles",
    "TsallisFit",
    "TsallisFitResult",
    "tsallis_fit",
    "qlog",
]


@dataclass
class CoefficientEnsemble:
    """Tridiagonal forms of many disorder realizations at one ``(L, W_gamma)``."""

    realizations: list
    W_gamma: float
    L: int
    n_truncated: int = field(default=0, init=False)

    def __post_init__(self):
        if not self.realizations:
            raise ValueError("ensemble is empty")

    @property
    def K_min(self) -> int:
        return min(f.K for f in self.realizations)

    @property
    def has_breakdown(self) -> bool:
        return any(f.breakdown for f in self.realizations)


def log_ratios(form: TridiagonalForm, max_pairs: int | None = None) -> np.ndarray:
    """``ln(j_{2n-1} / j_{2n})`` over every complete odd/even pair."""
    j = form.hopping
    n_pairs = j.size // 2
    if max_pairs is not None:
        n_pairs = min(n_pairs, max_pairs)
    j = j[: 2 * n_pairs]
    zero = np.flatnonzero(j == 0)
    if zero.size:
        raise ValueError(f"j_{zero[0] + 1} = 0: bi-Lanczos broke down upstream")
    return np.log(j[0::2] / j[1::2])


def krylov_variance(form: TridiagonalForm, truncate_half: bool = False) -> float:
    """Sample variance (ddof=1) of ``ln(j_{2n-1}/j_{2n})``, ``j_n = |b_n c_n|^(1/2)``.

    With ``truncate_half`` only pairs with ``2n <= K/2`` enter.
    """
    if form.K < 5:
        raise ValueError(f"need K >= 5 for two log-ratio samples, got K={form.K}")
    max_pairs = form.K // 4 if truncate_half else None
    r = log_ratios(form, max_pairs)
    if r.size < 2:
        raise ValueError("fewer than two log-ratio samples")
    return float(np.var(r, ddof=1))


def reciprocity(form: TridiagonalForm, d: int) -> float:
    """Mean of ``cos(arg(b_n c_n))`` over the first ``d`` chain links."""
    d = int(d)
    if d < 1 or d > form.K - 1:
        raise ValueError(f"d must lie in [1, {form.K - 1}], got {d}")
    return float(np.mean(np.cos(form.theta[:d])))


def _common_length(ensemble: CoefficientEnsemble) -> int:
    n = ensemble.K_min - 1
    ensemble.n_truncated = sum(f.K - 1 > n for f in ensemble.realizations)
    return n


def theta_profile(ensemble: CoefficientEnsemble) -> np.ndarray:
    """Disorder average of ``cos(theta_n)`` over the shortest common length."""
    n = _common_length(ensemble)
    return np.mean([np.cos(f.theta[:n]) for f in ensemble.realizations], axis=0)


def magnitude_profiles(ensemble: CoefficientEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """``(<|b_n|>, <|c_n|>)`` for ``n = 1..K_min-1``."""
    n = _common_length(ensemble)
    b = np.mean([np.abs(f.b[:n]) for f in ensemble.realizations], axis=0)
    c = np.mean([np.abs(f.c[:n]) for f in ensemble.realizations], axis=0)
    return b, c


def qlog(x, q: float):
    """Tsallis q-logarithm."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("q-log is undefined for x <= 0")
    if q == 1:
        return np.log(x)
    return (x ** (1 - q) - 1) / (1 - q)


def _qlog_shape(n, L: int, q: float) -> np.ndarray:
    return np.sqrt(np.clip(1.0 - (np.asarray(n, dtype=float) / 2.0**L) ** (1.0 - q), 0.0, None))


class TsallisFit(RegressorMixin, BaseEstimator):
    """One-parameter fit ``y_n = A sqrt(1 - (n / 2^L)^(1 - q))``.

    The amplitude is the closed-form least-squares solution; ``residual_`` is
    the sum of squared residuals, so fits at different ``q`` can be ranked.
    """

    def __init__(self, L=10, q=0.75):
        self.L = L
        self.q = q

    def fit(self, n, y):
        n = np.asarray(n, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if n.shape != y.shape:
            raise ValueError("n and y must have the same length")
        if n.size == 0:
            raise ValueError("empty fit window")
        if not 0 <= self.q < 1:
            raise ValueError(f"q must lie in [0, 1), got {self.q}")
        g = _qlog_shape(n, self.L, self.q)
        gg = g @ g
        if gg == 0:
            raise ValueError("model shape vanishes on the fit window")
        self.amplitude_ = float(g @ y / gg)
        self.residual_ = float(np.sum((y - self.amplitude_ * g) ** 2))
        return self

    def predict(self, n):
        check_is_fitted(self, "amplitude_")
        return self.amplitude_ * _qlog_shape(n, self.L, self.q)


@dataclass
class TsallisFitResult:
    q: float
    amplitude_b: float
    amplitude_c: float
    residual_b: float
    residual_c: float
    window: tuple

    @property
    def residual(self) -> float:
        return self.residual_b + self.residual_c


def tsallis_fit(ensemble: CoefficientEnsemble, q: float) -> TsallisFitResult:
    """Fit ``<|b_n|>`` and ``<|c_n|>`` over ``n in (L, K-1]``."""
    b, c = magnitude_profiles(ensemble)
    n = np.arange(1, b.size + 1)
    window = n > ensemble.L
    if not window.any():
        raise ValueError(f"no coefficients with n > L={ensemble.L}")
    fb = TsallisFit(ensemble.L, q).fit(n[window], b[window])
    fc = TsallisFit(ensemble.L, q).fit(n[window], c[window])
    return TsallisFitResult(
        q, fb.amplitude_, fc.amplitude_, fb.residual_, fc.residual_, (int(n[window][0]), int(n[-1]))
    )

"""Two-sided (bi-)Lanczos tridiagonalization with complete reorthogonalization.

Given a non-Hermitian ``H`` and a start vector ``psi0`` the iteration builds
bases ``P = [p_0, p_1, ...]`` (from ``H``) and ``Q = [q_0, q_1, ...]`` (from
``H^dagger``) with ``Q^dagger P = I`` and a tridiagonal ``T = Q^dagger H P``::

    H p_n = b_{n+1} p_{n+1} + a_n p_n + c_n p_{n-1}

The gauge follows the reference loop exactly: ``b_n = ||p_n||`` before
normalization (real, non-negative), so the ``p_n`` have unit norm and the
``q_n`` absorb the rest.  Only the products ``b_n c_n`` are gauge invariant;
all Krylov-space metrics downstream are built from them.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_square_matrix, check_unit_norm, check_vector

__all__ = [
    "BiLanczosOptions",
    "TridiagonalForm",
    "KrylovBasis",
    "VerificationReport",
    "BiLanczosError",
    "ResidualWarning",
    "tridiagonalize",
    "verify",
    "BiLanczos",
]

REORTH_THRESHOLD = 0.707


class BiLanczosError(RuntimeError):
    """Raised when reorthogonalization does not settle."""


class ResidualWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BiLanczosOptions:
    residual_tol: float = 1e-8
    breakdown_tol: float = 1e-12
    max_reorth: int = 10
    max_steps: int | None = None
    keep_basis: bool = True
    verify: bool = True


@dataclass
class TridiagonalForm:
    """Lanczos coefficients of one run.

    ``b[k]`` and ``c[k]`` hold ``b_{k+1}`` and ``c_{k+1}``: the sub- and
    super-diagonal entries ``T[k+1, k]`` and ``T[k, k+1]``.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    breakdown: str | None = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.complex128)
        self.b = np.asarray(self.b, dtype=np.complex128)
        self.c = np.asarray(self.c, dtype=np.complex128)
        if self.b.shape != self.c.shape or self.b.shape[0] != max(self.a.shape[0] - 1, 0):
            raise ValueError("need len(b) == len(c) == len(a) - 1")

    @property
    def K(self) -> int:
        return self.a.shape[0]

    @property
    def hopping(self) -> np.ndarray:
        """``j_n = |b_n c_n|^(1/2)`` for ``n = 1..K-1``."""
        return np.sqrt(np.abs(self.b * self.c))

    @property
    def theta(self) -> np.ndarray:
        """Reciprocity angles ``arg(b_n c_n)`` for ``n = 1..K-1``."""
        return np.angle(self.b * self.c)

    def matrix(self) -> np.ndarray:
        T = np.diag(self.a)
        if self.K > 1:
            T += np.diag(self.b, -1) + np.diag(self.c, 1)
        return T

    def truncate(self, K: int) -> "TridiagonalForm":
        K = min(K, self.K)
        return TridiagonalForm(self.a[:K], self.b[: K - 1], self.c[: K - 1], self.breakdown)

    def to_json(self) -> str:
        """Coefficient lists as ``[re, im]`` pairs in index order ``a_0.., b_1.., c_1..``."""

        def pairs(x):
            return [[float(z.real), float(z.imag)] for z in x]

        return json.dumps(
            {
                "K": self.K,
                "a": pairs(self.a),
                "b": pairs(self.b),
                "c": pairs(self.c),
                "breakdown": self.breakdown,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "TridiagonalForm":
        obj = json.loads(text)

        def unpack(x):
            arr = np.asarray(x, dtype=float).reshape(-1, 2)
            return arr[:, 0] + 1j * arr[:, 1]

        form = cls(unpack(obj["a"]), unpack(obj["b"]), unpack(obj["c"]), obj.get("breakdown"))
        if form.K != obj["K"]:
            raise ValueError("stored K does not match coefficient count")
        return form


@dataclass
class KrylovBasis:
    P: np.ndarray
    Q: np.ndarray

    @property
    def K(self) -> int:
        return self.P.shape[1]


@dataclass
class VerificationReport:
    biorthogonality: float
    q_orthonormality: float
    tridiagonal_residual: float
    h_norm: float
    extra: dict = field(default_factory=dict)

    def passed(self, tol: float = 1e-8) -> bool:
        return self.biorthogonality < tol and self.tridiagonal_residual < tol * max(1.0, self.h_norm)


def _operator_scale(H: np.ndarray) -> float:
    # 1-norm: cheap and never below the spectral norm of a symmetric matrix
    return float(np.abs(H).sum(axis=0).max())


def verify(form: TridiagonalForm, basis: KrylovBasis, H) -> VerificationReport:
    """Residuals ``max|Q^dag P - I|``, ``max|Q^dag Q - I|`` and ``max|Q^dag H P - T|``.

    ``Q^dag Q = I`` cannot hold together with ``Q^dag P = I`` unless ``H`` is
    normal along the Krylov space; it is reported as a diagnostic only.
    """
    H = check_square_matrix(H)
    P, Q = basis.P, basis.Q
    if P.shape != Q.shape or P.shape[1] != form.K or P.shape[0] != H.shape[0]:
        raise ValueError("basis, form and H dimensions disagree")
    Qh = Q.conj().T
    eye = np.eye(form.K)
    return VerificationReport(
        biorthogonality=float(np.abs(Qh @ P - eye).max()),
        q_orthonormality=float(np.abs(Qh @ Q - eye).max()),
        tridiagonal_residual=float(np.abs(Qh @ (H @ P) - form.matrix()).max()),
        h_norm=_operator_scale(H),
    )


def tridiagonalize(H, psi0, opts: BiLanczosOptions | None = None):
    """Run bi-Lanczos from ``psi0``.

    Returns ``(form, basis, report)``.  ``basis`` is ``None`` when
    ``opts.keep_basis`` is false and ``report`` is ``None`` when verification
    is switched off.  A breakdown truncates the run; the reason is stored in
    ``form.breakdown`` rather than raised.
    """
    opts = opts or BiLanczosOptions()
    H = check_square_matrix(H)
    d = H.shape[0]
    psi0 = check_vector(psi0, d)
    check_unit_norm(psi0)
    Kmax = d if opts.max_steps is None else max(1, min(int(opts.max_steps), d))

    Hh = np.ascontiguousarray(H.conj().T)
    # rows hold the basis vectors so that leading blocks stay contiguous
    P = np.zeros((Kmax, d), dtype=np.complex128)
    Q = np.zeros((Kmax, d), dtype=np.complex128)
    a = np.zeros(Kmax, dtype=np.complex128)
    b = np.zeros(Kmax, dtype=np.complex128)  # b[n] = b_n, b[0] = 0
    c = np.zeros(Kmax, dtype=np.complex128)
    P[0] = psi0
    Q[0] = psi0

    breakdown = None
    K = Kmax
    for n in range(Kmax - 1):
        p = H @ P[n]
        q = Hh @ Q[n]
        a[n] = np.vdot(Q[n], p)
        p -= a[n] * P[n]
        q -= np.conj(a[n]) * Q[n]
        if n > 0:
            p -= c[n] * P[n - 1]
            q -= np.conj(b[n]) * Q[n - 1]

        Pn, Qn = P[: n + 1], Q[: n + 1]
        res, passes = 0.0, 0
        while res < REORTH_THRESHOLD:
            if passes == opts.max_reorth:
                raise BiLanczosError(
                    f"reorthogonalization did not settle after {passes} passes at step {n + 1}"
                )
            p_norm, q_norm = np.linalg.norm(p), np.linalg.norm(q)
            if p_norm == 0.0 or q_norm == 0.0:
                break
            # p <- (1 - P Q^dag) p and q <- (1 - Q P^dag) q
            p_new = p - (Qn @ p.conj()).conj() @ Pn
            q_new = q - (Pn @ q.conj()).conj() @ Qn
            res = min(np.linalg.norm(p_new) / p_norm, np.linalg.norm(q_new) / q_norm)
            p, q = p_new, q_new
            passes += 1

        bn = np.linalg.norm(p)
        if bn < opts.breakdown_tol:
            breakdown = f"b_{n + 1} = {bn:.3e} below breakdown_tol"
            K = n + 1
            break
        cn = np.vdot(q, p) / bn
        if abs(cn) < opts.breakdown_tol:
            breakdown = f"|c_{n + 1}| = {abs(cn):.3e} below breakdown_tol"
            K = n + 1
            break
        b[n + 1], c[n + 1] = bn, cn
        P[n + 1] = p / bn
        Q[n + 1] = q / np.conj(cn)

    a[K - 1] = np.vdot(Q[K - 1], H @ P[K - 1])
    form = TridiagonalForm(a[:K].copy(), b[1:K].copy(), c[1:K].copy(), breakdown)
    basis = KrylovBasis(P[:K].T.copy(), Q[:K].T.copy())

    report = None
    if opts.verify:
        report = verify(form, basis, H)
        if not report.passed(opts.residual_tol):
            warnings.warn(
                f"bi-Lanczos residuals above tolerance: biorth={report.biorthogonality:.2e}, "
                f"T={report.tridiagonal_residual:.2e} (|H|={report.h_norm:.2e})",
                ResidualWarning,
                stacklevel=2,
            )
    return form, (basis if opts.keep_basis else None), report


class BiLanczos(BaseEstimator):
    """Estimator wrapper around :func:`tridiagonalize`.

    Parameters
    ----------
    residual_tol, breakdown_tol, max_reorth
        See :class:`BiLanczosOptions`.
    max_steps : int or None
        Cap on the Krylov dimension. ``None`` runs to the Hilbert dimension.
    keep_basis : bool
        Keep ``P`` and ``Q`` after fitting.
    verify : bool
        Compute the residual report after fitting.

    Attributes
    ----------
    form_ : TridiagonalForm
    basis_ : KrylovBasis or None
    report_ : VerificationReport or None
    """

    def __init__(
        self,
        residual_tol=1e-8,
        breakdown_tol=1e-12,
        max_reorth=10,
        max_steps=None,
        keep_basis=True,
        verify=True,
    ):
        self.residual_tol = residual_tol
        self.breakdown_tol = breakdown_tol
        self.max_reorth = max_reorth
        self.max_steps = max_steps
        self.keep_basis = keep_basis
        self.verify = verify

    def fit(self, H, psi0):
        opts = BiLanczosOptions(**self.get_params())
        self.form_, self.basis_, self.report_ = tridiagonalize(H, psi0, opts)
        self.n_features_in_ = np.asarray(H).shape[0]
        return self

    @property
    def coefficients_(self):
        check_is_fitted(self, "form_")
        return self.form_.a, self.form_.b, self.form_.c

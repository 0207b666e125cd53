"""Krylov-chain evolution, complexity and inverse participation ratio.

The Krylov amplitudes ``phi_n(t) = q_n^dag psi(t)`` obey the tight-binding
equation ``i d/dt phi = T phi`` with ``T`` the bi-Lanczos tridiagonal matrix
and ``phi(0) = e_0``.  Evolution under a non-Hermitian ``T`` changes the norm;
amplitudes are stored raw (up to a bookkept log-norm) and normalized only when
a metric needs it.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from ._validation import check_square_matrix, check_times, check_vector
from .bilanczos import KrylovBasis, TridiagonalForm

__all__ = [
    "KrylovWaveFunction",
    "DiagnosticTrace",
    "EvolveOptions",
    "IntegrationError",
    "ConditioningWarning",
    "default_time_grid",
    "evolve_krylov_chain",
    "direct_evolution_oracle",
    "complexity",
    "ipr",
    "diagnostic_trace",
    "early_time_coefficient",
]

# squared norms must stay finite inside the integrator's error estimate
_RENORM_LOW, _RENORM_HIGH = 1e-100, 1e100
# growth factor allowed between renormalization checks
_MAX_CHUNK_GROWTH = 50.0


class IntegrationError(RuntimeError):
    pass


class ConditioningWarning(UserWarning):
    """Eigenvector matrix close to singular (near an exceptional point)."""


@dataclass
class KrylovWaveFunction:
    """Amplitudes at one time.

    The physical raw norm is ``exp(log_scale) * ||phi||``; ``log_scale``
    collects the renormalizations done to avoid overflow.
    """

    t: float
    phi: np.ndarray
    log_scale: float = 0.0

    @property
    def raw_log_norm(self) -> float:
        nrm = np.linalg.norm(self.phi)
        return self.log_scale + (np.log(nrm) if nrm > 0 else -np.inf)

    @property
    def raw_norm(self) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp(self.raw_log_norm))

    def normalized(self) -> np.ndarray:
        nrm = np.linalg.norm(self.phi)
        if nrm == 0 or not np.isfinite(nrm):
            raise ValueError(f"wave function at t={self.t} has norm {nrm}")
        return self.phi / nrm

    @property
    def K(self) -> int:
        return self.phi.shape[0]


@dataclass
class DiagnosticTrace:
    times: np.ndarray
    c_k: np.ndarray
    i_k: np.ndarray
    raw_log_norm: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.c_k = np.asarray(self.c_k, dtype=float)
        self.i_k = np.asarray(self.i_k, dtype=float)
        if self.raw_log_norm is None:
            self.raw_log_norm = np.full_like(self.times, np.nan)
        self.raw_log_norm = np.asarray(self.raw_log_norm, dtype=float)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "c_k", "i_k", "raw_log_norm"])
        for row in zip(self.times, self.c_k, self.i_k, self.raw_log_norm):
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "DiagnosticTrace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3])

    def at(self, t: float) -> tuple[float, float]:
        """``(C_K, I_K)`` at the sample closest to ``t``."""
        k = int(np.argmin(np.abs(self.times - t)))
        return float(self.c_k[k]), float(self.i_k[k])


@dataclass(frozen=True)
class EvolveOptions:
    method: str = "auto"  # "rk", "eig" or "auto"
    rtol: float = 1e-9
    atol: float = 1e-12
    # "auto" uses "eig" unless the eigenvector condition number exceeds this
    max_condition: float = 1e8


def default_time_grid(
    t_min: float = 1e-3, t_max: float = 1e4, n_log: int = 200, n_early: int = 20, t_early: float = 1e-2
) -> np.ndarray:
    """Log-spaced samples plus a dense linear block for the early-time fit."""
    grid = np.concatenate(
        [np.linspace(0.0, t_early, n_early, endpoint=False), np.geomspace(t_min, t_max, n_log)]
    )
    return np.unique(grid)


def _growth_rate(T: np.ndarray) -> float:
    """Bound on ``|d ln||phi|| / dt|`` for ``i phi' = T phi``."""
    gen = 0.5j * (T.conj().T - T)  # Hermitian; d||phi||^2/dt = 2 phi^dag gen phi
    ev = np.linalg.eigvalsh(gen)
    return float(max(abs(ev[0]), abs(ev[-1]), 1e-12))


def _evolve_rk(form: TridiagonalForm, times: np.ndarray, opts: EvolveOptions):
    a, b, c = form.a, form.b, form.c
    K = form.K

    def rhs(_t, y):
        out = a * y
        if K > 1:
            out[1:] += b * y[:-1]
            out[:-1] += c * y[1:]
        return -1j * out

    chunk = _MAX_CHUNK_GROWTH / _growth_rate(form.matrix())
    y = np.zeros(K, dtype=np.complex128)
    y[0] = 1.0
    log_scale = 0.0
    t_now = 0.0
    out = []
    for t_target in times:
        while t_now < t_target:
            t_next = min(t_target, t_now + chunk)
            sol = solve_ivp(rhs, (t_now, t_next), y, method="RK45", rtol=opts.rtol, atol=opts.atol)
            if not sol.success:
                raise IntegrationError(f"integration stopped at t={sol.t[-1]:.6g}: {sol.message}")
            y = sol.y[:, -1]
            t_now = t_next
            nrm = np.linalg.norm(y)
            if not (_RENORM_LOW <= nrm <= _RENORM_HIGH):
                if nrm == 0 or not np.isfinite(nrm):
                    raise IntegrationError(f"norm became {nrm} at t={t_now:.6g}")
                y = y / nrm
                log_scale += np.log(nrm)
        out.append(KrylovWaveFunction(float(t_target), y.copy(), log_scale))
    return out


def _propagate_eig(evals, V, coeffs, t):
    """``V exp(-i evals t) coeffs`` with the dominant growth factored out."""
    expo = -1j * evals * t
    shift = float(np.max(expo.real))
    phi = V @ (np.exp(expo - shift) * coeffs)
    return phi, shift


def _eig_with_check(M):
    evals, V = scipy.linalg.eig(M)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > 1e12:
        warnings.warn(
            f"eigenvector condition number {cond:.2e}: evolution may be inaccurate",
            ConditioningWarning,
            stacklevel=3,
        )
    return evals, V, cond


def _evolve_eig(form: TridiagonalForm, times: np.ndarray, eig=None):
    evals, V = eig if eig is not None else _eig_with_check(form.matrix())[:2]
    e0 = np.zeros(form.K, dtype=np.complex128)
    e0[0] = 1.0
    coeffs = np.linalg.solve(V, e0)
    out = []
    for t in times:
        phi, shift = _propagate_eig(evals, V, coeffs, t)
        out.append(KrylovWaveFunction(float(t), phi, shift))
    return out


def evolve_krylov_chain(form: TridiagonalForm, times, opts: EvolveOptions | None = None):
    """Krylov amplitudes at each requested time.

    ``opts.method`` selects adaptive Runge-Kutta stepping (``"rk"``) or exact
    propagation through the eigendecomposition of ``T`` (``"eig"``); the latter
    is the practical route for very long times.  ``"auto"`` takes the
    eigendecomposition route unless its eigenvectors are too ill-conditioned.
    """
    opts = opts or EvolveOptions()
    times = check_times(times)
    if opts.method == "rk":
        return _evolve_rk(form, times, opts)
    if opts.method == "eig":
        return _evolve_eig(form, times)
    if opts.method == "auto":
        evals, V = scipy.linalg.eig(form.matrix())
        cond = np.linalg.cond(V)
        if np.isfinite(cond) and cond <= opts.max_condition:
            return _evolve_eig(form, times, (evals, V))
        return _evolve_rk(form, times, opts)
    raise ValueError(f"unknown evolution method {opts.method!r}")


def direct_evolution_oracle(H, psi0, basis: KrylovBasis, t, eig=None):
    """``phi_n(t) = q_n^dag exp(-iHt) psi0`` through a full eigendecomposition of ``H``.

    ``t`` may be a scalar or a sequence; a list is returned for sequences.
    ``eig`` optionally passes a precomputed ``(evals, V)`` pair.  A warning is
    attached when the eigenvectors are ill-conditioned.
    """
    H = check_square_matrix(H)
    psi0 = check_vector(psi0, H.shape[0])
    if eig is None:
        evals, V, _ = _eig_with_check(H)
    else:
        evals, V = eig
    coeffs = np.linalg.solve(V, psi0)
    Qh = basis.Q.conj().T
    scalar = np.ndim(t) == 0
    out = []
    for tt in np.atleast_1d(t):
        psi, shift = _propagate_eig(evals, V, coeffs, float(tt))
        out.append(KrylovWaveFunction(float(tt), Qh @ psi, shift))
    return out[0] if scalar else out


def _probabilities(wf) -> np.ndarray:
    phi = wf.phi if isinstance(wf, KrylovWaveFunction) else np.asarray(wf)
    p = np.abs(phi) ** 2
    s = p.sum()
    if s == 0 or not np.isfinite(s):
        raise ValueError("wave function has zero or non-finite norm")
    return p / s


def complexity(wf) -> float:
    """Krylov complexity: centre of mass ``sum_n n |phi_n|^2`` of the normalized amplitudes."""
    p = _probabilities(wf)
    return float(np.arange(p.size) @ p)


def ipr(wf) -> float:
    """Krylov inverse participation ratio ``sum_n |phi_n|^4`` (normalized)."""
    p = _probabilities(wf)
    return float(p @ p)


def diagnostic_trace(wavefunctions) -> DiagnosticTrace:
    return DiagnosticTrace(
        times=[wf.t for wf in wavefunctions],
        c_k=[complexity(wf) for wf in wavefunctions],
        i_k=[ipr(wf) for wf in wavefunctions],
        raw_log_norm=[wf.raw_log_norm for wf in wavefunctions],
    )


def early_time_coefficient(trace: DiagnosticTrace, t_max: float = 0.01, min_samples: int = 5) -> float:
    """Least-squares ``a`` in ``C_K(t) = a t^2`` over samples with ``t < t_max``."""
    mask = trace.times < t_max
    if mask.sum() < min_samples:
        raise ValueError(f"need at least {min_samples} samples with t < {t_max}, got {mask.sum()}")
    t2 = trace.times[mask] ** 2
    if not np.any(t2 > 0):
        raise ValueError("all early samples sit at t = 0")
    return float(t2 @ trace.c_k[mask] / (t2 @ t2))

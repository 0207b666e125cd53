"""Finite-size scaling collapse and critical-point estimates.

Curves ``y(W; L)`` are rescaled as ``x = (W - W_c) L^alpha`` and
``y' = y L^(-beta)``, interpolated onto a common grid over the overlap of
all rescaled ranges, and compared pairwise.  For a pair ``(u, v)`` the
similarity is the cosine between the stacked vectors ``[u, v]`` and
``[v, u]``, i.e. ``2 u.v / (|u|^2 + |v|^2)``.  Unlike the plain cosine of
``u`` and ``v`` it is not blind to a relative scale between the curves, so
``beta`` stays identifiable.  The objective is the mean of
``1 - similarity`` over all pairs of sizes and is minimized by Nelder-Mead.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

__all__ = [
    "ScalingDataset",
    "CollapseResult",
    "CollapseError",
    "NelderMeadResult",
    "nelder_mead",
    "collapse_objective",
    "ScalingCollapse",
    "collapse",
    "CrossingResult",
    "crossing_point",
]

PENALTY = 10.0


# ---------------------------------------------------------------------------
# Nelder-Mead
# ---------------------------------------------------------------------------


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    converged: bool
    message: str


def nelder_mead(
    fun,
    x0,
    xtol: float = 1e-6,
    ftol: float = 1e-10,
    max_iter: int = 2000,
    initial_step=None,
) -> NelderMeadResult:
    """Minimize ``fun`` with the downhill simplex method.

    Coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
    Stops once the simplex diameter is below ``xtol`` and the spread of
    vertex values below ``ftol``.  Either test alone can fire too early: two
    vertices placed symmetrically about a minimum have equal values.
    Hitting ``max_iter`` returns the best vertex with ``converged=False``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.size
    if initial_step is None:
        step = np.where(x0 != 0, 0.05 * np.abs(x0), 0.00025)
    else:
        step = np.broadcast_to(np.asarray(initial_step, dtype=float), (n,)).copy()

    nfev = 0

    def f(x):
        nonlocal nfev
        nfev += 1
        return float(fun(x))

    simplex = np.vstack([x0] + [x0 + step[i] * np.eye(n)[i] for i in range(n)])
    values = np.array([f(x) for x in simplex])
    if not np.isfinite(values[0]):
        raise ValueError("objective is not finite at the initial point")

    nit = 0
    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        diameter = np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1))
        if diameter < xtol and values[-1] - values[0] < ftol:
            return NelderMeadResult(simplex[0], values[0], nit, nfev, True, "simplex diameter below xtol, value spread below ftol")
        if nit >= max_iter:
            return NelderMeadResult(simplex[0], values[0], nit, nfev, False, "max_iter reached")
        nit += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = f(xr)
        if fr < values[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = f(xe)
            simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = f(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue
        simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
        values[1:] = [f(x) for x in simplex[1:]]


# ---------------------------------------------------------------------------
# Datasets and the collapse objective
# ---------------------------------------------------------------------------


@dataclass
class ScalingDataset:
    """``curves[L]`` is an ``(n, 3)`` array of ``(W, y, y_err)`` rows."""

    curves: dict
    observable: str = "y"

    def __post_init__(self):
        clean = {}
        for L, pts in self.curves.items():
            arr = np.asarray(pts, dtype=float)
            if arr.ndim != 2 or arr.shape[1] not in (2, 3):
                raise ValueError(f"curve for L={L} must have rows (W, y[, y_err])")
            if arr.shape[1] == 2:
                arr = np.column_stack([arr, np.zeros(len(arr))])
            arr = arr[np.argsort(arr[:, 0], kind="stable")]
            clean[int(L)] = arr
        self.curves = dict(sorted(clean.items()))

    def validate(self, min_sizes: int = 3, min_points: int = 5) -> None:
        if len(self.curves) < min_sizes:
            raise ValueError(f"need at least {min_sizes} system sizes, got {len(self.curves)}")
        for L, arr in self.curves.items():
            if len(arr) < min_points:
                raise ValueError(f"curve L={L} has {len(arr)} points, need {min_points}")

    @property
    def sizes(self) -> list:
        return list(self.curves)

    @classmethod
    def from_arrays(cls, W_by_L: dict, y_by_L: dict, err_by_L: dict | None = None, observable="y"):
        curves = {}
        for L in W_by_L:
            err = np.zeros(len(W_by_L[L])) if err_by_L is None else err_by_L[L]
            curves[L] = np.column_stack([W_by_L[L], y_by_L[L], err])
        return cls(curves, observable)

    def to_dict(self) -> dict:
        return {"observable": self.observable, "curves": {str(L): a.tolist() for L, a in self.curves.items()}}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _rescaled(dataset: ScalingDataset, W_c, alpha, beta):
    out = {}
    for L, arr in dataset.curves.items():
        out[L] = ((arr[:, 0] - W_c) * L**alpha, arr[:, 1] * L ** (-beta))
    return out


def collapse_objective(params, dataset: ScalingDataset, rescale_y: bool = True, n_grid: int = 200, min_points: int = 3):
    """Mean over size pairs of ``1 - 2 u.v / (|u|^2 + |v|^2)``.

    Parameter sets whose overlap region is empty, or holds fewer than
    ``min_points`` original samples of some curve, score ``PENALTY`` plus a
    term that shrinks as the overlap improves.
    """
    W_c, alpha = params[0], params[1]
    beta = params[2] if rescale_y else 0.0
    scaled = _rescaled(dataset, W_c, alpha, beta)
    lo = max(x[0] for x, _ in scaled.values())
    hi = min(x[-1] for x, _ in scaled.values())
    if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
        return PENALTY + 1.0
    counts = [np.count_nonzero((x >= lo) & (x <= hi)) for x, _ in scaled.values()]
    short = sum(max(0, min_points - c) for c in counts)
    if short:
        return PENALTY + short / (min_points * len(counts))
    grid = np.linspace(lo, hi, n_grid)
    vecs = [np.interp(grid, x, y) for x, y in scaled.values()]
    total = 0.0
    pairs = list(itertools.combinations(range(len(vecs)), 2))
    for i, j in pairs:
        u, v = vecs[i], vecs[j]
        denom = u @ u + v @ v
        total += 1.0 - (2.0 * (u @ v) / denom if denom > 0 else 1.0)
    return total / len(pairs)


# ---------------------------------------------------------------------------
# Collapse estimator
# ---------------------------------------------------------------------------


class CollapseError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass
class CollapseResult:
    W_c: float
    alpha: float
    beta: float = 0.0
    objective: float = float("nan")
    iterations: int = 0
    converged: bool = True
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=float)

    @classmethod
    def from_json(cls, text: str) -> "CollapseResult":
        return cls(**json.loads(text))


def _start_lattice(dataset: ScalingDataset, rescale_y: bool) -> list:
    W = np.concatenate([a[:, 0] for a in dataset.curves.values()])
    if np.all(W > 0):
        W_c = np.exp(np.quantile(np.log(W), [0.2, 0.4, 0.6, 0.8]))
    else:
        W_c = np.quantile(W, [0.2, 0.4, 0.6, 0.8])
    if rescale_y:
        return [np.array([w, a, b]) for w in W_c for a in (0.5, 1.5) for b in (-0.5, 0.5)]
    return [np.array([w, a]) for w in W_c for a in (0.4, 0.8, 1.6, 3.2)]


class ScalingCollapse(TransformerMixin, BaseEstimator):
    """Nelder-Mead data collapse with multi-start.

    Parameters
    ----------
    rescale_y : bool
        Fit ``beta``; otherwise ``beta`` is fixed at 0.
    init : sequence, optional
        Extra starting point ``(W_c, alpha[, beta])`` tried besides the lattice.
    multistart : bool
        Use the 16-point start lattice derived from the data range.
    n_grid, min_points : int
        Interpolation grid size and minimum samples per curve in the overlap.
    xtol, ftol, max_iter
        Nelder-Mead stopping rules.
    """

    def __init__(
        self,
        rescale_y=True,
        init=None,
        multistart=True,
        n_grid=200,
        min_points=3,
        xtol=1e-6,
        ftol=1e-10,
        max_iter=2000,
    ):
        self.rescale_y = rescale_y
        self.init = init
        self.multistart = multistart
        self.n_grid = n_grid
        self.min_points = min_points
        self.xtol = xtol
        self.ftol = ftol
        self.max_iter = max_iter

    def _objective(self, dataset):
        return lambda p: collapse_objective(p, dataset, self.rescale_y, self.n_grid, self.min_points)

    def fit(self, X, y=None):
        dataset = X if isinstance(X, ScalingDataset) else ScalingDataset(X)
        dataset.validate()
        npar = 3 if self.rescale_y else 2
        starts = []
        if self.init is not None:
            starts.append(np.asarray(self.init, dtype=float)[:npar])
        if self.multistart or not starts:
            starts.extend(_start_lattice(dataset, self.rescale_y))
        obj = self._objective(dataset)
        runs = []
        for x0 in starts:
            if obj(x0) >= PENALTY:
                continue
            runs.append(nelder_mead(obj, x0, self.xtol, self.ftol, self.max_iter, initial_step=0.1 * np.maximum(np.abs(x0), 0.1)))
        if not runs:
            raise CollapseError("no starting point has a usable overlap region")
        best = min(runs, key=lambda r: r.fun)
        self.runs_ = runs
        self.W_c_, self.alpha_ = float(best.x[0]), float(best.x[1])
        self.beta_ = float(best.x[2]) if self.rescale_y else 0.0
        self.objective_ = float(best.fun)
        self.n_iter_ = int(best.nit)
        self.converged_ = bool(best.converged)
        self.spread_ = np.std([r.x[:2] for r in runs if r.fun <= best.fun + 1e-3], axis=0)
        self.dataset_digest_ = dataset.digest()
        if not best.converged:
            raise CollapseError("best Nelder-Mead run did not converge", self.result())
        return self

    def result(self) -> CollapseResult:
        check_is_fitted(self, "W_c_")
        return CollapseResult(
            self.W_c_,
            self.alpha_,
            self.beta_,
            self.objective_,
            self.n_iter_,
            self.converged_,
            provenance={
                "dataset_sha256": self.dataset_digest_,
                "init": None if self.init is None else [float(v) for v in self.init],
                "opts": {k: v for k, v in self.get_params().items() if k != "init"},
                "n_starts": len(self.runs_),
            },
        )

    def transform(self, X):
        """Rescaled ``{L: (x, y')}`` at the fitted parameters."""
        check_is_fitted(self, "W_c_")
        dataset = X if isinstance(X, ScalingDataset) else ScalingDataset(X)
        return _rescaled(dataset, self.W_c_, self.alpha_, self.beta_)


def collapse(data: ScalingDataset, rescale_y: bool = True, init=None, **kwargs) -> CollapseResult:
    if isinstance(init, CollapseResult):
        init = (init.W_c, init.alpha, init.beta)
    return ScalingCollapse(rescale_y=rescale_y, init=init, **kwargs).fit(data).result()


# ---------------------------------------------------------------------------
# Zero crossings
# ---------------------------------------------------------------------------


@dataclass
class CrossingResult:
    per_size: dict
    mean: float
    errors: dict = field(default_factory=dict)


def crossing_point(data: ScalingDataset) -> CrossingResult:
    """Linear-interpolated zero crossing of each curve and their mean.

    A curve that does not change sign exactly once is reported in
    ``errors`` and left out of the mean.
    """
    per, errors = {}, {}
    for L, arr in data.curves.items():
        W, y = arr[:, 0], arr[:, 1]
        s = np.sign(y)
        flips = np.flatnonzero(s[:-1] * s[1:] < 0)
        zeros = np.flatnonzero(s == 0)
        if flips.size + zeros.size == 0:
            errors[L] = "no sign change"
            continue
        if flips.size + zeros.size > 1:
            errors[L] = f"{flips.size + zeros.size} sign changes"
            continue
        if zeros.size:
            per[L] = float(W[zeros[0]])
        else:
            k = flips[0]
            per[L] = float(W[k] - y[k] * (W[k + 1] - W[k]) / (y[k + 1] - y[k]))
    if not per:
        raise ValueError(f"no curve has a single sign change: {errors}")
    return CrossingResult(per, float(np.mean(list(per.values()))), errors)

"""Disorder-averaged sweeps over ``(L, W_gamma)`` grids.

Every realization is an independent task keyed by ``(L, w_index, r)``; its
seed is derived from the config's base seed, so results do not depend on
execution order or on the number of workers.  Aggregation always runs over
records sorted by realization index.
"""
from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bilanczos import BiLanczosOptions, tridiagonalize
from .entanglement import half_chain_entropies
from .krylov_dynamics import (
    EvolveOptions,
    default_time_grid,
    diagnostic_trace,
    early_time_coefficient,
    evolve_krylov_chain,
)
from .lanczos_metrics import krylov_variance, reciprocity
from .model import SpinChainParams, build_hamiltonian, initial_plus_state, realization_seed, sample_disorder
from .scaling import ScalingDataset
from .spectral import csr_ratios, eigendecompose, mean_angular, mean_radial

__all__ = [
    "SCHEMA_VERSION",
    "METRICS",
    "ExperimentConfig",
    "PointAggregate",
    "ResultStore",
    "StoreFormatError",
    "SchemaVersionError",
    "run_realization",
    "aggregate",
    "run_sweep",
    "persist",
    "load",
    "scaling_dataset",
]

SCHEMA_VERSION = 1
METRICS = ("complexity", "lanczos", "csr", "entropy")
FAILURE_FLAG_FRACTION = 0.2
# always sampled so that mid- and long-time values sit on the grid
_MARKED_TIMES = (300.0, 1000.0, 1e4)


def default_realizations(L: int) -> int:
    if L <= 8:
        return 200
    return 50 if L <= 10 else 20


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a sweep.

    ``realizations_per_point`` may be an int, a ``{L: count}`` mapping or
    ``None`` for the size-dependent defaults.  ``lanczos_steps`` caps the
    bi-Lanczos chain length (``None`` runs it to completion); the complexity
    metric needs the full chain.
    """

    L_list: list
    W_gamma_grid: list = field(default_factory=lambda: np.geomspace(1e-3, 10.0, 20).tolist())
    realizations_per_point: object = None
    h: float = 0.5
    W_delta: float = 1.0
    J: float = 1.0
    time_grid: dict = field(default_factory=dict)
    evolve_method: str = "auto"
    metrics: list = field(default_factory=lambda: ["lanczos"])
    base_seed: int = 0
    reciprocity_depths: list = field(default_factory=lambda: [4, 5, 6])
    lanczos_steps: int | None = None
    keep_records: bool = False

    def __post_init__(self):
        self.L_list = [int(L) for L in self.L_list]
        self.W_gamma_grid = [float(w) for w in self.W_gamma_grid]
        self.metrics = list(self.metrics)
        self.reciprocity_depths = [int(d) for d in self.reciprocity_depths]
        if not self.L_list or not self.W_gamma_grid:
            raise ValueError("L_list and W_gamma_grid must be nonempty")
        if any(w < 0 for w in self.W_gamma_grid):
            raise ValueError("W_gamma values must be non-negative")
        bad = set(self.metrics) - set(METRICS)
        if bad or not self.metrics:
            raise ValueError(f"metrics must be a nonempty subset of {METRICS}, got {self.metrics}")
        if isinstance(self.realizations_per_point, dict):
            self.realizations_per_point = {int(k): int(v) for k, v in self.realizations_per_point.items()}
        for L in self.L_list:
            if self.realizations(L) < 1:
                raise ValueError("realizations_per_point must be >= 1")
        if "complexity" in self.metrics and self.lanczos_steps is not None:
            raise ValueError("the complexity metric needs the full chain; leave lanczos_steps unset")
        if self.evolve_method not in ("rk", "eig", "auto"):
            raise ValueError(f"unknown evolve_method {self.evolve_method!r}")

    def realizations(self, L: int) -> int:
        n = self.realizations_per_point
        if n is None:
            return default_realizations(L)
        if isinstance(n, dict):
            return n.get(L, default_realizations(L))
        return int(n)

    def times(self) -> np.ndarray:
        return np.unique(np.concatenate([default_time_grid(**self.time_grid), _MARKED_TIMES]))

    def params(self, L: int, W_gamma: float) -> SpinChainParams:
        return SpinChainParams(L=L, W_gamma=W_gamma, J=self.J, h=self.h, W_delta=self.W_delta)

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["realizations_per_point"], dict):
            d["realizations_per_point"] = {str(k): v for k, v in d["realizations_per_point"].items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# One realization
# ---------------------------------------------------------------------------


def run_realization(config: ExperimentConfig, L: int, w_index: int, r: int) -> dict:
    """Compute every requested metric for one disorder draw.

    Never raises for numerical trouble: the record gets ``ok=False`` and the
    reason instead.
    """
    W = config.W_gamma_grid[w_index]
    seed = realization_seed(config.base_seed, L, w_index, r)
    rec = {"L": L, "w_index": w_index, "W_gamma": W, "r": r, "seed": seed, "ok": True, "reason": ""}
    scalars, profiles, raw = {}, {}, {}
    try:
        params = config.params(L, W)
        H = build_hamiltonian(params, sample_disorder(params, seed))
        if {"complexity", "lanczos"} & set(config.metrics):
            opts = BiLanczosOptions(max_steps=config.lanczos_steps, keep_basis=False, verify=False)
            form, _, _ = tridiagonalize(H, initial_plus_state(L), opts)
            if form.breakdown:
                rec["reason"] = form.breakdown
            if "lanczos" in config.metrics:
                scalars["sigma_K2"] = krylov_variance(form)
                for d in config.reciprocity_depths:
                    scalars[f"R_K_{d}"] = reciprocity(form, d)
                profiles["abs_b"] = np.abs(form.b)
                profiles["abs_c"] = np.abs(form.c)
                profiles["cos_theta"] = np.cos(form.theta)
            if "complexity" in config.metrics:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    wfs = evolve_krylov_chain(form, config.times(), EvolveOptions(method=config.evolve_method))
                tr = diagnostic_trace(wfs)
                scalars["early_a"] = early_time_coefficient(tr)
                for t in _MARKED_TIMES:
                    c, i = tr.at(t)
                    scalars[f"C_K_{t:g}"] = c
                    scalars[f"I_K_{t:g}"] = i
                profiles["c_k"] = tr.c_k
                profiles["i_k"] = tr.i_k
                profiles["raw_log_norm"] = tr.raw_log_norm
        if {"csr", "entropy"} & set(config.metrics):
            spec = eigendecompose(H, vectors="entropy" in config.metrics)
            if "csr" in config.metrics:
                sample = csr_ratios(spec)
                scalars["r"] = mean_radial(sample)
                scalars["cos_theta"] = mean_angular(sample)
            if "entropy" in config.metrics:
                S = half_chain_entropies(spec.vectors, L)
                scalars["S"] = float(S.mean())
                scalars["S_max"] = float(S.max())
                if config.keep_records:
                    raw["re_E"] = spec.eigenvalues.real.tolist()
                    raw["S"] = S.tolist()
    except Exception as exc:  # recorded, never averaged
        rec.update(ok=False, reason=f"{type(exc).__name__}: {exc}")
        return rec
    rec["scalars"] = scalars
    rec["profiles"] = {k: np.asarray(v, dtype=float).tolist() for k, v in profiles.items()}
    if raw:
        rec["raw"] = raw
    return rec


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


@dataclass
class PointAggregate:
    L: int
    w_index: int
    W_gamma: float
    n_ok: int
    n_failed: int
    scalars: dict = field(default_factory=dict)
    profiles: dict = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        total = self.n_ok + self.n_failed
        return total > 0 and self.n_failed / total > FAILURE_FLAG_FRACTION

    def mean(self, name: str) -> float:
        return self.scalars[name]["mean"]

    def sem(self, name: str) -> float:
        return self.scalars[name]["sem"]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flagged"] = self.flagged
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PointAggregate":
        d = {k: v for k, v in d.items() if k != "flagged"}
        return cls(**d)


def _stats(values: np.ndarray) -> dict:
    n = values.shape[0]
    mean = values.mean(axis=0)
    if n > 1:
        std = values.std(axis=0, ddof=1)
        sem = std / math.sqrt(n)
    else:
        std = np.zeros_like(mean)
        sem = np.zeros_like(mean)
    return {"mean": mean.tolist(), "std": std.tolist(), "sem": sem.tolist(), "count": n, "sem_defined": n > 1}


def aggregate(records, L=None, w_index=None, W_gamma=None) -> PointAggregate:
    """Mean, sample std and standard error of every metric over successful records.

    Records are reduced in realization-index order.  Profiles of unequal
    length are cut to the shortest one; ``n_truncated`` counts the records
    that lost entries.
    """
    records = sorted(records, key=lambda rec: rec.get("r", 0))
    ok = [rec for rec in records if rec.get("ok", True)]
    if not ok:
        raise ValueError("no successful realizations to aggregate")
    first = ok[0]
    agg = PointAggregate(
        L=first.get("L", L),
        w_index=first.get("w_index", w_index),
        W_gamma=first.get("W_gamma", W_gamma),
        n_ok=len(ok),
        n_failed=len(records) - len(ok),
    )
    for name in first.get("scalars", {}):
        agg.scalars[name] = _stats(np.array([rec["scalars"][name] for rec in ok], dtype=float))
    for name in first.get("profiles", {}):
        seqs = [np.asarray(rec["profiles"][name], dtype=float) for rec in ok]
        n = min(s.size for s in seqs)
        stats = _stats(np.vstack([s[:n] for s in seqs]))
        stats["n_truncated"] = sum(s.size > n for s in seqs)
        agg.profiles[name] = stats
    return agg


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------


class StoreFormatError(ValueError):
    """A store file could not be parsed."""


class SchemaVersionError(ValueError):
    def __init__(self, found, expected=SCHEMA_VERSION):
        super().__init__(
            f"store schema version {found} cannot be read by this library (schema version {expected}); "
            "migrate the store or use a matching release"
        )
        self.found, self.expected = found, expected


@dataclass
class ResultStore:
    config: dict
    points: dict = field(default_factory=dict)  # "L:w_index" -> PointAggregate
    failures: list = field(default_factory=list)
    records: list = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    @staticmethod
    def key(L: int, w_index: int) -> str:
        return f"{L}:{w_index}"

    def point(self, L: int, w_index: int) -> PointAggregate:
        return self.points[self.key(L, w_index)]

    def sorted_points(self) -> list:
        return sorted(self.points.values(), key=lambda p: (p.L, p.w_index))

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "points": [p.to_dict() for p in self.sorted_points()],
            "failures": self.failures,
        }

    def aggregates_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "ResultStore":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionError(version)
        store = cls(config=d["config"], failures=list(d.get("failures", [])))
        for pd in d["points"]:
            p = PointAggregate.from_dict(pd)
            store.points[cls.key(p.L, p.w_index)] = p
        return store

    def __eq__(self, other):
        return isinstance(other, ResultStore) and self.to_dict() == other.to_dict()


def _tasks(config: ExperimentConfig, L: int, w_index: int):
    return [(config, L, w_index, r) for r in range(config.realizations(L))]


def _run_task(args):
    return run_realization(*args)


def run_sweep(config: ExperimentConfig, out_dir=None, threads: int = 1, progress=None) -> ResultStore:
    """Run every ``(L, W_gamma)`` point of ``config``.

    With ``out_dir`` the store is written after each point, and points
    already present in an existing store with the same config are skipped.
    ``threads > 1`` spreads realizations over a process pool.
    """
    store = ResultStore(config=config.to_dict())
    if out_dir is not None and (Path(out_dir) / "store.json").exists():
        old = load(out_dir)
        if old.config == store.config:
            store = old
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for L in config.L_list:
            for w_index, W in enumerate(config.W_gamma_grid):
                if ResultStore.key(L, w_index) in store.points:
                    continue
                tasks = _tasks(config, L, w_index)
                recs = list(pool.map(_run_task, tasks)) if pool else [_run_task(t) for t in tasks]
                for rec in recs:
                    if not rec["ok"]:
                        store.failures.append({k: rec[k] for k in ("L", "W_gamma", "r", "seed", "reason")})
                try:
                    agg = aggregate(recs)
                except ValueError:
                    agg = PointAggregate(L, w_index, W, 0, len(recs))
                store.points[ResultStore.key(L, w_index)] = agg
                if config.keep_records:
                    store.records.extend(recs)
                if out_dir is not None:
                    persist(store, out_dir)
                if progress is not None:
                    progress(agg)
    finally:
        if pool is not None:
            pool.shutdown()
    return store


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _write_family_csvs(store: ResultStore, out: Path) -> None:
    points = [p for p in store.sorted_points() if p.n_ok > 0]
    metrics = store.config.get("metrics", [])
    depths = store.config.get("reciprocity_depths", [4, 5, 6])
    if "lanczos" in metrics:
        header = ["L", "W_gamma", "sigma_K2_mean", "sigma_K2_sem"] + [f"R_K_{d}" for d in depths]
        rows = [
            [p.L, p.W_gamma, p.mean("sigma_K2"), p.sem("sigma_K2")] + [p.mean(f"R_K_{d}") for d in depths]
            for p in points
        ]
        _write_csv(out / "lanczos.csv", header, rows)
    if "csr" in metrics:
        header = ["L", "W_gamma", "r_mean", "r_sem", "cos_theta_mean", "cos_theta_sem", "n_realizations"]
        rows = [
            [p.L, p.W_gamma, p.mean("r"), p.sem("r"), p.mean("cos_theta"), p.sem("cos_theta"), p.n_ok]
            for p in points
        ]
        _write_csv(out / "csr.csv", header, rows)
    if "entropy" in metrics:
        rows = [[p.L, p.W_gamma, p.mean("S"), p.scalars["S"]["std"]] for p in points]
        _write_csv(out / "entropy.csv", ["L", "W_gamma", "S_mean", "sigma_S"], rows)
        for rec in store.records:
            if "raw" in rec:
                d = out / "entropy_samples"
                d.mkdir(exist_ok=True)
                _write_csv(
                    d / f"L{rec['L']}_w{rec['w_index']}_r{rec['r']}.csv",
                    ["re_E", "S"],
                    zip(rec["raw"]["re_E"], rec["raw"]["S"]),
                )
    if "complexity" in metrics:
        times = ExperimentConfig.from_dict(store.config).times()
        d = out / "traces"
        d.mkdir(exist_ok=True)
        for p in points:
            cols = [p.profiles[k]["mean"] for k in ("c_k", "i_k", "raw_log_norm")]
            _write_csv(d / f"L{p.L}_w{p.w_index}.csv", ["t", "c_k", "i_k", "raw_log_norm"], zip(times, *cols))


def persist(store: ResultStore, path) -> Path:
    """Write ``store.json`` (the manifest, authoritative) plus one CSV per metric family."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    tmp = out / "store.json.tmp"
    tmp.write_text(store.aggregates_json())
    os.replace(tmp, out / "store.json")
    _write_family_csvs(store, out)
    return out / "store.json"


def load(path) -> ResultStore:
    p = Path(path)
    if p.is_dir():
        p = p / "store.json"
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise StoreFormatError(f"cannot parse {p}: {exc}") from exc
    if not isinstance(data, dict) or "schema_version" not in data:
        raise StoreFormatError(f"{p} is not a result store")
    try:
        return ResultStore.from_dict(data)
    except SchemaVersionError:
        raise
    except (KeyError, TypeError) as exc:
        raise StoreFormatError(f"malformed store {p}: {exc}") from exc


def scaling_dataset(store: ResultStore, observable: str) -> ScalingDataset:
    """Curves ``L -> (W_gamma, mean, sem)`` of a scalar metric for collapse fits.

    ``observable`` names a scalar (``sigma_K2``, ``R_K_4``, ``S``...) or
    ``sigma_S`` for the realization spread of the mean entropy.
    """
    curves = {}
    for p in store.sorted_points():
        if p.n_ok == 0:
            continue
        if observable == "sigma_S":
            s = p.scalars["S"]
            row = (p.W_gamma, s["std"], 0.0)
        else:
            s = p.scalars[observable]
            row = (p.W_gamma, s["mean"], s["sem"])
        curves.setdefault(p.L, []).append(row)
    if not curves:
        raise ValueError(f"store has no data for {observable!r}")
    return ScalingDataset(curves, observable)

"""Krylov complexity and spectral diagnostics for disordered non-Hermitian XY chains."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .bilanczos import BiLanczos, BiLanczosOptions, TridiagonalForm, tridiagonalize
from .ensemble import ExperimentConfig, ResultStore, run_sweep
from .entanglement import eigenstate_entropy_stats, page_value
from .krylov_dynamics import complexity, diagnostic_trace, evolve_krylov_chain, ipr
from .lanczos_metrics import TsallisFit, krylov_variance, reciprocity
from .model import SpinChainParams, build_hamiltonian, initial_plus_state, sample_disorder
from .scaling import ScalingCollapse, ScalingDataset, collapse, crossing_point, nelder_mead
from .spectral import LogisticSizeExtrapolation, csr_ratios, eigendecompose

__all__ = [
    "BiLanczos",
    "BiLanczosOptions",
    "TridiagonalForm",
    "tridiagonalize",
    "ExperimentConfig",
    "ResultStore",
    "run_sweep",
    "eigenstate_entropy_stats",
    "page_value",
    "complexity",
    "diagnostic_trace",
    "evolve_krylov_chain",
    "ipr",
    "TsallisFit",
    "krylov_variance",
    "reciprocity",
    "SpinChainParams",
    "build_hamiltonian",
    "initial_plus_state",
    "sample_disorder",
    "ScalingCollapse",
    "ScalingDataset",
    "collapse",
    "crossing_point",
    "nelder_mead",
    "LogisticSizeExtrapolation",
    "csr_ratios",
    "eigendecompose",
]

"""Disordered non-Hermitian XY chain.

The Hamiltonian on an open chain of ``L`` spins is

    H = sum_{j<L} J (X_j X_{j+1} + Y_j Y_{j+1}) + sum_j (h X_j + D_j Z_j),

with complex longitudinal fields ``D_j = delta_j + i gamma_j`` drawn uniformly
from ``[-W_delta, W_delta]`` and ``[-W_gamma, W_gamma]``.

Basis convention: ``|s_1 s_2 ... s_L>`` with site 1 the most significant bit
and spin-up encoded as bit 0 (so ``Z|up> = +|up>``).  The entanglement module
relies on this ordering when it reshapes states into left/right halves.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_system_size

__all__ = [
    "SpinChainParams",
    "DisorderRealization",
    "build_hamiltonian",
    "sample_disorder",
    "initial_plus_state",
    "realization_seed",
]


@dataclass(frozen=True)
class SpinChainParams:
    """Model constants. Energies are in units of ``J``.

    ``W_delta`` defaults to 1.  Some reference traces were made at 0.5, so it
    is a knob rather than hard-wired.
    """

    L: int
    W_gamma: float = 0.0
    J: float = 1.0
    h: float = 0.5
    W_delta: float = 1.0

    def __post_init__(self):
        check_system_size(self.L)
        if self.W_delta < 0 or self.W_gamma < 0:
            raise ValueError("disorder half-widths must be non-negative")

    @property
    def dim(self) -> int:
        return 2**self.L


@dataclass(frozen=True)
class DisorderRealization:
    delta: np.ndarray
    gamma: np.ndarray
    seed: int | None = None
    L: int = field(init=False)

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        if delta.ndim != 1 or delta.shape != gamma.shape:
            raise ValueError("delta and gamma must be 1-D vectors of equal length")
        delta.setflags(write=False)
        gamma.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "L", delta.shape[0])

    @property
    def fields(self) -> np.ndarray:
        """Complex longitudinal fields ``delta + i gamma``."""
        return self.delta + 1j * self.gamma

    def to_json(self) -> str:
        return json.dumps(
            {
                "L": self.L,
                "seed": self.seed,
                "delta": self.delta.tolist(),
                "gamma": self.gamma.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DisorderRealization":
        obj = json.loads(text)
        real = cls(obj["delta"], obj["gamma"], obj.get("seed"))
        if real.L != obj["L"]:
            raise ValueError(f"L={obj['L']} disagrees with {real.L} stored fields")
        return real

    def __eq__(self, other):
        if not isinstance(other, DisorderRealization):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.delta, other.delta)
            and np.array_equal(self.gamma, other.gamma)
        )

    __hash__ = None


def realization_seed(base_seed: int, L: int, w_index: int, r: int) -> int:
    """64-bit seed for realization ``r`` of grid point ``(L, w_index)``.

    Derived through ``SeedSequence`` so that neighbouring indices give
    statistically independent streams.
    """
    ss = np.random.SeedSequence([int(base_seed), int(L), int(w_index), int(r)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_disorder(params: SpinChainParams, seed: int) -> DisorderRealization:
    """Draw ``delta`` then ``gamma`` from a Philox stream keyed by ``seed``."""
    rng = np.random.Generator(np.random.Philox(int(seed)))
    L = params.L
    delta = params.W_delta * (2.0 * rng.random(L) - 1.0)
    gamma = params.W_gamma * (2.0 * rng.random(L) - 1.0)
    return DisorderRealization(delta, gamma, int(seed))


def build_hamiltonian(params: SpinChainParams, disorder: DisorderRealization) -> np.ndarray:
    """Dense ``2**L x 2**L`` complex matrix of the chain.

    The result is complex symmetric (``H == H.T``); all non-Hermiticity sits on
    the diagonal through ``i gamma_j Z_j``.
    """
    L = params.L
    if disorder.L != L:
        raise ValueError(f"disorder has length {disorder.L}, params.L is {L}")
    d = 2**L
    idx = np.arange(d)
    H = np.zeros((d, d), dtype=np.complex128)

    bits = [(idx >> (L - 1 - j)) & 1 for j in range(L)]
    diag = np.zeros(d, dtype=np.complex128)
    for j, D in enumerate(disorder.fields):
        diag += D * (1 - 2 * bits[j])
    H[idx, idx] = diag

    if params.h != 0:
        for j in range(L):
            H[idx ^ (1 << (L - 1 - j)), idx] += params.h

    # XX + YY = 2 (S+S- + S-S+): swaps antiparallel neighbours with weight 2.
    for j in range(L - 1):
        anti = bits[j] != bits[j + 1]
        src = idx[anti]
        mask = (1 << (L - 1 - j)) | (1 << (L - 2 - j))
        H[src ^ mask, src] += 2.0 * params.J
    return H


def initial_plus_state(L: int) -> np.ndarray:
    """Product state with every spin along +x."""
    L = check_system_size(L)
    d = 2**L
    return np.full(d, 2.0 ** (-L / 2), dtype=np.complex128)

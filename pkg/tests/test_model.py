import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import kron_hamiltonian
from krylovchaos.model import (
    DisorderRealization,
    SpinChainParams,
    build_hamiltonian,
    initial_plus_state,
    realization_seed,
    sample_disorder,
)


def test_single_site_is_transverse_field():
    H = build_hamiltonian(SpinChainParams(L=1), DisorderRealization([0.0], [0.0]))
    np.testing.assert_array_equal(H, [[0, 0.5], [0.5, 0]])


def test_two_site_xy_spectrum():
    p = SpinChainParams(L=2, h=0.0)
    H = build_hamiltonian(p, DisorderRealization([0, 0], [0, 0]))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(H)), [-2, 0, 0, 2], atol=1e-14)


def test_matches_kronecker_oracle_two_sites():
    p = SpinChainParams(L=2, h=0.5)
    dis = DisorderRealization([0.3, -0.1], [0.2, -0.2])
    H = build_hamiltonian(p, dis)
    ref = kron_hamiltonian(2, 1.0, 0.5, dis.delta, dis.gamma)
    assert np.abs(H - ref).max() < 1e-14


@settings(max_examples=25, deadline=None)
@given(
    L=st.integers(1, 5),
    seed=st.integers(0, 2**32),
    J=st.floats(-2, 2),
    h=st.floats(-2, 2),
    wg=st.floats(0, 3),
)
def test_matches_kronecker_oracle_random(L, seed, J, h, wg):
    p = SpinChainParams(L=L, W_gamma=wg, J=J, h=h)
    dis = sample_disorder(p, seed)
    H = build_hamiltonian(p, dis)
    assert np.abs(H - kron_hamiltonian(L, J, h, dis.delta, dis.gamma)).max() < 1e-13


@settings(max_examples=20, deadline=None)
@given(L=st.integers(1, 6), seed=st.integers(0, 2**32), wg=st.floats(0, 5))
def test_symmetry_and_trace(L, seed, wg):
    p = SpinChainParams(L=L, W_gamma=wg)
    dis = sample_disorder(p, seed)
    H = build_hamiltonian(p, dis)
    assert np.abs(H - H.T).max() == 0
    assert abs(np.trace(H)) < 1e-12
    # anti-Hermitian part is the gamma Z terms only
    gz = kron_hamiltonian(L, 0.0, 0.0, np.zeros(L), dis.gamma)
    np.testing.assert_allclose(H - H.conj().T, 2 * gz, atol=1e-13)


@pytest.mark.parametrize("L", [2, 4, 6])
def test_hermitian_limit_has_real_spectrum(L):
    p = SpinChainParams(L=L, W_gamma=0.0)
    H = build_hamiltonian(p, sample_disorder(p, 3))
    assert np.abs(H - H.conj().T).max() == 0
    assert np.abs(np.linalg.eigvals(H).imag).max() < 1e-10


def test_disorder_zero_width():
    dis = sample_disorder(SpinChainParams(L=5, W_delta=0.0, W_gamma=0.0), 42)
    assert not dis.delta.any() and not dis.gamma.any()


def test_disorder_box_and_determinism():
    p = SpinChainParams(L=8, W_gamma=0.5)
    a, b = sample_disorder(p, 7), sample_disorder(p, 7)
    assert np.all(np.abs(a.delta) <= 1.0) and np.all(np.abs(a.gamma) <= 0.5)
    assert a == b
    assert a != sample_disorder(p, 8)


def test_disorder_moments():
    dis = sample_disorder(SpinChainParams(L=100_000), 1)
    assert abs(dis.delta.mean()) < 0.02
    assert abs(dis.delta.var() - 1 / 3) < 0.02


def test_disorder_json_round_trip():
    dis = sample_disorder(SpinChainParams(L=4, W_gamma=1.0), 5)
    text = dis.to_json()
    assert set(__import__("json").loads(text)) == {"L", "seed", "delta", "gamma"}
    assert DisorderRealization.from_json(text) == dis


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        build_hamiltonian(SpinChainParams(L=3), DisorderRealization([0, 0], [0, 0]))


def test_invalid_params():
    with pytest.raises(ValueError):
        SpinChainParams(L=0)
    with pytest.raises(ValueError):
        SpinChainParams(L=2, W_gamma=-1)


@pytest.mark.parametrize("L, expected", [(1, [2**-0.5] * 2), (2, [0.5] * 4)])
def test_plus_state_small(L, expected):
    np.testing.assert_allclose(initial_plus_state(L), expected, rtol=0, atol=1e-15)


def test_plus_state_l10():
    psi = initial_plus_state(10)
    assert abs(np.linalg.norm(psi) - 1) < 1e-14
    assert np.all(psi == psi[0])


def test_realization_seeds_distinct():
    seeds = {realization_seed(0, L, w, r) for L in (4, 6) for w in range(5) for r in range(20)}
    assert len(seeds) == 200
    assert realization_seed(3, 6, 1, 2) == realization_seed(3, 6, 1, 2)

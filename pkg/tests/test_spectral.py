import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_h
from krylovchaos.spectral import (
    REFERENCE_VALUES,
    ExtrapolationError,
    LogisticSizeExtrapolation,
    Spectrum,
    csr_ratios,
    eigendecompose,
    extrapolate_r_infinity,
    mean_angular,
    mean_radial,
    sample_reference_ensemble,
)


def test_eig_diagonal():
    z = eigendecompose(np.diag([1 + 2j, 3])).eigenvalues
    np.testing.assert_allclose(np.sort_complex(z), [1 + 2j, 3])


def test_eig_hermitian_model_real():
    z = eigendecompose(make_h(3, 0.0, seed=1)).eigenvalues
    assert np.abs(z.imag).max() < 1e-10


def test_eig_hand_2x2():
    z = eigendecompose(np.array([[0, 1], [2, 0]])).eigenvalues
    np.testing.assert_allclose(np.sort(z.real), [-np.sqrt(2), np.sqrt(2)])
    assert np.abs(z.imag).max() < 1e-15


def test_eig_vectors_backward_error():
    H = make_h(5, 1.0, seed=2)
    spec = eigendecompose(H, vectors=True, check_pairs=32)
    V, z = spec.vectors, spec.eigenvalues
    np.testing.assert_allclose(np.linalg.norm(V, axis=0), 1.0)
    assert np.abs(H @ V - V * z).max() / np.abs(H).sum(axis=0).max() < 1e-10


def test_csr_collinear():
    s = csr_ratios(np.array([0, 1, 2], dtype=complex))
    assert s.ratios[0] == pytest.approx(0.5)


def test_csr_hand_ranking():
    s = csr_ratios(np.array([0, 1, 1 + 1j]))
    assert s.ratios[0] == pytest.approx(0.5 - 0.5j)


def test_csr_duplicates_excluded():
    s = csr_ratios(np.array([0, 0, 1, 3, 7], dtype=complex))
    assert s.n_excluded == 2 and s.ratios.size == 3


def test_csr_needs_three_points():
    with pytest.raises(ValueError):
        csr_ratios(np.array([0, 1]))


def test_csr_edge_drop():
    rng = np.random.default_rng(1)
    z = rng.standard_normal(200) + 1j * rng.standard_normal(200)
    assert csr_ratios(z, drop_edge_fraction=0.1).ratios.size == 180


def test_csr_chunking_is_exact():
    rng = np.random.default_rng(2)
    z = rng.standard_normal(300) + 1j * rng.standard_normal(300)
    np.testing.assert_array_equal(csr_ratios(z, chunk=7).ratios, csr_ratios(z).ratios)


points = st.lists(
    st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=3, max_size=40, unique=True
)


@settings(max_examples=40, deadline=None)
@given(points)
def test_ratios_inside_unit_disc(z):
    s = csr_ratios(np.array(z))
    assert np.all(np.abs(s.ratios) <= 1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.complex_numbers(max_magnitude=5), st.floats(0, 2 * np.pi))
def test_shift_and_rotation_invariance(seed, shift, angle):
    rng = np.random.default_rng(seed)
    # well separated points so neighbour ranking survives rounding
    z = rng.permutation(np.arange(30)) + 1j * rng.permutation(np.arange(30)) + 0.1 * rng.random(30)
    base = csr_ratios(z).ratios
    moved = csr_ratios(np.exp(1j * angle) * z + shift).ratios
    np.testing.assert_allclose(moved, base, atol=1e-9)


def test_summaries():
    from krylovchaos.spectral import CsrSample

    s = CsrSample(np.array([0.5, -0.5j, -0.25]))
    assert mean_radial(s) == pytest.approx(1.25 / 3)
    assert mean_angular(s) == pytest.approx((1 + 0 - 1) / 3)
    with pytest.raises(ValueError):
        mean_radial(CsrSample(np.array([])))


def test_reference_samplers():
    goe = sample_reference_ensemble("GOE", 50, 2, seed=3)
    assert all(np.all(s.eigenvalues.imag == 0) for s in goe)
    a = sample_reference_ensemble("AIdagger", 50, 1, seed=3)[0].eigenvalues
    assert np.abs(a.imag).max() > 0.1
    p = sample_reference_ensemble("Poisson2D", 50, 1, seed=3)[0]
    assert p.support == (0.0, 1.0, 0.0, 1.0)
    again = sample_reference_ensemble("GOE", 50, 2, seed=3)
    np.testing.assert_array_equal(goe[1].eigenvalues, again[1].eigenvalues)
    with pytest.raises(ValueError):
        sample_reference_ensemble("GUE", 50, 1, 0)
    with pytest.raises(ValueError):
        sample_reference_ensemble("GOE", 2, 1, 0)


def test_aidagger_construction_is_symmetric():
    # rebuild the first matrix from the same stream and check M == M^T
    rng = np.random.Generator(np.random.Philox(9))
    A = rng.standard_normal((20, 20)) + 1j * rng.standard_normal((20, 20))
    M = 0.5 * (A + A.T)
    assert np.array_equal(M, M.T)
    z = sample_reference_ensemble("AIdagger", 20, 1, 9)[0].eigenvalues
    np.testing.assert_allclose(np.sort_complex(z), np.sort_complex(np.linalg.eigvals(M)), atol=1e-10)


def test_poisson_boundary_estimator_is_close_to_plane():
    spectra = sample_reference_ensemble("Poisson2D", 1000, 10, seed=5)
    samples = [csr_ratios(s) for s in spectra]
    assert all(s.n_boundary > 0 for s in samples)
    r = np.mean([mean_radial(s) for s in samples])
    assert r == pytest.approx(2 / 3, abs=0.01)


def test_reference_table():
    assert REFERENCE_VALUES["Poisson2D"] == (2 / 3, 0.0)


def _logistic(L, r_inf, dr, a, L0):
    return r_inf + dr / (1 + np.exp(-a * (np.asarray(L, float) - L0)))


def test_logistic_recovers_generator():
    L = np.array([4, 6, 8, 10, 12, 14])
    true = (0.567, 0.12, -0.6, 8.0)
    fit = LogisticSizeExtrapolation().fit(L, _logistic(L, *true))
    np.testing.assert_allclose([fit.r_inf_, fit.delta_r_, fit.a_, fit.L0_], true, atol=1e-6)
    np.testing.assert_allclose(fit.predict(L), _logistic(L, *true), atol=1e-10)


def test_logistic_canonical_sign():
    L = np.array([4, 6, 8, 10, 12])
    y = _logistic(L, 0.7, -0.05, 0.8, 7.0)  # a > 0: the L -> inf limit is 0.65
    fit = extrapolate_r_infinity(dict(zip(L.tolist(), y)))
    assert fit.a_ <= 0
    assert fit.r_inf_ == pytest.approx(0.65, abs=1e-6)


def test_logistic_needs_four_sizes():
    with pytest.raises(ValueError):
        LogisticSizeExtrapolation().fit([4, 6, 8], [0.6, 0.62, 0.63])


def test_extrapolation_error_carries_params():
    err = ExtrapolationError("x", np.arange(4.0))
    assert err.best_params.size == 4


def test_spectrum_csv(tmp_path):
    Spectrum(np.array([1 + 2j, -0.5j])).to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "re,im" and len(lines) == 3

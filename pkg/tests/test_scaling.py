import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krylovchaos.scaling import (
    PENALTY,
    CollapseError,
    CollapseResult,
    ScalingCollapse,
    ScalingDataset,
    collapse,
    collapse_objective,
    crossing_point,
    nelder_mead,
)


def synthetic(W_c=1.0, alpha=0.8, beta=0.5, sizes=(6, 8, 10, 12), noise=0.0, seed=0, lo=0.5, hi=1.5, n=41, span=None):
    """``y = L^beta tanh((W - W_c) L^alpha)`` with optional multiplicative noise.

    By default every size shares a linear W grid on ``[lo, hi]``.  With
    ``span`` each size instead gets ``n`` jittered, evenly spaced points with
    ``|W - W_c| L^alpha <= span``, so sharp large-L curves stay resolved and
    the sample positions of different sizes never line up.
    """
    rng = np.random.default_rng(seed)
    curves = {}
    for L in sizes:
        if span is None:
            W = np.linspace(lo, hi, n)
        else:
            x = np.linspace(-span, span, n)
            x[1:-1] += 0.4 * (x[1] - x[0]) * rng.uniform(-1, 1, n - 2)
            W = W_c + x / L**alpha
        y = L**beta * np.tanh((W - W_c) * L**alpha)
        y = y * (1 + noise * rng.standard_normal(n))
        curves[L] = np.column_stack([W, y, noise * np.abs(y)])
    return ScalingDataset(curves, "y")


def test_nm_parabola():
    r = nelder_mead(lambda x: (x[0] - 3) ** 2, [0.0])
    assert r.converged and abs(r.x[0] - 3) < 1e-5


def test_nm_rosenbrock():
    r = nelder_mead(lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2, [-1.2, 1.0])
    assert r.converged
    np.testing.assert_allclose(r.x, [1, 1], atol=1e-3)


def test_nm_constant():
    r = nelder_mead(lambda x: 4.0, [1.0, 2.0])
    assert r.converged
    np.testing.assert_array_equal(r.x, [1.0, 2.0])


def test_nm_max_iter_flagged():
    r = nelder_mead(lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2, [-1.2, 1.0], max_iter=5)
    assert not r.converged and r.nit == 5


def test_nm_nonfinite_start():
    with pytest.raises(ValueError):
        nelder_mead(lambda x: np.inf, [0.0])


def test_spec_generator_recovered():
    res = collapse(synthetic(beta=-0.5))
    assert res.W_c == pytest.approx(1.0, rel=0.02)
    assert res.alpha == pytest.approx(0.8, rel=0.02)
    assert res.beta == pytest.approx(-0.5, rel=0.02)
    assert res.objective >= 0 and res.converged


@settings(max_examples=8, deadline=None, derandomize=True)
@given(
    W_c=st.floats(0.8, 2.0),
    alpha=st.floats(0.5, 1.5),
    beta=st.floats(-0.8, 0.8).filter(lambda b: abs(b) > 0.2),
    seed=st.integers(0, 1000),
)
def test_recovery_with_noise(W_c, alpha, beta, seed):
    data = synthetic(W_c, alpha, beta, noise=0.01, seed=seed, span=3.0, n=121)
    res = collapse(data)
    assert res.W_c == pytest.approx(W_c, rel=0.05)
    assert res.alpha == pytest.approx(alpha, rel=0.05)
    assert res.beta == pytest.approx(beta, rel=0.05)


def test_fixed_beta():
    res = collapse(synthetic(beta=0.0), rescale_y=False)
    assert res.beta == 0.0
    assert res.W_c == pytest.approx(1.0, rel=0.02) and res.alpha == pytest.approx(0.8, rel=0.05)


def test_common_y_scaling_invariance():
    data = synthetic(noise=0.01, seed=4)
    doubled = ScalingDataset({L: a * [1, 2, 2] for L, a in data.curves.items()})
    a, b = collapse(data), collapse(doubled)
    assert abs(a.W_c - b.W_c) < 1e-4 and abs(a.alpha - b.alpha) < 1e-4


def test_relabel_invariance_of_objective():
    data = synthetic(noise=0.01, seed=5)
    reordered = ScalingDataset(dict(reversed(list(data.curves.items()))))
    p = [1.02, 0.7, 0.4]
    assert collapse_objective(p, data) == collapse_objective(p, reordered)


def test_empty_overlap_penalized():
    data = synthetic()
    assert collapse_objective([100.0, 0.8, 0.5], data) >= PENALTY


def test_beta_identifiable():
    # the objective must see the relative L^beta factor between curves
    data = synthetic(beta=0.5)
    assert collapse_objective([1.0, 0.8, 0.5], data) < 1e-3 < collapse_objective([1.0, 0.8, 0.0], data)


def test_dataset_validation():
    with pytest.raises(ValueError):
        ScalingCollapse().fit(synthetic(sizes=(6, 8)))
    with pytest.raises(ValueError):
        ScalingCollapse().fit(synthetic(n=4))
    with pytest.raises(ValueError):
        ScalingDataset({4: np.ones((5, 4))})


def test_estimator_transform_and_json():
    data = synthetic()
    est = ScalingCollapse(init=(1.1, 0.7, 0.4)).fit(data)
    scaled = est.transform(data)
    assert set(scaled) == set(data.sizes)
    res = est.result()
    back = CollapseResult.from_json(res.to_json())
    assert back == res
    prov = json.loads(res.to_json())["provenance"]
    assert prov["dataset_sha256"] == data.digest() and prov["init"] == [1.1, 0.7, 0.4]
    assert len(est.runs_) == 17


def test_divergent_fit_raises_with_best():
    with pytest.raises(CollapseError) as info:
        ScalingCollapse(max_iter=3).fit(synthetic())
    assert info.value.best is not None and not info.value.best.converged


def test_crossing_linear():
    W = np.linspace(0, 4, 9)
    data = ScalingDataset({L: np.column_stack([W, W - 2]) for L in (4, 6, 8)})
    res = crossing_point(data)
    assert res.mean == pytest.approx(2.0, abs=1e-14)


def test_crossing_interpolates():
    data = ScalingDataset({4: [[1, -1], [2, 1], [3, 2]], 6: [[1, -3], [2, 1], [3, 2]]})
    res = crossing_point(data)
    assert res.per_size == {4: 1.5, 6: 1.75}


def test_crossing_errors():
    W = np.linspace(0, 4, 9)
    data = ScalingDataset({4: np.column_stack([W, W - 2]), 6: np.column_stack([W, W + 1])})
    res = crossing_point(data)
    assert 6 in res.errors and res.mean == pytest.approx(2.0)
    with pytest.raises(ValueError):
        crossing_point(ScalingDataset({6: np.column_stack([W, W + 1])}))
    wiggly = ScalingDataset({4: np.column_stack([W, np.sin(3 * W)])})
    with pytest.raises(ValueError, match="sign changes"):
        crossing_point(wiggly)

import math

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sammrf.hypercube import DataError, SpectralCube
from sammrf.spectral import spectral_angle
from sammrf.unary import (LrModel, TrainingSet, UnaryField, _augment, load_external_probabilities, lr_objective,
                          lr_probabilities, neglog_unary, sam_unary, train_lr)

NEG_LOG_FLOOR = 27.6310211159285482  # -ln(1e-12), mpmath


def _cube(pixels, width=None):
    p = np.asarray(pixels, dtype=float)
    width = width or p.shape[0]
    return SpectralCube(p.reshape(-1, width, p.shape[1]))


# ---------------------------------------------------------------- SAM


def test_sam_unary_example():
    train = TrainingSet([(1, 0), (0, 1), (1, 1)], [1, 2, 2])
    u = sam_unary(_cube([(1, 0)]), train)
    np.testing.assert_allclose(u.energies, [[0.0, math.pi / 4]], atol=1e-15)


def test_sam_identical_exemplar_gives_zero(rng):
    x = rng.normal(size=(6, 5)) + 3
    train = TrainingSet(x[:3], [1, 2, 1])
    u = sam_unary(_cube(x), train)
    assert u.energies[0, 0] == pytest.approx(0.0, abs=1e-7)
    assert u.energies[1, 1] == pytest.approx(0.0, abs=1e-7)
    assert np.all((u.energies >= 0) & (u.energies <= math.pi))


def test_sam_duplicates_and_missing_class(rng):
    x = rng.normal(size=(10, 4))
    cube = _cube(x, width=5)
    train = TrainingSet(x[:4], [1, 2, 3, 1])
    dup = TrainingSet(np.vstack([x[:4], x[1:2]]), [1, 2, 3, 1, 2])
    np.testing.assert_array_equal(sam_unary(cube, train).energies, sam_unary(cube, dup).energies)
    with pytest.raises(ValueError, match="class 4"):
        sam_unary(cube, train, class_count=4)


def test_sam_adding_exemplars_never_raises_energy(rng):
    x = rng.normal(size=(30, 6))
    cube = _cube(x, width=6)
    ex = rng.normal(size=(12, 6))
    lab = np.array([1, 2, 3] * 4)
    before = sam_unary(cube, TrainingSet(ex[:6], lab[:6]))
    after = sam_unary(cube, TrainingSet(ex, lab))
    assert np.all(after.energies <= before.energies)


def test_sam_argmin_matches_direct_min_angle(rng):
    x = rng.normal(size=(40, 8))
    cube = _cube(x, width=8)
    ex = rng.normal(size=(9, 8))
    lab = np.array([1, 2, 3, 1, 2, 3, 1, 2, 3])
    got = sam_unary(cube, TrainingSet(ex, lab)).argmin()
    for i in range(40):
        best = min(range(9), key=lambda k: (spectral_angle(x[i], ex[k]), lab[k]))
        assert got[i] == lab[best]


# ---------------------------------------------------------------- logistic regression


def _cvx_oracle(x, y, n_classes, l2):
    xa = _augment(x)
    W = cp.Variable((n_classes, xa.shape[1]))
    S = xa @ W.T
    onehot = np.eye(n_classes)[y - 1]
    obj = cp.sum(cp.log_sum_exp(S, axis=1)) - cp.sum(cp.multiply(onehot, S)) + 0.5 * l2 * cp.sum_squares(W[:, :-1])
    cp.Problem(cp.Minimize(obj), [cp.sum(W[:, -1]) == 0]).solve(solver=cp.CLARABEL)
    return W.value


def test_lr_two_points_matches_convex_oracle():
    train = TrainingSet([[-1.0], [1.0]], [1, 2])
    model = train_lr(train, 1.0)
    np.testing.assert_allclose(model.weights, _cvx_oracle(train.spectra, train.labels, 2, 1.0), atol=1e-4)
    # stationarity of 2 log(1 + e^{-2w}) + w^2 gives w = 2 / (1 + e^{2w})
    w = model.weights[1, 0]
    assert w == pytest.approx(2 / (1 + math.exp(2 * w)), abs=1e-6)


def test_lr_random_problem_matches_convex_oracle(rng):
    x = rng.normal(size=(24, 3))
    y = np.repeat([1, 2, 3], 8)
    x += y[:, None] * 0.5
    model = train_lr(TrainingSet(x, y), 0.5)
    assert model.converged
    np.testing.assert_allclose(model.weights, _cvx_oracle(x, y, 3, 0.5), atol=1e-4)


def test_lr_strong_regularization_predicts_priors(rng):
    x = rng.normal(size=(20, 4))
    y = np.array([1] * 5 + [2] * 15)
    model = train_lr(TrainingSet(x, y), 1e9)
    assert np.max(np.abs(model.weights[:, :-1])) < 1e-6
    probs = lr_probabilities(model, _cube(x, width=5))
    np.testing.assert_allclose(probs, np.tile([0.25, 0.75], (20, 1)), atol=1e-6)


def test_lr_training_order_does_not_matter(rng):
    x = rng.normal(size=(30, 5))
    y = rng.integers(1, 4, 30)
    perm = rng.permutation(30)
    a = train_lr(TrainingSet(x, y), 1.0)
    b = train_lr(TrainingSet(x[perm], y[perm]), 1.0)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_lr_needs_two_classes():
    with pytest.raises(ValueError):
        train_lr(TrainingSet([[1.0], [2.0]], [1, 1]))


def _central_difference(f, w, h=1e-6):
    g = np.empty_like(w)
    for k in range(w.size):
        e = np.zeros_like(w)
        e[k] = h
        g[k] = (f(w + e) - f(w - e)) / (2 * h)
    return g


@pytest.mark.parametrize("seed", range(5))
def test_lr_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n, b, C = rng.integers(4, 12), rng.integers(1, 5), rng.integers(2, 5)
    xa = _augment(rng.normal(size=(n, b)))
    y0 = rng.integers(0, C, n)
    w = rng.normal(size=C * (b + 1))
    l2 = rng.uniform(0, 2)
    _, g = lr_objective(w, xa, y0, C, l2)
    fd = _central_difference(lambda v: lr_objective(v, xa, y0, C, l2)[0], w)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-5


def test_lr_probabilities_examples():
    cube = _cube([(0.3, -2.0), (5.0, 1.0)])
    zero = LrModel(np.zeros((3, 3)), 1.0)
    np.testing.assert_allclose(lr_probabilities(zero, cube), 1 / 3, rtol=1e-15)
    m = LrModel(np.array([[0.0, 0.0, math.log(3)], [0.0, 0.0, 0.0]]), 1.0)
    np.testing.assert_allclose(lr_probabilities(m, cube), [[0.75, 0.25]] * 2, rtol=1e-14)
    shifted = LrModel(m.weights + np.array([[0, 0, 7.5]]), 1.0)
    np.testing.assert_allclose(lr_probabilities(shifted, cube), lr_probabilities(m, cube), rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000))
def test_lr_probability_rows_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    m = LrModel(rng.normal(scale=5, size=(4, 4)), 1.0)
    p = lr_probabilities(m, _cube(rng.normal(size=(6, 3)), width=3))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


# ---------------------------------------------------------------- probabilities -> energies


def test_neglog_examples():
    u = neglog_unary(np.array([[1.0, math.exp(-1), 0.0]]), 1, 1)
    assert u.energies[0, 0] == 0.0 and math.copysign(1, u.energies[0, 0]) == 1
    assert u.energies[0, 1] == pytest.approx(1.0, rel=1e-15)
    assert u.energies[0, 2] == pytest.approx(NEG_LOG_FLOOR, rel=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=2))
def test_neglog_monotone_and_exact_above_floor(ps):
    lo, hi = sorted(ps)
    e = neglog_unary(np.array([[lo, hi]]), 1, 1).energies[0]
    assert e[0] >= e[1] >= 0
    if lo >= 1e-12:
        assert e[0] == -np.log(lo) + 0.0


def test_unary_field_rejects_bad_values():
    with pytest.raises(ValueError):
        UnaryField(np.array([[-0.1, 1.0]]), 1, 1)
    with pytest.raises(ValueError):
        UnaryField(np.array([[np.inf, 1.0]]), 1, 1)
    with pytest.raises(ValueError):
        UnaryField(np.zeros((3, 2)), 2, 2)


def test_external_probabilities(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("0.5,0.5\n0.25,0.75\n")
    np.testing.assert_allclose(load_external_probabilities(p, 2, 1, 2), [[0.5, 0.5], [0.25, 0.75]])
    p.write_text("0.333,0.333,0.333\n")
    np.testing.assert_allclose(load_external_probabilities(p, 1, 1, 3), [[1 / 3] * 3], atol=1e-9)


@pytest.mark.parametrize("text,expected,match", [
    ("0.2,0.2\n", (1, 1, 2), "sums to"),
    ("0.5,0.5\n", (2, 1, 2), "expected 2"),
    ("0.5,0.5,0\n", (1, 1, 2), "columns"),
    ("1.2,-0.2\n", (1, 1, 2), "negative"),
    ("a,b\n", (1, 1, 2), "non-numeric"),
])
def test_external_probabilities_errors(tmp_path, text, expected, match):
    p = tmp_path / "p.csv"
    p.write_text(text)
    with pytest.raises(DataError, match=match):
        load_external_probabilities(p, *expected)

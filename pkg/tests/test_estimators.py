"""Eigenbasis and both estimators against dense oracles and analytic targets."""

import numpy as np
import pytest

from kaf.errors import InvalidInputError
from kaf.estimators import (
    EigenBasis,
    eigendecompose,
    fit_kernel_smoothing,
    fit_nystrom,
    nystrom_fitted,
    predict_kernel_smoothing,
    predict_nystrom,
    rmse_curve,
    smoothing_fitted,
)
from kaf.kernel import DensityEstimate, KernelParams, build_markov


def _circle_op(n, seed, knn=128):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    return build_markov(pts, KernelParams(knn=knn)), theta


def _small_op(n, seed, knn=24):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 2))
    return build_markov(pts, KernelParams(knn=min(knn, n)))


# ---------------------------------------------------------------------------
# eigendecomposition


def test_two_point_operator_spectrum():
    pts = np.zeros((2, 1))
    ones = np.ones(2)
    op = build_markov(
        pts,
        KernelParams(epsilon=1.0, alpha=0.0, d=1, knn=2),
        density=DensityEstimate(q=ones, rho=ones, d=1),
    )
    basis = eigendecompose(op, 1)
    assert np.allclose(basis.eigenvalues, [1.0, 0.0], atol=1e-12)
    assert np.allclose(basis.phi[:, 0], 1.0)


def test_arpack_matches_dense_solver():
    op = _small_op(650, seed=21, knn=32)  # above the dense cutoff
    a = eigendecompose(op, 12, method="dense")
    b = eigendecompose(op, 12, method="arpack")
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-8)
    assert np.abs(a.phi - b.phi).max() < 1e-6  # sign convention matches too


def test_eigen_residuals():
    op, _ = _circle_op(400, seed=22, knn=48)
    basis = eigendecompose(op, 30, method="arpack")
    for j in range(31):
        phi_j = basis.phi[:, j]
        res = op.P @ phi_j - basis.eigenvalues[j] * phi_j
        assert np.linalg.norm(res) <= 1e-8 * np.linalg.norm(phi_j)


def test_orthonormality_and_ordering():
    op, _ = _circle_op(500, seed=23, knn=48)
    basis = eigendecompose(op, 25)
    gram = basis.phi.T @ (basis.weights[:, None] * basis.phi)
    assert np.abs(gram - np.eye(26)).max() < 1e-8
    assert abs(basis.eigenvalues[0] - 1.0) <= 1e-8
    assert np.all(np.diff(basis.eigenvalues) <= 1e-12)
    assert np.all(basis.phi[:, 0] == 1.0)
    assert abs(basis.weights.sum() - 1.0) < 1e-12


def test_eigendecompose_is_deterministic():
    op = _small_op(700, seed=24, knn=32)
    a = eigendecompose(op, 15)
    b = eigendecompose(op, 15)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.phi, b.phi)


def test_eigendecompose_validates_L():
    op = _small_op(30, seed=25, knn=10)
    with pytest.raises(InvalidInputError):
        eigendecompose(op, 30)
    basis = eigendecompose(op, 29)  # complete basis is allowed
    assert basis.size == 30


# ---------------------------------------------------------------------------
# Nystrom projection


def test_eigenvector_response_recovers_unit_coefficient():
    op = _small_op(300, seed=26)
    basis = eigendecompose(op, 10)
    est = fit_nystrom(basis, basis.phi[:, 3], L=10)
    expected = np.zeros(11)
    expected[3] = 1.0
    assert np.allclose(est.coefficients[:, 0], expected, atol=1e-8)


def test_constant_response():
    op = _small_op(300, seed=27)
    basis = eigendecompose(op, 8)
    est = fit_nystrom(basis, np.full(300, 3.7))
    assert abs(est.coefficients[0, 0] - 3.7) < 1e-10
    assert np.abs(est.coefficients[1:, 0]).max() < 1e-8
    assert np.allclose(nystrom_fitted(est), 3.7, atol=1e-8)
    # constant stays constant out of sample: extension rows are stochastic
    pred = predict_nystrom(est, op.points[:5] * 1.001)
    assert np.allclose(pred, 3.7, atol=1e-6)


def test_complete_basis_interpolates():
    op = _small_op(40, seed=28, knn=12)
    basis = eigendecompose(op, 39)
    rng = np.random.default_rng(29)
    y = rng.normal(size=(40, 2))
    est = fit_nystrom(basis, y)
    assert np.abs(nystrom_fitted(est) - y).max() < 1e-6


def test_projection_residual_is_orthogonal():
    op, theta = _circle_op(600, seed=30, knn=48)
    basis = eigendecompose(op, 20)
    y = np.sin(theta) + 0.3 * np.cos(3 * theta)
    est = fit_nystrom(basis, y, L=20)
    resid = y - nystrom_fitted(est)
    for j in range(21):
        assert abs(basis.inner(resid, basis.phi[:, j])) < 1e-8


def test_prediction_at_training_point_matches_fit():
    op, theta = _circle_op(800, seed=31, knn=64)
    basis = eigendecompose(op, 15)
    est = fit_nystrom(basis, np.sin(theta), L=15)
    take = [3, 77, 420]
    pred = predict_nystrom(est, op.points[take])
    assert np.abs(pred - nystrom_fitted(est)[take]).max() < 1e-4


def test_sine_regression_out_of_sample():
    op, theta = _circle_op(4000, seed=32)
    basis = eigendecompose(op, 20)
    est = fit_nystrom(basis, np.sin(theta), L=20)
    rng = np.random.default_rng(33)
    t_new = rng.uniform(0.0, 2.0 * np.pi, 500)
    pred = predict_nystrom(est, np.column_stack([np.cos(t_new), np.sin(t_new)]))
    rmse = np.sqrt(np.mean((pred - np.sin(t_new)) ** 2))
    assert rmse < 0.02


def test_eigenvalue_floor_drops_terms():
    op = _small_op(200, seed=34)
    basis = eigendecompose(op, 6)
    lam = basis.eigenvalues.copy()
    lam[-1] = 1e-12
    floored = EigenBasis(eigenvalues=lam, phi=basis.phi, weights=basis.weights, op=op)
    y = np.sin(op.points[:, 0])
    est = fit_nystrom(floored, y, L=6)
    query = op.points[:3] * 0.999
    with pytest.warns(RuntimeWarning):
        pred = predict_nystrom(est, query)
    trimmed = fit_nystrom(basis, y, L=5)
    assert np.allclose(pred, predict_nystrom(trimmed, query), atol=1e-10)


# ---------------------------------------------------------------------------
# kernel smoothing


def test_smoothing_constant_and_indicator():
    op = _small_op(120, seed=35)
    const = fit_kernel_smoothing(op, np.full(120, 2.5))
    assert np.allclose(smoothing_fitted(const), 2.5, atol=1e-10)
    e7 = np.zeros(120)
    e7[7] = 1.0
    est = fit_kernel_smoothing(op, e7)
    assert np.allclose(smoothing_fitted(est), op.P.toarray()[:, 7], atol=1e-14)


def test_smoothing_circle_bias():
    op, theta = _circle_op(4000, seed=36)
    est = fit_kernel_smoothing(op, np.cos(theta))
    assert np.abs(smoothing_fitted(est) - np.cos(theta)).max() < 0.05


def test_smoothing_out_of_sample():
    op, theta = _circle_op(4000, seed=37)
    est = fit_kernel_smoothing(op, np.sin(theta))
    rng = np.random.default_rng(38)
    t_new = rng.uniform(0.0, 2.0 * np.pi, 400)
    pred = predict_kernel_smoothing(est, np.column_stack([np.cos(t_new), np.sin(t_new)]))
    assert np.sqrt(np.mean((pred - np.sin(t_new)) ** 2)) < 0.05
    # prediction at a training point is the in-sample smoothed value
    at_train = predict_kernel_smoothing(est, op.points[:4])
    assert np.abs(at_train - smoothing_fitted(est)[:4]).max() < 1e-6


def test_smoothing_convexity():
    op, theta = _circle_op(1000, seed=39, knn=64)
    y = np.sin(theta)
    est = fit_kernel_smoothing(op, y)
    rng = np.random.default_rng(40)
    t_new = rng.uniform(0.0, 2.0 * np.pi, 100)
    pred = predict_kernel_smoothing(est, np.column_stack([np.cos(t_new), np.sin(t_new)]))
    assert pred.min() >= y.min() - 1e-12
    assert pred.max() <= y.max() + 1e-12


def test_smoothing_permutation_invariance():
    rng = np.random.default_rng(41)
    pts = rng.normal(size=(400, 2))
    y = np.tanh(pts[:, 0])
    queries = rng.normal(size=(30, 2)) * 0.8
    perm = rng.permutation(400)
    a = predict_kernel_smoothing(
        fit_kernel_smoothing(build_markov(pts, KernelParams(knn=32)), y), queries
    )
    b = predict_kernel_smoothing(
        fit_kernel_smoothing(build_markov(pts[perm], KernelParams(knn=32)), y[perm]),
        queries,
    )
    assert np.abs(a - b).max() < 1e-10


# ---------------------------------------------------------------------------
# estimator comparison on dynamics data


def test_nystrom_beats_smoothing_at_lead_zero():
    # the forecasting task with a scalar covariate (first component of a 5D
    # Gaussian initial condition): at lead 0 the response equals the covariate,
    # which the eigenbasis projection interpolates while the smoother keeps
    # its local-averaging bias
    rng = np.random.default_rng(42)
    train_ic = rng.normal(size=(500, 5))
    test_ic = np.random.default_rng(43).normal(size=(400, 5))
    x_train, x_test = train_ic[:, :1], test_ic[:, :1]
    op = build_markov(x_train, KernelParams(knn=64))
    basis = eigendecompose(op, 60)
    y = x_train[:, 0]
    ny = predict_nystrom(fit_nystrom(basis, y, L=60), x_test)
    sm = predict_kernel_smoothing(fit_kernel_smoothing(op, y), x_test)
    truth = x_test[:, 0]
    rmse_ny = np.sqrt(np.mean((ny - truth) ** 2))
    rmse_sm = np.sqrt(np.mean((sm - truth) ** 2))
    assert rmse_ny < rmse_sm
    assert rmse_ny < 0.01


# ---------------------------------------------------------------------------
# RMSE curves


def test_rmse_curve_basics():
    pred = np.zeros((3, 10, 2))
    truth = np.zeros((3, 10, 2))
    assert np.allclose(rmse_curve(pred, truth), 0.0)
    assert np.allclose(rmse_curve(pred + 0.25, truth), 0.25)
    with pytest.raises(InvalidInputError):
        rmse_curve(np.zeros((3, 10)), np.zeros((3, 9)))


def test_rmse_curve_hand_case():
    pred = np.array([[[1.0, 2.0], [3.0, 4.0]]])  # one lead, two points, r=2
    truth = np.array([[[0.0, 2.0], [3.0, 2.0]]])
    expected = np.sqrt((1.0 + 0.0 + 0.0 + 4.0) / 4.0)
    assert np.allclose(rmse_curve(pred, truth), [expected])

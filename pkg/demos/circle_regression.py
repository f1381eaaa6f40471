#!/usr/bin/env python3
"""Regression on a noisy circle, the smallest end-to-end kernel example.

Points are sampled non-uniformly on the unit circle, the response is a smooth
function of angle, and we recover it two ways: by projecting onto the Markov
operator's eigenfunctions (Nystrom) and by applying the operator directly to
the responses (kernel smoothing).  Both are then evaluated off-sample.

Two things to watch.  Smoothing error keeps dropping as N grows even though
the sampling density varies by an order of magnitude, because the bandwidth
adapts per point.  The projected estimator tracks it only while the basis is
rich enough for the tuned bandwidth; with L fixed at 30 and epsilon shrinking,
its error bottoms out and turns back up.  That is the bias-variance knob the
forecasting experiments tune with L.
"""

import numpy as np

from kaf.estimators import (
    eigendecompose,
    fit_kernel_smoothing,
    fit_nystrom,
    predict_kernel_smoothing,
    predict_nystrom,
)
from kaf.kernel import KernelParams, build_markov


def lopsided_angles(n, rng):
    # beta-distributed angles: dense near 0, sparse near pi
    return 2.0 * np.pi * rng.beta(0.7, 1.8, size=n)


def target(theta):
    return np.sin(theta) + 0.5 * np.cos(3.0 * theta)


def run(n, rng):
    theta = lopsided_angles(n, rng)
    points = np.column_stack([np.cos(theta), np.sin(theta)])
    y = target(theta)

    op = build_markov(points, KernelParams(knn=64))
    basis = eigendecompose(op, L=30)

    theta_new = np.linspace(0.0, 2.0 * np.pi, 400, endpoint=False)
    new_points = np.column_stack([np.cos(theta_new), np.sin(theta_new)])
    truth = target(theta_new)

    nys = predict_nystrom(fit_nystrom(basis, y), new_points)
    smo = predict_kernel_smoothing(fit_kernel_smoothing(op, y), new_points)
    err = lambda pred: float(np.sqrt(np.mean((pred - truth) ** 2)))
    return err(nys), err(smo), op.params.epsilon


def main():
    rng = np.random.default_rng(2024)
    print("noisy-circle regression, off-sample RMSE")
    print(f"{'N':>6}  {'nystrom':>9}  {'smoothing':>9}  {'epsilon':>9}")
    for n in (250, 500, 1000, 2000, 4000):
        e_nys, e_smo, eps = run(n, rng)
        print(f"{n:>6}  {e_nys:>9.5f}  {e_smo:>9.5f}  {eps:>9.2e}")
    print()
    print("smoothing shrinks monotonically; nystrom at fixed L=30 stalls once")
    print("the auto-tuned epsilon outruns the basis resolution.")


if __name__ == "__main__":
    main()

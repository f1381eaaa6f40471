#!/usr/bin/env python3
"""Forecasting the Lorenz 63 x-component from its own delay history.

A single scalar observable of a chaotic flow carries enough information to
forecast itself, provided the covariate is a window of lagged values rather
than the instantaneous value.  This script trains both estimators on delay
windows of the x-component and prints RMSE against the true trajectory at a
few lead times, once with no history (m=1) and once with m=8 lags.

Sizes are kept small so this runs in well under a minute; the bundled
experiment configs are the full-size version of the same computation.
"""

import numpy as np

from kaf.dynamics import flow, lorenz63_spec, sample_invariant
from kaf.embedding import DelayEmbedding, delay_embed
from kaf.estimators import eigendecompose, fit_nystrom, nystrom_apply
from kaf.kernel import KernelParams, build_markov, extend_rows

SEED = 7
N_TRAIN = 3000
N_OUT = 500
LEADS = [2, 5, 10, 20]  # in observation steps of 0.1 time units
M_VALUES = [1, 8]
L = 60


def observable_matrix(spec, n_ic, n_steps, rng):
    """x-component time series, one row per initial condition."""
    states = sample_invariant(spec, n_ic, rng)
    path = flow(spec, states, n_steps)  # (n_steps, n_ic, 3)
    return path[:, :, 0].T


def main():
    spec = lorenz63_spec(obs_dt=0.1)
    rng = np.random.default_rng(SEED)
    span = max(M_VALUES) - 1
    n_steps = span + max(LEADS) + 1

    train = observable_matrix(spec, N_TRAIN, n_steps, rng)
    out = observable_matrix(spec, N_OUT, n_steps, rng)
    clim = float(np.std(train))
    print(f"climatological std of x: {clim:.3f}")
    print(f"{'m':>3} {'estimator':>10}  " + "  ".join(f"t={l / 10:.1f}" for l in LEADS))

    for m in M_VALUES:
        emb = DelayEmbedding(m=m, stride=1)
        # align every m at the same present time so targets agree
        x_tr = np.stack([delay_embed(row, emb)[span - (m - 1)] for row in train])
        x_out = np.stack([delay_embed(row, emb)[span - (m - 1)] for row in out])
        y_tr = train[:, [span + l for l in LEADS]]
        y_out = out[:, [span + l for l in LEADS]]

        op = build_markov(x_tr, KernelParams(knn=128))
        ext = extend_rows(op, x_out)
        basis = eigendecompose(op, L=L)

        preds = {
            "nystrom": nystrom_apply(fit_nystrom(basis, y_tr), ext),
            "smoothing": ext @ y_tr,
        }
        for name, pred in preds.items():
            errs = np.sqrt(np.mean((pred - y_out) ** 2, axis=0))
            cells = "  ".join(f"{e:5.3f}" for e in errs)
            print(f"{m:>3} {name:>10}  {cells}")

    print()
    print("m=8 should beat m=1 at every lead; both estimators converge to the")
    print(f"climatological std {clim:.2f} as the lead grows past predictability.")


if __name__ == "__main__":
    main()

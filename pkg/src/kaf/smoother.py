"""Nonparametric denoising of a single observed component.

The smoother estimates the clean value at position k of a sliding length-m_s
window of noisy observations.  It is trained entirely on noisy data: windows
of the noisy training series are the covariates, the noisy value at position k
is the response, and the conditional expectation is fitted with the eigenbasis
projection.  Averaging against many noisy windows cancels the noise in the
coefficients, so the fitted function lands near the clean conditional mean.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalError
from .estimators import eigendecompose, fit_nystrom, nystrom_apply
from .embedding import DelayEmbedding, delay_embed
from .kernel import KernelParams, build_markov, extend_rows

__all__ = [
    "SmootherModel",
    "DenoisedSequence",
    "fit_smoother",
    "fit_smoother_family",
    "denoise_sequence",
    "smoother_rmse",
]


@dataclass
class SmootherModel:
    m_s: int  # window length
    k: int  # target position within the window, 1-based
    L: int
    estimator: object  # NystromEstimator over window covariates

    @property
    def op(self):
        return self.estimator.op


@dataclass
class DenoisedSequence:
    """Estimates aligned to the input sequence.

    values[i] estimates the clean value at input index first_index + i; a
    length-T input covers indices k-1 .. T-1-(m_s-k) (0-based), the rest have
    no full window around them.  failed flags windows with no kernel support.
    """

    values: np.ndarray
    first_index: int
    m_s: int
    k: int
    failed: np.ndarray

    def __len__(self):
        return self.values.shape[0]

    @property
    def covered(self):
        """Half-open index range of the input this sequence estimates."""
        return self.first_index, self.first_index + len(self)


def _window_responses(series, m_s, k):
    n_windows = series.shape[0] - m_s + 1
    return series[k - 1 : k - 1 + n_windows]


def _validate(series, m_s, k):
    series = np.asarray(series, dtype=float)
    if not 1 <= k <= m_s:
        raise InvalidInputError(f"k={k} outside window of length {m_s}")
    if series.shape[0] < m_s:
        raise InvalidInputError(
            f"series of length {series.shape[0]} shorter than window {m_s}"
        )
    return series


def fit_smoother(noisy_series, m_s, k, L, params=None, density=None):
    """Train the denoiser on a noisy series.

    Windows (z_i, ..., z_{i+m_s-1}) of the noisy series are the covariates;
    the response is the window's own noisy value at position k.  L is the
    eigenbasis truncation.
    """
    models = fit_smoother_family(noisy_series, m_s, [k], L, params, density)
    return models[k]


def fit_smoother_family(noisy_series, m_s, ks, L, params=None, density=None):
    """Fit smoothers for several target positions over one shared basis.

    The covariate windows (hence kernel and eigenbasis) do not depend on k;
    only the response column shifts.  Returns {k: SmootherModel}.
    """
    series = _validate(noisy_series, m_s, max(ks))
    for k in ks:
        if not 1 <= k <= m_s:
            raise InvalidInputError(f"k={k} outside window of length {m_s}")
    windows = delay_embed(series, DelayEmbedding(m_s))
    op = build_markov(windows, params or KernelParams(), density=density)
    basis = eigendecompose(op, L)
    models = {}
    for k in ks:
        est = fit_nystrom(basis, _window_responses(series, m_s, k), L)
        models[k] = SmootherModel(m_s=m_s, k=k, L=L, estimator=est)
    return models


def denoise_sequence(model, noisy_out):
    """Slide the smoother along an out-of-sample noisy sequence.

    Windows without kernel support are flagged in the result and carry NaN
    estimates rather than aborting the sweep.
    """
    series = _validate(noisy_out, model.m_s, model.k)
    windows = delay_embed(series, DelayEmbedding(model.m_s))
    ext, empty = extend_rows(model.op, windows, on_empty="mask")
    values = nystrom_apply(model.estimator, ext)
    if empty.any():
        values[empty] = np.nan
    return DenoisedSequence(
        values=values,
        first_index=model.k - 1,
        m_s=model.m_s,
        k=model.k,
        failed=empty,
    )


def smoother_rmse(estimates, truth, covered=None):
    """RMSE against the clean series over the covered index range only.

    estimates: DenoisedSequence, or a plain array with covered=(start, stop)
    giving the half-open index range it occupies in truth.
    """
    if isinstance(estimates, DenoisedSequence):
        covered = estimates.covered
        values = estimates.values
    else:
        if covered is None:
            raise InvalidInputError("plain-array estimates need covered=(start, stop)")
        values = np.asarray(estimates, dtype=float)
    start, stop = covered
    truth = np.asarray(truth, dtype=float)
    if not 0 <= start < stop <= truth.shape[0]:
        raise InvalidInputError(f"covered range {covered} empty or outside truth")
    if stop - start != values.shape[0]:
        raise InvalidInputError("estimate length does not match covered range")
    diff = values - truth[start:stop]
    if np.any(np.isnan(diff)):
        raise NumericalError("estimates contain failed (NaN) windows")
    return float(np.sqrt(np.mean(diff**2)))

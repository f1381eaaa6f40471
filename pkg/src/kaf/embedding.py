"""Delay-coordinate covariates and lead-time response targets."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = ["DelayEmbedding", "TrainingPairs", "delay_embed", "build_training_pairs"]


@dataclass(frozen=True)
class DelayEmbedding:
    """Window of m lagged samples, `stride` samples apart, oldest to newest."""

    m: int
    stride: int = 1

    def __post_init__(self):
        if self.m < 1 or self.stride < 1:
            raise InvalidInputError("need m >= 1 and stride >= 1")

    @property
    def span(self):
        # number of raw samples covered by one window
        return (self.m - 1) * self.stride + 1


@dataclass
class TrainingPairs:
    covariates: np.ndarray
    responses: np.ndarray
    lead_times: list


def _as_2d(series):
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    if series.ndim != 2:
        raise InvalidInputError("series must be 1-D or (T, obs_dim)")
    return series


def delay_embed(series, emb):
    """Embed a series into delay windows.

    Parameters
    ----------
    series : (T,) or (T, obs_dim) array
    emb : DelayEmbedding

    Returns
    -------
    (T - (m-1)*stride, m*obs_dim) array; row j concatenates samples
    j, j+stride, ..., j+(m-1)*stride, so the last block is the present.
    """
    series = _as_2d(series)
    T, obs_dim = series.shape
    if T < emb.span:
        raise InvalidInputError(f"series length {T} < window span {emb.span}")
    n_rows = T - (emb.m - 1) * emb.stride
    out = np.empty((n_rows, emb.m * obs_dim))
    for lag in range(emb.m):
        start = lag * emb.stride
        out[:, lag * obs_dim : (lag + 1) * obs_dim] = series[start : start + n_rows]
    return out


def build_training_pairs(series, emb, lead_times):
    """Aligned (delay window -> future values) pairs from one or more series.

    Parameters
    ----------
    series : one array or a sequence of arrays; windows never cross array
        boundaries
    emb : DelayEmbedding
    lead_times : integer sample offsets from the present (last) lag

    Returns
    -------
    TrainingPairs with responses of shape (N, n_leads*obs_dim), lead-major.
    """
    lead_times = [int(t) for t in lead_times]
    if not lead_times or min(lead_times) < 0:
        raise InvalidInputError("lead_times must be non-negative integers")
    if isinstance(series, np.ndarray) or np.ndim(series[0]) == 0:
        series = [series]
    cov_parts, resp_parts = [], []
    max_lead = max(lead_times)
    for s in series:
        s = _as_2d(s)
        T, obs_dim = s.shape
        n_rows = T - (emb.m - 1) * emb.stride - max_lead
        if n_rows < 1:
            continue
        windows = delay_embed(s, emb)[:n_rows]
        present = (emb.m - 1) * emb.stride
        resp = np.concatenate(
            [s[present + lead : present + lead + n_rows] for lead in lead_times], axis=1
        )
        cov_parts.append(windows)
        resp_parts.append(resp)
    if not cov_parts:
        raise InvalidInputError("no complete covariate/response pair fits the series")
    return TrainingPairs(
        covariates=np.concatenate(cov_parts, axis=0),
        responses=np.concatenate(resp_parts, axis=0),
        lead_times=lead_times,
    )

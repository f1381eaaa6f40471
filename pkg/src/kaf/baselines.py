"""Stochastic ensemble Kalman filter benchmark.

Perturbed-observation EnKF with multiplicative inflation on the forecast
anomalies and a component-selection observation operator.  Members are
propagated through the true model between analysis steps; the filter assumes
no process noise and applies no covariance localization.  Used as the
sequential-assimilation baseline for the denoising comparisons.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import SystemSpec, propagate
from .errors import DivergenceError, InvalidInputError

__all__ = ["EnkfConfig", "enkf_run"]


@dataclass(frozen=True)
class EnkfConfig:
    spec: SystemSpec
    observed_components: tuple
    obs_noise_var: float
    ensemble_size: int = 64
    inflation: float = 1.02

    def __post_init__(self):
        if self.ensemble_size < 2:
            raise InvalidInputError("need at least 2 ensemble members")
        if len(self.observed_components) == 0:
            raise InvalidInputError("observed component set is empty")
        if self.inflation < 1.0:
            raise InvalidInputError("inflation must be >= 1")
        if self.obs_noise_var < 0:
            raise InvalidInputError("observation noise variance must be >= 0")


def enkf_run(cfg, noisy_obs, x0_ensemble, rng):
    """Filter a sequence of noisy partial observations.

    noisy_obs: (T, n_obs) observations of cfg.observed_components at the
    spec's observation spacing; x0_ensemble: (E, dim) prior ensemble valid at
    the first observation time.  Returns the (T, dim) analysis mean sequence.

    Raises DivergenceError (with the offending step) when the innovation
    covariance becomes numerically singular, which is how ensemble collapse
    shows up.
    """
    obs = np.atleast_2d(np.asarray(noisy_obs, dtype=float))
    obs_idx = np.asarray(cfg.observed_components, dtype=int)
    if obs.shape[1] != obs_idx.shape[0]:
        raise InvalidInputError(
            f"observations have {obs.shape[1]} columns, config observes "
            f"{obs_idx.shape[0]} components"
        )
    members = np.array(x0_ensemble, dtype=float)
    n_members, dim = members.shape
    if n_members != cfg.ensemble_size:
        raise InvalidInputError(
            f"x0_ensemble has {n_members} members, config says {cfg.ensemble_size}"
        )
    n_steps = obs.shape[0]
    r_diag = np.full(obs_idx.shape[0], float(cfg.obs_noise_var))
    means = np.empty((n_steps, dim))
    for t in range(n_steps):
        if t > 0:
            members = propagate(cfg.spec, members, 1)
        mean = members.mean(axis=0)
        members = mean + cfg.inflation * (members - mean)
        anomalies = members - mean
        obs_anomalies = anomalies[:, obs_idx]
        innov_cov = (obs_anomalies.T @ obs_anomalies) / (n_members - 1)
        cross_cov = (anomalies.T @ obs_anomalies) / (n_members - 1)
        innov_cov = innov_cov + np.diag(r_diag)
        if np.linalg.cond(innov_cov) > 1e12:
            raise DivergenceError(
                f"innovation covariance singular at step {t}", step=t
            )
        gain = cross_cov @ np.linalg.inv(innov_cov)
        perturbed = obs[t] + rng.normal(0.0, np.sqrt(r_diag), size=(n_members, obs_idx.shape[0]))
        members = members + (perturbed - members[:, obs_idx]) @ gain.T
        means[t] = members.mean(axis=0)
    return means

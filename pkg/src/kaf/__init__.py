"""Kernel analog forecasting: data-driven conditional-expectation estimators,
a window smoother for denoising, and the experiment harness around them.

The workflow reads bottom-up: generate trajectories (`dynamics`), embed
observations into delay windows (`embedding`), build the variable-bandwidth
Markov operator (`kernel`), then either project responses onto its eigenbasis
(`estimators.fit_nystrom`) or average them directly
(`estimators.fit_kernel_smoothing`).  `smoother` turns the same machinery into
a sliding-window denoiser, `baselines` holds the ensemble Kalman filter it is
scored against, and `harness` runs whole experiments into reproducible
bundles.
"""

__version__ = "0.1.0"

# harness reads __version__ at import time, so it must be bound first
from .baselines import EnkfConfig, enkf_run
from .dynamics import (
    NoiseModel,
    SystemSpec,
    Trajectory,
    apply_noise,
    flow,
    hamiltonian16_spec,
    hmc_sample,
    integrate,
    lorenz63_spec,
    lorenz96_spec,
    mc_conditional_expectation,
    propagate,
    sample_invariant,
)
from .embedding import DelayEmbedding, build_training_pairs, delay_embed
from .errors import (
    DegenerateGeometryError,
    InvalidInputError,
    KafError,
    NumericalError,
    OutOfSupportError,
    TuningFailureError,
)
from .estimators import (
    EigenBasis,
    NystromEstimator,
    SmoothingEstimator,
    eigendecompose,
    fit_kernel_smoothing,
    fit_nystrom,
    predict_kernel_smoothing,
    predict_nystrom,
    rmse_curve,
)
from .harness import (
    bundle_fingerprint,
    compare_runs,
    emit_tables,
    list_bundled_configs,
    load_config,
    run_experiment,
)
from .kernel import (
    KernelParams,
    MarkovOperator,
    build_markov,
    estimate_density,
    extend_rows,
)
from .smoother import denoise_sequence, fit_smoother, fit_smoother_family

__all__ = [
    "DegenerateGeometryError",
    "DelayEmbedding",
    "EigenBasis",
    "EnkfConfig",
    "InvalidInputError",
    "KafError",
    "KernelParams",
    "MarkovOperator",
    "NoiseModel",
    "NumericalError",
    "NystromEstimator",
    "OutOfSupportError",
    "SmoothingEstimator",
    "SystemSpec",
    "Trajectory",
    "TuningFailureError",
    "apply_noise",
    "build_markov",
    "build_training_pairs",
    "bundle_fingerprint",
    "compare_runs",
    "delay_embed",
    "denoise_sequence",
    "eigendecompose",
    "emit_tables",
    "enkf_run",
    "estimate_density",
    "extend_rows",
    "fit_kernel_smoothing",
    "fit_nystrom",
    "fit_smoother",
    "fit_smoother_family",
    "flow",
    "hamiltonian16_spec",
    "hmc_sample",
    "integrate",
    "list_bundled_configs",
    "load_config",
    "lorenz63_spec",
    "lorenz96_spec",
    "mc_conditional_expectation",
    "predict_kernel_smoothing",
    "predict_nystrom",
    "propagate",
    "rmse_curve",
    "run_experiment",
    "sample_invariant",
    "__version__",
]

"""Conditional-expectation estimators over a Markov kernel.

Two routes with the same training interface:

* Nystrom eigenbasis projection: expand the response in the leading
  eigenfunctions of the Markov operator, evaluate out of sample through the
  kernel extension divided by the eigenvalue.  Interpolates the training data
  as the basis fills out.
* Markov kernel smoothing: push the raw response table through one application
  of the (extended) row-stochastic operator.  A local average; never an
  interpolant, but immune to eigenbasis truncation error.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
from scipy.linalg import eigh

from .errors import InvalidInputError, NumericalError
from .kernel import MarkovOperator, extend_rows

__all__ = [
    "EigenBasis",
    "NystromEstimator",
    "SmoothingEstimator",
    "eigendecompose",
    "fit_nystrom",
    "nystrom_fitted",
    "nystrom_apply",
    "predict_nystrom",
    "fit_kernel_smoothing",
    "smoothing_fitted",
    "predict_kernel_smoothing",
    "rmse_curve",
]

EIGENVALUE_FLOOR = 1e-8  # relative to the leading eigenvalue
DENSE_CUTOFF = 600  # below this N a dense solve beats ARPACK


@dataclass
class EigenBasis:
    """Leading eigenpairs of the Markov operator.

    phi columns are right eigenvectors of P, orthonormalized in the empirical
    inner product weighted by the stationary weights pi (the normalized row
    sums of the symmetric kernel, which make the operator self-adjoint).  The
    leading column is the constant function with eigenvalue 1.
    """

    eigenvalues: np.ndarray  # (L+1,) descending
    phi: np.ndarray  # (N, L+1)
    weights: np.ndarray  # (N,) stationary weights, sum 1
    op: MarkovOperator

    @property
    def size(self):
        return self.eigenvalues.shape[0]

    def inner(self, f, g):
        """Weighted empirical inner product in which phi is orthonormal."""
        return (self.weights * f) @ g


def eigendecompose(op, L, method="auto"):
    """Leading L+1 eigenpairs of the Markov operator P.

    Solves the symmetric eigenproblem for D^(1/2) P D^(-1/2) (D the left
    normalizer), converts back to right eigenvectors of P, and orthonormalizes
    them in the stationary-weighted empirical product.  Sorted by descending
    eigenvalue; sign fixed by making each vector's largest-magnitude entry
    positive.

    method: "auto" picks dense for small problems or near-complete bases,
    otherwise ARPACK with a fixed start vector for determinism.
    """
    n = op.n
    k = L + 1
    if not 1 <= k <= n:
        raise InvalidInputError(f"need 0 <= L <= N-1, got L={L}, N={n}")
    d_sqrt = np.sqrt(op.left_norm)
    s_hat = sparse.diags(d_sqrt) @ op.P @ sparse.diags(1.0 / d_sqrt)
    s_hat = (s_hat + s_hat.T) * 0.5  # exact symmetry for the solver
    if method == "auto":
        method = "dense" if (n <= DENSE_CUTOFF or k >= n - 1) else "arpack"
    if method == "dense":
        lam, vec = eigh(s_hat.toarray())
        lam, vec = lam[-k:], vec[:, -k:]
    elif method == "arpack":
        try:
            lam, vec = spla.eigsh(s_hat, k=k, which="LA", v0=d_sqrt)
        except spla.ArpackNoConvergence as exc:
            raise NumericalError(
                f"eigensolver did not converge: {len(exc.eigenvalues)} of {k} "
                f"eigenvalues found"
            ) from exc
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    order = np.argsort(-lam, kind="stable")
    lam, vec = lam[order], vec[:, order]
    if abs(lam[0] - 1.0) > 1e-8:
        raise NumericalError(f"leading eigenvalue {lam[0]!r} is not 1")
    lam[0] = min(lam[0], 1.0)
    phi = vec * (np.sqrt(d_sqrt @ d_sqrt) / d_sqrt)[:, None]
    if np.ptp(phi[:, 0]) < 1e-6:
        phi[:, 0] = np.sign(phi[:, 0].mean())  # structurally constant
    flip = phi[np.abs(phi).argmax(axis=0), np.arange(k)] < 0
    phi[:, flip] *= -1.0
    weights = op.left_norm / op.left_norm.sum()
    return EigenBasis(eigenvalues=lam, phi=phi, weights=weights, op=op)


@dataclass
class NystromEstimator:
    basis: EigenBasis
    coefficients: np.ndarray  # (L+1, r)
    L: int
    single: bool  # responses were 1-D; predictions squeeze back

    @property
    def op(self):
        return self.basis.op


def _as_columns(responses, n):
    y = np.asarray(responses, dtype=float)
    single = y.ndim == 1
    y = y[:, None] if single else y
    if y.shape[0] != n:
        raise InvalidInputError(
            f"responses have {y.shape[0]} rows, training set has {n}"
        )
    return y, single


def fit_nystrom(basis, responses, L=None):
    """Project responses on the leading eigenfunctions.

    Coefficients are taken in the weighted empirical product, so the in-sample
    fit is the orthogonal projection of the response onto span(phi_0..phi_L).
    """
    L = basis.size - 1 if L is None else L
    if not 0 <= L <= basis.size - 1:
        raise InvalidInputError(f"L={L} outside the {basis.size}-vector basis")
    y, single = _as_columns(responses, basis.phi.shape[0])
    phi = basis.phi[:, : L + 1]
    coef = phi.T @ (basis.weights[:, None] * y)
    return NystromEstimator(basis=basis, coefficients=coef, L=L, single=single)


def nystrom_fitted(est):
    """In-sample fitted values (the projection itself)."""
    out = est.basis.phi[:, : est.L + 1] @ est.coefficients
    return out[:, 0] if est.single else out


def nystrom_apply(est, ext):
    """Evaluate the estimator on precomputed extension rows.

    Each eigenfunction extends as (extension row . phi_j) / lambda_j; terms
    with eigenvalues below the floor amplify extension noise unboundedly and
    are dropped with a warning.
    """
    basis = est.basis
    lam = basis.eigenvalues[: est.L + 1]
    keep = lam >= EIGENVALUE_FLOOR * lam[0]
    if not np.all(keep):
        warnings.warn(
            f"dropping {int((~keep).sum())} eigenfunction(s) below the "
            f"eigenvalue floor",
            RuntimeWarning,
            stacklevel=2,
        )
    psi = (ext @ basis.phi[:, : est.L + 1][:, keep]) / lam[keep]
    out = psi @ est.coefficients[keep]
    return out[:, 0] if est.single else out


def predict_nystrom(est, new_points):
    """Out-of-sample evaluation through the kernel extension."""
    return nystrom_apply(est, extend_rows(est.basis.op, new_points))


@dataclass
class SmoothingEstimator:
    op: MarkovOperator
    responses: np.ndarray  # (N, r)
    single: bool


def fit_kernel_smoothing(op, responses):
    y, single = _as_columns(responses, op.n)
    return SmoothingEstimator(op=op, responses=y, single=single)


def smoothing_fitted(est):
    """In-sample smoothed values P . responses."""
    out = est.op.P @ est.responses
    return out[:, 0] if est.single else out


def predict_kernel_smoothing(est, new_points):
    """Local average of training responses under the extended kernel row."""
    out = extend_rows(est.op, new_points) @ est.responses
    return out[:, 0] if est.single else out


def rmse_curve(predictions, truth):
    """Per-lead root mean square error.

    Both arguments are stacked per-lead arrays whose first axis indexes the
    lead time; the RMSE pools every remaining axis.
    """
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape:
        raise InvalidInputError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.ndim < 2:
        raise InvalidInputError("expected at least (n_leads, M) arrays")
    axes = tuple(range(1, p.ndim))
    return np.sqrt(np.mean((p - t) ** 2, axis=axes))

"""Variable-bandwidth Markov kernel: density estimation, tuning, normalization.

The construction follows the variable-bandwidth diffusion-maps recipe.  With a
per-point bandwidth function rho the base kernel is

    S_eps(x, y) = eps^(-d/2) exp(-|x - y|^2 / (eps rho(x) rho(y))),

restricted to a symmetrized k-nearest-neighbor support.  A kernel density
estimate q_eps(x_i) = sum_j S_eps(x_i, x_j) / rho(x_i)^d feeds the
right-normalization S_eps / (q_eps^alpha q_eps^alpha), and left-normalizing by
the row sums q_{eps,alpha} yields the row-stochastic Markov matrix P.  The
defaults alpha = -d/4 and rho = q_eps^(-1/2) (two-pass: a pilot rho from kNN
distances, then one update) match the variable-bandwidth construction used
throughout the experiments.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sparse
from sklearn.neighbors import NearestNeighbors

from .errors import (
    DegenerateGeometryError,
    InvalidInputError,
    NumericalError,
    OutOfSupportError,
    TuningFailureError,
)
from .io import load_container, save_container

__all__ = [
    "KernelParams",
    "DensityEstimate",
    "KnnGraph",
    "MarkovOperator",
    "knn_graph",
    "uniform_density",
    "estimate_density",
    "auto_tune_bandwidth",
    "build_markov",
    "extend_rows",
    "save_operator",
    "load_operator",
]

EPS_GRID = 2.0 ** np.arange(-30, 11)
PILOT_NEIGHBORS = 32


@dataclass(frozen=True)
class KernelParams:
    """Kernel hyperparameters; None means "resolve automatically".

    epsilon: bandwidth (None -> slope-maximizing auto-tuner)
    alpha: normalization exponent (None -> -d/4)
    d: intrinsic dimension (None -> rounded auto-tuner estimate, at least 1)
    knn: neighbor count for sparsification (clipped to N)
    """

    epsilon: float = None
    alpha: float = None
    d: int = None
    knn: int = 128

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon <= 0:
            raise InvalidInputError("epsilon must be positive")
        if self.d is not None and self.d < 1:
            raise InvalidInputError("d must be >= 1")
        if self.knn < 2:
            raise InvalidInputError("knn must be >= 2")


@dataclass
class KnnGraph:
    """Per-row kNN squared distances plus the union-symmetrized support."""

    idx: np.ndarray  # (N, knn) neighbor indices, ascending distance, self included
    sq: np.ndarray  # (N, knn) squared distances
    sym: sparse.csr_matrix  # union support; data = squared distance (explicit zeros)

    @property
    def n(self):
        return self.idx.shape[0]

    @property
    def knn(self):
        return self.idx.shape[1]


@dataclass
class DensityEstimate:
    """Two-pass variable-bandwidth density estimate.

    q is the kernel density at the final tuned epsilon, rho the bandwidth
    function q_pilot^(-1/2) normalized to mean 1.  The pilot fields are kept so
    the same two-pass rule can be replayed against training points for
    out-of-sample queries; manually built estimates (tests, fixed-bandwidth
    fixtures) may leave them None, in which case extension reuses the nearest
    training point's rho.
    """

    q: np.ndarray
    rho: np.ndarray
    d: int = 1
    epsilon: float = None
    d_hat: float = None
    pilot_epsilon: float = None
    pilot_rho: np.ndarray = None
    rho_scale: float = 1.0


def uniform_density(n, d=1):
    """Fixed unit-bandwidth density for test fixtures and degenerate inputs."""
    ones = np.ones(n)
    return DensityEstimate(q=ones, rho=ones, d=d)


def knn_graph(points, knn):
    """Squared-distance kNN structure, self included, union-symmetrized."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if knn > n:
        raise InvalidInputError(f"knn={knn} exceeds N={n}")
    if knn < 2:
        raise InvalidInputError("knn must be >= 2")
    nn = NearestNeighbors(n_neighbors=knn).fit(points)
    dist, idx = nn.kneighbors(points)
    sq = dist.astype(float) ** 2
    rows = np.repeat(np.arange(n), knn)
    # +1 shift keeps zero distances as stored entries through the union
    a = sparse.coo_matrix((sq.ravel() + 1.0, (rows, idx.ravel())), shape=(n, n)).tocsr()
    sym = a.maximum(a.T)
    sym.sort_indices()
    sym.data -= 1.0
    return KnnGraph(idx=idx, sq=sq, sym=sym)


def _log_kernel_sums(scaled):
    """log sum exp(-u/eps) over the bandwidth grid for scaled distances u."""
    out = np.empty(EPS_GRID.shape[0])
    for i, eps in enumerate(EPS_GRID):
        out[i] = np.log(np.exp(-scaled / eps).sum())
    return out


def _tune(scaled):
    """Maximize the log-log slope of the kernel sum; returns (epsilon, d_hat)."""
    log_t = _log_kernel_sums(scaled)
    slope = (log_t[2:] - log_t[:-2]) / (2.0 * np.log(2.0))
    best = int(np.argmax(slope))
    if best in (0, slope.shape[0] - 1) or slope[best] <= 1e-3:
        raise TuningFailureError("bandwidth sweep found no interior slope maximum")
    return float(EPS_GRID[best + 1]), float(2.0 * slope[best])


def auto_tune_bandwidth(points, rho, d=None, knn=128, full_output=False):
    """Tune the kernel bandwidth for given points and bandwidth function rho.

    Sweeps eps over the log2 grid 2^-30..2^10, computing the kNN-restricted
    kernel sum T(eps) = sum_ij exp(-|x_i-x_j|^2/(eps rho_i rho_j)), and returns
    the eps maximizing the slope a(eps) = d log T / d log eps.  The maximal
    slope also estimates the intrinsic dimension, d_hat = 2 a_max, returned
    when full_output is set.  (The d argument is accepted for interface
    symmetry; the argmax does not depend on it.)
    """
    points = np.asarray(points, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise InvalidInputError("rho must be positive")
    graph = knn_graph(points, min(knn, points.shape[0]))
    scaled = graph.sq / (rho[:, None] * rho[graph.idx])
    epsilon, d_hat = _tune(scaled.ravel())
    return (epsilon, d_hat) if full_output else epsilon


def _knn_density(sq, idx, rho, epsilon, d):
    """q(x_i) = sum_j S_eps(x_i, x_j) / rho_i^d over the plain kNN rows."""
    u = sq / (epsilon * rho[:, None] * rho[idx])
    q = epsilon ** (-d / 2.0) * np.exp(-u).sum(axis=1) / rho**d
    if not np.all(np.isfinite(q)):
        raise NumericalError("non-finite density estimate")
    if np.any(q <= 0):
        raise DegenerateGeometryError("zero kernel density at some points")
    return q


def estimate_density(points, knn=128, d=None, graph=None):
    """Two-pass density/bandwidth estimate used by the Markov construction.

    Pass 1: pilot rho from the RMS distance to the nearest PILOT_NEIGHBORS
    training points, bandwidth tuned, kernel density q evaluated.  Pass 2:
    rho := q^(-1/2) (normalized to mean 1), bandwidth re-tuned, q re-evaluated.
    When d is None it is set from the pilot-pass slope estimate.
    """
    points = np.asarray(points, dtype=float)
    if graph is None:
        graph = knn_graph(points, min(knn, points.shape[0]))
    if graph.sq.max() == 0.0:
        raise DegenerateGeometryError("all points coincide")
    k0 = min(PILOT_NEIGHBORS, graph.knn)
    pilot_rho = np.sqrt(np.mean(graph.sq[:, :k0], axis=1))
    if np.any(pilot_rho <= 0):
        raise DegenerateGeometryError(
            "a point has zero distance to all its pilot neighbors"
        )
    scaled = graph.sq / (pilot_rho[:, None] * pilot_rho[graph.idx])
    pilot_epsilon, pilot_d_hat = _tune(scaled.ravel())
    if d is None:
        d = max(1, int(round(pilot_d_hat)))
    q_pilot = _knn_density(graph.sq, graph.idx, pilot_rho, pilot_epsilon, d)
    rho_raw = q_pilot ** (-0.5)
    rho_scale = float(rho_raw.mean())
    rho = rho_raw / rho_scale
    scaled = graph.sq / (rho[:, None] * rho[graph.idx])
    epsilon, d_hat = _tune(scaled.ravel())
    q = _knn_density(graph.sq, graph.idx, rho, epsilon, d)
    return DensityEstimate(
        q=q,
        rho=rho,
        d=int(d),
        epsilon=epsilon,
        d_hat=d_hat,
        pilot_epsilon=pilot_epsilon,
        pilot_rho=pilot_rho,
        rho_scale=rho_scale,
    )


@dataclass
class MarkovOperator:
    """Row-stochastic VBDM operator with everything needed to extend rows."""

    P: sparse.csr_matrix
    points: np.ndarray
    params: KernelParams  # fully resolved (no None fields)
    density: DensityEstimate
    q_eps: np.ndarray  # kernel density at the resolved epsilon
    right_norm: np.ndarray  # q_eps^alpha
    left_norm: np.ndarray  # row sums of the right-normalized kernel

    _nn_index = None

    @property
    def n(self):
        return self.P.shape[0]

    def nn_index(self):
        if self._nn_index is None:
            self._nn_index = NearestNeighbors(n_neighbors=self.params.knn).fit(self.points)
        return self._nn_index


def build_markov(points, params=None, density=None, graph=None):
    """Construct the Markov operator from training points.

    Parameters
    ----------
    points : (N, p) array
    params : KernelParams; None fields are resolved here
    density : optional DensityEstimate override (tests, custom bandwidths)
    graph : optional precomputed KnnGraph

    Returns
    -------
    MarkovOperator
    """
    points = np.asarray(points, dtype=float)
    params = params or KernelParams()
    n = points.shape[0]
    knn = min(params.knn, n)
    if graph is None:
        graph = knn_graph(points, knn)
    if density is None:
        density = estimate_density(points, knn, params.d, graph=graph)
    d = int(density.d)
    alpha = params.alpha if params.alpha is not None else -d / 4.0
    epsilon = params.epsilon if params.epsilon is not None else density.epsilon
    if epsilon is None:
        raise InvalidInputError("no epsilon: pass params.epsilon or a tuned density")
    rho = density.rho
    q_eps = _knn_density(graph.sq, graph.idx, rho, epsilon, d)

    sym = graph.sym.tocoo()
    r, c = sym.row, sym.col
    s = epsilon ** (-d / 2.0) * np.exp(-sym.data / (epsilon * rho[r] * rho[c]))
    right_norm = q_eps**alpha
    s /= right_norm[r] * right_norm[c]
    left_norm = np.bincount(r, weights=s, minlength=n)
    if not (np.all(np.isfinite(left_norm)) and np.all(left_norm > 0)):
        raise NumericalError("non-finite or zero row normalizer")
    p = sparse.csr_matrix((s / left_norm[r], (r, c)), shape=(n, n))
    p.sort_indices()
    resolved = replace(params, epsilon=float(epsilon), alpha=float(alpha), d=d, knn=knn)
    return MarkovOperator(
        P=p,
        points=points,
        params=resolved,
        density=density,
        q_eps=q_eps,
        right_norm=right_norm,
        left_norm=left_norm,
    )


def extend_rows(op, new_points, on_empty="raise"):
    """Row-stochastic extension of the operator to out-of-sample points.

    Replays the training normalization chain against the training set: the
    two-pass rho, the kernel row over the knn nearest training points, the
    right-normalization with the new point's own q_eps^alpha, and the row-sum
    left-normalization.  A query that exactly coincides with a training point
    returns that training row, so extension interpolates the operator on the
    training set (the kernel path would differ there by the kernel mass beyond
    the query's kNN radius, which the symmetrized training support keeps).

    Parameters
    ----------
    op : MarkovOperator
    new_points : (M, p) array
    on_empty : "raise" (default) or "mask"; with "mask", rows with zero kernel
        mass are returned as all-zero and flagged in the second return value

    Returns
    -------
    (M, N) sparse row-stochastic matrix, or (matrix, empty_mask) when
    on_empty="mask".
    """
    new_points = np.atleast_2d(np.asarray(new_points, dtype=float))
    m = new_points.shape[0]
    params, density = op.params, op.density
    if m == 0:
        ext = sparse.csr_matrix((0, op.n))
        return (ext, np.zeros(0, dtype=bool)) if on_empty == "mask" else ext
    if new_points.shape[1] != op.points.shape[1]:
        raise InvalidInputError("query dimension does not match training points")
    dist, idx = op.nn_index().kneighbors(new_points, n_neighbors=params.knn)
    sq = dist.astype(float) ** 2
    d, eps, alpha = params.d, params.epsilon, params.alpha

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if density.pilot_epsilon is not None:
            k0 = min(PILOT_NEIGHBORS, params.knn)
            pilot_rho_out = np.sqrt(np.mean(sq[:, :k0], axis=1))
            u0 = sq / (density.pilot_epsilon * pilot_rho_out[:, None] * density.pilot_rho[idx])
            q0 = (
                density.pilot_epsilon ** (-d / 2.0)
                * np.exp(-u0).sum(axis=1)
                / pilot_rho_out**d
            )
            rho_out = q0 ** (-0.5) / density.rho_scale
        else:
            rho_out = density.rho[idx[:, 0]]
        s = eps ** (-d / 2.0) * np.exp(-sq / (eps * rho_out[:, None] * density.rho[idx]))
        q_out = s.sum(axis=1) / rho_out**d
        s = s / (q_out[:, None] ** alpha * op.right_norm[idx])
        row_sum = s.sum(axis=1)
    empty = ~(np.isfinite(row_sum) & (row_sum > 0) & np.isfinite(q_out) & (q_out > 0))
    if empty.any():
        if on_empty == "raise":
            raise OutOfSupportError(
                f"{int(empty.sum())} query point(s) carry no kernel mass "
                f"(first index {int(np.flatnonzero(empty)[0])})"
            )
        s[empty] = 0.0
        row_sum[empty] = 1.0
    s = s / row_sum[:, None]
    rows = np.repeat(np.arange(m), params.knn)
    ext = sparse.csr_matrix((s.ravel(), (rows, idx.ravel())), shape=(m, op.n))
    hit = sq[:, 0] == 0.0
    if hit.any():
        where_hit = np.flatnonzero(hit)
        where_new = np.flatnonzero(~hit)
        stacked = sparse.vstack(
            [op.P[idx[where_hit, 0]], ext[where_new]], format="csr"
        )
        back = np.empty(m, dtype=np.int64)
        back[np.concatenate([where_hit, where_new])] = np.arange(m)
        ext = stacked[back]
        empty[hit] = False
    ext.sort_indices()
    return (ext, empty) if on_empty == "mask" else ext


def save_operator(path, op):
    """Single-file serialization: sparse triplets plus normalizers and params."""
    coo = op.P.tocoo()
    meta = {
        "version": 1,
        "n": int(op.n),
        "params": {
            "epsilon": op.params.epsilon,
            "alpha": op.params.alpha,
            "d": op.params.d,
            "knn": op.params.knn,
        },
        "density": {
            "epsilon": op.density.epsilon,
            "d_hat": op.density.d_hat,
            "pilot_epsilon": op.density.pilot_epsilon,
            "rho_scale": op.density.rho_scale,
        },
    }
    arrays = {
        "rows": coo.row.astype(np.int64),
        "cols": coo.col.astype(np.int64),
        "vals": coo.data,
        "points": op.points,
        "rho": op.density.rho,
        "q": op.density.q,
        "pilot_rho": op.density.pilot_rho
        if op.density.pilot_rho is not None
        else np.zeros(0),
        "q_eps": op.q_eps,
        "right_norm": op.right_norm,
        "left_norm": op.left_norm,
    }
    save_container(path, "markov-operator", meta, arrays)


def load_operator(path):
    meta, arrays = load_container(path, expect_kind="markov-operator")
    n = meta["n"]
    pm = meta["params"]
    dm = meta["density"]
    params = KernelParams(
        epsilon=pm["epsilon"], alpha=pm["alpha"], d=pm["d"], knn=pm["knn"]
    )
    pilot_rho = arrays["pilot_rho"] if arrays["pilot_rho"].size else None
    density = DensityEstimate(
        q=arrays["q"],
        rho=arrays["rho"],
        d=pm["d"],
        epsilon=dm["epsilon"],
        d_hat=dm["d_hat"],
        pilot_epsilon=dm["pilot_epsilon"],
        pilot_rho=pilot_rho,
        rho_scale=dm["rho_scale"],
    )
    p = sparse.csr_matrix((arrays["vals"], (arrays["rows"], arrays["cols"])), shape=(n, n))
    p.sort_indices()
    return MarkovOperator(
        P=p,
        points=arrays["points"],
        params=params,
        density=density,
        q_eps=arrays["q_eps"],
        right_norm=arrays["right_norm"],
        left_norm=arrays["left_norm"],
    )

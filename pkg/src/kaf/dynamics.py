"""Benchmark dynamical systems, RK4 integration, invariant sampling, and noise.

State arrays have shape (..., n) so that single states and ensembles share one
code path; the vector fields broadcast over leading axes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericalBlowupError, TuningFailureError

__all__ = [
    "Lorenz63",
    "Lorenz96",
    "Hamiltonian16",
    "SystemSpec",
    "Trajectory",
    "NoiseModel",
    "lorenz63_spec",
    "lorenz96_spec",
    "hamiltonian16_spec",
    "rk4_step",
    "propagate",
    "flow",
    "integrate",
    "sample_invariant",
    "hamiltonian_energy",
    "hmc_sample",
    "mc_conditional_expectation",
    "apply_noise",
]


@dataclass(frozen=True)
class Lorenz63:
    """Classical three-variable convection model with chaotic standard regime."""

    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    dim = 3

    def rhs(self, w):
        x, y, z = w[..., 0], w[..., 1], w[..., 2]
        return np.stack(
            [
                self.sigma * (y - x),
                x * (self.rho - z) - y,
                x * y - self.beta * z,
            ],
            axis=-1,
        )


@dataclass(frozen=True)
class Lorenz96:
    """Cyclic n-site model dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F."""

    n: int = 5
    forcing: float = 8.0

    def __post_init__(self):
        if self.n < 4:
            raise InvalidInputError("Lorenz96 needs n >= 4 for distinct neighbors")

    @property
    def dim(self):
        return self.n

    def rhs(self, w):
        wp1 = np.roll(w, -1, axis=-1)
        wm2 = np.roll(w, 2, axis=-1)
        wm1 = np.roll(w, 1, axis=-1)
        return (wp1 - wm2) * wm1 - w + self.forcing


@dataclass(frozen=True)
class Hamiltonian16:
    """Canonical system for H = (1/2)(sum w_i^2 + sum_{i=1..7} w_{2i-1}^2 w_{2i+1}^2).

    Odd coordinates (1-based) are positions, even ones the conjugate momenta:
    dw_{2i-1}/dt = dH/dw_{2i}, dw_{2i}/dt = -dH/dw_{2i-1}.  The density
    exp(-H) is invariant, and under it the even coordinates are exactly
    standard normal.
    """

    dim = 16

    def rhs(self, w):
        q = w[..., 0::2]
        q2 = q * q
        a = np.zeros_like(q)
        a[..., :-1] += q2[..., 1:]
        a[..., 1:] += q2[..., :-1]
        out = np.empty_like(w)
        out[..., 0::2] = w[..., 1::2]
        out[..., 1::2] = -q * (1.0 + a)
        return out


@dataclass(frozen=True)
class SystemSpec:
    """A system together with its integration step dt and sampling interval obs_dt."""

    system: object
    dt: float
    obs_dt: float

    def __post_init__(self):
        if self.dt <= 0 or self.obs_dt <= 0:
            raise InvalidInputError("dt and obs_dt must be positive")
        if abs(self.obs_dt / self.dt - round(self.obs_dt / self.dt)) > 1e-9:
            raise InvalidInputError("obs_dt must be an integer multiple of dt")

    @property
    def substeps(self):
        return int(round(self.obs_dt / self.dt))

    @property
    def dim(self):
        return self.system.dim


def lorenz63_spec(obs_dt=0.1):
    return SystemSpec(Lorenz63(), dt=obs_dt / 8.0, obs_dt=obs_dt)


def lorenz96_spec(n=5, forcing=8.0, obs_dt=None, substeps=None):
    """Default sampling: dt = obs_dt = 1/64 for small n, dt = 0.05/4 for n = 40."""
    if obs_dt is None:
        obs_dt = 1.0 / 64.0 if n < 40 else 0.05
    if substeps is None:
        substeps = 1 if n < 40 else 4
    return SystemSpec(Lorenz96(n, forcing), dt=obs_dt / substeps, obs_dt=obs_dt)


def hamiltonian16_spec(obs_dt=0.1):
    return SystemSpec(Hamiltonian16(), dt=obs_dt / 8.0, obs_dt=obs_dt)


@dataclass
class Trajectory:
    """Consecutive samples of one orbit, obs_dt apart, first row at time t0."""

    states: np.ndarray
    t0: float = 0.0
    obs_dt: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))

    def __len__(self):
        return self.states.shape[0]

    @property
    def times(self):
        return self.t0 + self.obs_dt * np.arange(len(self))

    def component(self, i):
        return self.states[:, i]


def rk4_step(system, state, dt):
    """One classical Runge-Kutta-4 step of size dt.

    Parameters
    ----------
    system : object with an rhs(state) method broadcasting over (..., dim)
    state : ndarray, shape (..., dim)
    dt : float

    Returns
    -------
    ndarray of the same shape as state.
    """
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != system.dim:
        raise InvalidInputError(
            f"state dimension {state.shape[-1]} != system dimension {system.dim}"
        )
    k1 = system.rhs(state)
    k2 = system.rhs(state + 0.5 * dt * k1)
    k3 = system.rhs(state + 0.5 * dt * k2)
    k4 = system.rhs(state + dt * k3)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericalBlowupError("non-finite state after RK4 step")
    return out


def propagate(spec, states, n_obs_steps=1):
    """Advance states by n_obs_steps sampling intervals (substepped RK4)."""
    for _ in range(n_obs_steps * spec.substeps):
        states = rk4_step(spec.system, states, spec.dt)
    return states


def flow(spec, states, n_samples):
    """Record an ensemble orbit every obs_dt.

    Returns an array of shape (n_samples,) + states.shape whose first entry is
    the initial condition.
    """
    if n_samples < 1:
        raise InvalidInputError("n_samples must be >= 1")
    states = np.asarray(states, dtype=float)
    out = np.empty((n_samples,) + states.shape)
    out[0] = states
    for i in range(1, n_samples):
        states = propagate(spec, states)
        out[i] = states
    return out


def integrate(spec, x0, n_samples, t0=0.0, meta=None):
    """Integrate a single initial condition into a Trajectory of n_samples rows."""
    states = flow(spec, np.asarray(x0, dtype=float), n_samples)
    return Trajectory(states, t0=t0, obs_dt=spec.obs_dt, meta=meta or {})


def sample_invariant(spec, n, rng, spinup=50.0):
    """Draw n states approximately from the invariant measure.

    For the chaotic systems, random initial conditions are integrated past the
    spin-up horizon; for Hamiltonian16 the invariant density exp(-H) is sampled
    directly with HMC.
    """
    if n == 0:
        return np.empty((0, spec.dim))
    if isinstance(spec.system, Hamiltonian16):
        return hmc_sample(None, n, rng)
    if spinup <= 0:
        raise InvalidInputError("spinup must be positive")
    x0 = rng.standard_normal((n, spec.dim))
    if isinstance(spec.system, Lorenz96):
        # start near the forcing fixed point so every member reaches the attractor
        x0 = spec.system.forcing + 0.5 * x0
    n_steps = int(round(spinup / spec.obs_dt))
    return propagate(spec, x0, n_steps)


def hamiltonian_energy(state):
    """Energy H of the 16-dimensional Hamiltonian system, broadcasting over (..., 16)."""
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != 16:
        raise InvalidInputError("hamiltonian_energy expects dimension 16")
    q = state[..., 0::2]
    coupling = np.sum(q[..., :-1] ** 2 * q[..., 1:] ** 2, axis=-1)
    return 0.5 * (np.sum(state * state, axis=-1) + coupling)


def _hamiltonian_free_grad(free, fixed):
    """Gradient of H with respect to the free coordinates.

    `free` has shape (..., 14) holding coordinates 3..16 (1-based); `fixed` is
    the clamped (w1, w2) pair, or None when all 16 coordinates are free (then
    `free` has shape (..., 16)).
    """
    if fixed is None:
        w = free
    else:
        w = np.concatenate([np.broadcast_to(fixed, free.shape[:-1] + (2,)), free], axis=-1)
    q = w[..., 0::2]
    q2 = q * q
    a = np.zeros_like(q)
    a[..., :-1] += q2[..., 1:]
    a[..., 1:] += q2[..., :-1]
    grad = np.array(w, copy=True)
    grad[..., 0::2] = q * (1.0 + a)
    if fixed is None:
        return grad
    return grad[..., 2:]


def _hamiltonian_free_energy(free, fixed):
    if fixed is None:
        w = free
    else:
        w = np.concatenate([np.broadcast_to(fixed, free.shape[:-1] + (2,)), free], axis=-1)
    return hamiltonian_energy(w)


def hmc_sample(fixed, n, rng, n_leapfrog=20, burn_in=200, thinning=5, n_chains=None):
    """Sample the 16D Hamiltonian invariant density exp(-H) by HMC.

    Parameters
    ----------
    fixed : (w1, w2) pair to clamp, or None to sample all 16 coordinates
    n : number of samples to return
    rng : numpy Generator
    n_leapfrog, burn_in, thinning : chain controls; burn_in counts iterations
        per chain, during which the step size is adapted into a 65-85%
        acceptance band
    n_chains : number of parallel chains (default: enough that each chain
        contributes at most 64 post-burn-in draws)

    Returns
    -------
    ndarray of shape (n, 16); clamped coordinates are repeated verbatim.
    """
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if fixed is not None:
        fixed = np.asarray(fixed, dtype=float)
        if fixed.shape != (2,):
            raise InvalidInputError("fixed must be a (w1, w2) pair")
    n_free = 16 if fixed is None else 14
    if n_chains is None:
        n_chains = min(n, max(64, -(-n // 64)))
    keep_per_chain = -(-n // n_chains)

    q = rng.standard_normal((n_chains, n_free))
    step = 0.2
    kept = 0
    out = np.empty((keep_per_chain, n_chains, n_free))
    total_iters = burn_in + keep_per_chain * thinning
    for it in range(total_iters):
        p = rng.standard_normal((n_chains, n_free))
        # overflow in a diverging proposal just means certain rejection below
        with np.errstate(over="ignore", invalid="ignore"):
            h0 = _hamiltonian_free_energy(q, fixed) + 0.5 * np.sum(p * p, axis=-1)
            q_new = q
            p_new = p - 0.5 * step * _hamiltonian_free_grad(q, fixed)
            for _ in range(n_leapfrog - 1):
                q_new = q_new + step * p_new
                p_new = p_new - step * _hamiltonian_free_grad(q_new, fixed)
            q_new = q_new + step * p_new
            p_new = p_new - 0.5 * step * _hamiltonian_free_grad(q_new, fixed)
            h1 = _hamiltonian_free_energy(q_new, fixed) + 0.5 * np.sum(p_new * p_new, axis=-1)
            accept = rng.random(n_chains) < np.exp(np.minimum(0.0, h0 - h1))
        q = np.where(accept[:, None], q_new, q)
        rate = float(np.mean(accept))
        if it < burn_in:
            # crude but monotone adaptation toward the target band
            if rate < 0.65:
                step *= 0.8
            elif rate > 0.85:
                step *= 1.1
            if it == burn_in - 1 and rate < 0.10:
                raise TuningFailureError(
                    f"HMC acceptance rate {rate:.3f} below 10% after burn-in"
                )
        elif (it - burn_in) % thinning == thinning - 1:
            out[kept] = q
            kept += 1
    samples = out[:kept].reshape(-1, n_free)[:n]
    if fixed is None:
        return samples
    return np.concatenate([np.broadcast_to(fixed, (n, 2)), samples], axis=-1)


def mc_conditional_expectation(spec, x0_fixed, lead_times, n_mc, rng, chunk=20000):
    """Monte-Carlo estimate of E[X_t | observed initial coordinates].

    The observed coordinates are clamped to x0_fixed; the unobserved ones are
    drawn from the conditional initial distribution (HMC on exp(-H) for
    Hamiltonian16, independent standard normals for Lorenz96), then each member
    is integrated and the observed components averaged at every lead.

    Parameters
    ----------
    spec : SystemSpec
    x0_fixed : value(s) of the observed leading coordinate(s)
    lead_times : iterable of integer lead indices (multiples of obs_dt)
    n_mc : ensemble size
    rng : numpy Generator

    Returns
    -------
    ndarray of shape (n_leads, n_obs) of conditional means.
    """
    if n_mc < 1:
        raise InvalidInputError("n_mc must be >= 1")
    x0_fixed = np.atleast_1d(np.asarray(x0_fixed, dtype=float))
    n_obs = x0_fixed.shape[0]
    lead_times = [int(t) for t in lead_times]
    if any(t < 0 for t in lead_times):
        raise InvalidInputError("lead times must be non-negative")

    if isinstance(spec.system, Hamiltonian16):
        if n_obs != 2:
            raise InvalidInputError("Hamiltonian16 oracle conditions on (w1, w2)")
        members = hmc_sample(x0_fixed, n_mc, rng)
    elif isinstance(spec.system, Lorenz96):
        members = rng.standard_normal((n_mc, spec.dim))
        members[:, :n_obs] = x0_fixed
    else:
        raise InvalidInputError("MC oracle defined for Hamiltonian16 and Lorenz96")

    n_samples = max(lead_times) + 1
    means = np.zeros((n_samples, n_obs))
    for start in range(0, n_mc, chunk):
        part = members[start : start + chunk]
        states = part
        means[0] += part[:, :n_obs].sum(axis=0)
        for i in range(1, n_samples):
            states = propagate(spec, states)
            means[i] += states[:, :n_obs].sum(axis=0)
    means /= n_mc
    means[0] = x0_fixed  # observed coordinates are clamped at lead 0
    return means[lead_times]


@dataclass(frozen=True)
class NoiseModel:
    """Additive observation noise specification.

    kind is one of "gaussian" (variance), "student_t" (dof, variance; rescaled
    so the sample variance matches `variance`), "uniform" (low, high), or
    "sine" (amplitude A, half_width w: theta_t = A sin(t U) with one frequency
    U ~ Uniform[-w, w] drawn per sequence and t physical time, so the noise is
    time varying but not independent across samples).
    """

    kind: str = "gaussian"
    variance: float = 1.0
    dof: float = 10.0
    low: float = -1.0
    high: float = 1.0
    amplitude: float = 2.0
    half_width: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "student_t", "uniform", "sine"):
            raise InvalidInputError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and self.variance < 0:
            raise InvalidInputError("gaussian variance must be >= 0")
        if self.kind == "student_t" and self.dof <= 2:
            raise InvalidInputError("student_t needs dof > 2 for finite variance")
        if self.kind == "uniform" and not self.low < self.high:
            raise InvalidInputError("uniform needs low < high")

    def sample(self, times, rng):
        times = np.asarray(times, dtype=float)
        n = times.shape[0]
        if self.kind == "gaussian":
            if self.variance == 0:
                return np.zeros(n)
            return rng.normal(0.0, np.sqrt(self.variance), size=n)
        if self.kind == "student_t":
            scale = np.sqrt(self.variance * (self.dof - 2.0) / self.dof)
            return scale * rng.standard_t(self.dof, size=n)
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size=n)
        u = rng.uniform(-self.half_width, self.half_width)
        return self.amplitude * np.sin(times * u)


def apply_noise(traj, component, model):
    """Observed scalar sequence z_t = x_t(component) + theta_t.

    The noise stream is seeded from the model, independent of whatever RNG
    produced the trajectory; the trajectory itself is left untouched.
    """
    if not 0 <= component < traj.states.shape[1]:
        raise InvalidInputError(f"component {component} out of range")
    rng = np.random.default_rng(model.seed)
    theta = model.sample(traj.times, rng)
    return traj.component(component) + theta

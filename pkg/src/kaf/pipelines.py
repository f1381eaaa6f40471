"""Experiment pipelines: data generation, training, evaluation.

Three pipelines cover the bundled benchmark studies.  `forecast` trains the
eigenbasis-projection and kernel-smoothing estimators on delay windows of an
observed component and scores them against held-out trajectories or a
Monte-Carlo conditional mean.  `smoother-benchmark` scores the window
smoother against an ensemble Kalman filter on noisy observations of a single
component.  `smooth-then-predict` denoises noisy training sequences first and
forecasts from the smoothed windows, with a noise-free twin for reference.

Everything here assumes a config that the harness module has already resolved
and validated, plus a base seed; randomness is drawn from named substreams so
results do not depend on evaluation order.
"""

import time

import numpy as np

from .baselines import EnkfConfig, enkf_run
from .dynamics import (
    NoiseModel,
    hamiltonian16_spec,
    integrate,
    lorenz63_spec,
    lorenz96_spec,
    mc_conditional_expectation,
    propagate,
    sample_invariant,
)
from .embedding import DelayEmbedding, delay_embed
from .errors import InvalidInputError
from .estimators import (
    eigendecompose,
    fit_nystrom,
    nystrom_apply,
    rmse_curve,
)
from .kernel import KernelParams, build_markov, extend_rows
from .smoother import fit_smoother_family

__all__ = ["run_pipeline", "system_spec", "PIPELINES"]

# named substreams; extra integer coordinates may follow the stream id
_STREAM = {
    "train": 0,
    "out": 1,
    "mc": 2,
    "train-noise": 3,
    "out-noise": 4,
    "enkf-init": 5,
    "enkf": 6,
    "extra-noise": 7,
}

_EXTEND_CHUNK = 100_000


def _stream(seed, name, *extra):
    key = (int(seed), _STREAM[name]) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(key))


def system_spec(cfg):
    """SystemSpec from the config's `system` block."""
    sys_cfg = cfg["system"]
    name = sys_cfg.get("name")
    if name == "lorenz63":
        return lorenz63_spec(obs_dt=sys_cfg.get("obs_dt", 0.1))
    if name == "lorenz96":
        return lorenz96_spec(
            n=sys_cfg.get("n", 5),
            forcing=sys_cfg.get("forcing", 8.0),
            obs_dt=sys_cfg.get("obs_dt"),
        )
    if name == "hamiltonian16":
        return hamiltonian16_spec(obs_dt=sys_cfg.get("obs_dt", 0.1))
    raise InvalidInputError(f"unknown system {name!r}")


def noise_model(ncfg):
    """NoiseModel from a config noise block (label keys stripped)."""
    fields = {k: v for k, v in ncfg.items() if k not in ("label", "nominal_variance")}
    return NoiseModel(**fields)


def noise_label(ncfg):
    return ncfg.get("label", ncfg["kind"])


def nominal_variance(ncfg):
    """Observation-error variance a filter should assume for this noise."""
    if "nominal_variance" in ncfg:
        return float(ncfg["nominal_variance"])
    kind = ncfg["kind"]
    if kind in ("gaussian", "student_t"):
        return float(ncfg.get("variance", 1.0))
    if kind == "uniform":
        return (ncfg["high"] - ncfg["low"]) ** 2 / 12.0
    raise InvalidInputError(f"noise kind {kind!r} needs an explicit nominal_variance")


def _kernel_params(cfg):
    k = cfg.get("kernel", {})
    return KernelParams(
        epsilon=k.get("epsilon"),
        alpha=k.get("alpha"),
        d=k.get("d"),
        knn=k.get("knn", 128),
    )


def _lead_steps(rcfg):
    leads = rcfg["leads"]
    if isinstance(leads, dict):
        leads = list(range(0, leads["max"] + 1, leads.get("stride", 1)))
    leads = [int(t) for t in leads]
    if not leads or min(leads) < 0 or sorted(leads) != leads:
        raise InvalidInputError("leads must be a sorted list of non-negative steps")
    return leads


def _m_list(ccfg):
    m = ccfg["m"]
    return [int(v) for v in (m if isinstance(m, list) else [m])]


def _observed_flow(spec, states, n_samples, comps):
    """(n_samples, n_members, len(comps)) observations along an ensemble orbit."""
    comps = list(comps)
    states = np.asarray(states, dtype=float)
    out = np.empty((n_samples, states.shape[0], len(comps)))
    out[0] = states[:, comps]
    for i in range(1, n_samples):
        states = propagate(spec, states)
        out[i] = states[:, comps]
    return out


def _draw_ics(cfg, spec, n, rng):
    s = cfg.get("sampling", {"source": "invariant"})
    source = s.get("source", "invariant")
    if source == "invariant":
        return sample_invariant(spec, n, rng, spinup=s.get("spinup", 50.0))
    if source == "gaussian":
        return rng.standard_normal((n, spec.dim))
    raise InvalidInputError(f"unknown sampling source {source!r}")


def _windows(obs, p0, m, stride):
    # obs: (T, n, c) -> (n, m*c), lags oldest to newest
    idx = p0 - stride * np.arange(m - 1, -1, -1)
    w = obs[idx]
    return np.ascontiguousarray(w.transpose(1, 0, 2)).reshape(w.shape[1], -1)


def _lead_values(obs, p0, leads):
    # obs: (T, n, c) -> (n_leads, n, c) values at p0 + each lead
    return obs[p0 + np.asarray(leads, dtype=int)]


def _lead_major(values):
    # (n_leads, n, c) -> (n, n_leads*c) response matrix
    return np.ascontiguousarray(values.transpose(1, 0, 2)).reshape(values.shape[1], -1)


def _curve_shape(pred, n_leads, n_comp):
    # (n, n_leads*c) -> (n_leads, n, c)
    return pred.reshape(pred.shape[0], n_leads, n_comp).transpose(1, 0, 2)


class _Timer:
    def __init__(self):
        self.stages = []

    def stage(self, name, t0):
        self.stages.append([name, round(time.perf_counter() - t0, 3)])


def _lead_key(t):
    return f"lead={t:.4f}"


# ---------------------------------------------------------------------------
# forecast


def run_forecast(cfg):
    seed = cfg["seed"]
    spec = system_spec(cfg)
    timer = _Timer()

    cov = cfg["covariate"]
    cov_comps = [int(c) for c in cov["components"]]
    stride = int(cov.get("stride", 1))
    m_values = _m_list(cov)
    resp = cfg["response"]
    resp_comps = [int(c) for c in resp.get("components", cov_comps)]
    leads = _lead_steps(resp)
    lead_times = [round(t * spec.obs_dt, 10) for t in leads]

    data = cfg["data"]
    train_sizes = sorted(int(n) for n in data["train_sizes"])
    n_out = int(data["n_out"])
    truth_kind = data.get("truth", "trajectory")
    estimators = cfg.get("estimators", ["nystrom", "smoothing"])
    nystrom_m = cfg.get("nystrom_m") or m_values
    L = cfg["kernel"]["L"]
    params = _kernel_params(cfg)
    n_samples_cfg = cfg.get("samples", {})
    n_keep = int(n_samples_cfg.get("count", 2))

    if truth_kind == "mc-oracle" and m_values != [1]:
        raise InvalidInputError("the Monte-Carlo oracle conditions on a single lag")

    all_comps = sorted(set(cov_comps) | set(resp_comps))
    cov_idx = [all_comps.index(c) for c in cov_comps]
    resp_idx = [all_comps.index(c) for c in resp_comps]
    m_max = max(m_values)
    p0 = (m_max - 1) * stride
    n_steps = p0 + max(leads) + 1
    n_max = max(train_sizes)

    t0 = time.perf_counter()
    ics = _draw_ics(cfg, spec, n_max, _stream(seed, "train"))
    obs = _observed_flow(spec, ics, n_steps, all_comps)
    y_full = _lead_major(_lead_values(obs[:, :, resp_idx], p0, leads))
    timer.stage("generate-train", t0)

    t0 = time.perf_counter()
    ics_out = _draw_ics(cfg, spec, n_out, _stream(seed, "out"))
    if truth_kind == "trajectory":
        obs_out = _observed_flow(spec, ics_out, n_steps, all_comps)
        truth = _lead_values(obs_out[:, :, resp_idx], p0, leads)
    elif truth_kind == "mc-oracle":
        obs_out = ics_out[:, all_comps][None]
        truth = np.empty((len(leads), n_out, len(resp_comps)))
        for j in range(n_out):
            truth[:, j] = mc_conditional_expectation(
                spec, ics_out[j, cov_comps], leads, int(data["n_mc"]),
                _stream(seed, "mc", j),
            )
    else:
        raise InvalidInputError(f"unknown truth kind {truth_kind!r}")
    timer.stage("generate-out", t0)

    metrics, curves, info = {}, [], {}
    series = []
    for j in range(min(n_keep, n_out)):
        series.append(
            {
                "label": f"sample={j}/truth",
                "t": lead_times,
                "values": truth[:, j, 0].tolist(),
            }
        )

    for m in m_values:
        w_all = _windows(obs[:, :, cov_idx], p0, m, stride)
        w_out = _windows(obs_out[:, :, cov_idx], p0 if truth_kind == "trajectory" else 0, m, stride)
        for n_train in train_sizes:
            parts = []
            if len(m_values) > 1:
                parts.append(f"m={m}")
            if len(train_sizes) > 1:
                parts.append(f"N={n_train}")
            label = "/".join(parts) or "main"

            t0 = time.perf_counter()
            op = build_markov(w_all[:n_train], params)
            ext = extend_rows(op, w_out)
            info[f"epsilon/{label}"] = op.params.epsilon
            info[f"dimension/{label}"] = op.params.d
            preds = {}
            if "smoothing" in estimators:
                preds["smoothing"] = ext @ y_full[:n_train]
            if "nystrom" in estimators and m in nystrom_m:
                basis = eigendecompose(op, L)
                est = fit_nystrom(basis, y_full[:n_train])
                preds["nystrom"] = nystrom_apply(est, ext)
            timer.stage(f"fit-eval/{label}", t0)

            for name in estimators:
                if name not in preds:
                    continue
                curve_vals = _curve_shape(preds[name], len(leads), len(resp_comps))
                rmse = rmse_curve(curve_vals, truth)
                for t, v in zip(lead_times, rmse):
                    metrics[f"rmse/{name}/{label}/{_lead_key(t)}"] = float(v)
                curves.append(
                    {
                        "label": f"{name}/{label}",
                        "lead_times": lead_times,
                        "rmse": [float(v) for v in rmse],
                    }
                )
                for j in range(min(n_keep, n_out)):
                    series.append(
                        {
                            "label": f"sample={j}/{name}/{label}",
                            "t": lead_times,
                            "values": curve_vals[:, j, 0].tolist(),
                        }
                    )

    return {
        "pipeline": "forecast",
        "experiment": cfg["experiment"],
        "metrics": metrics,
        "curves": curves,
        "series": series,
        "info": info,
        "timing": timer.stages,
    }


# ---------------------------------------------------------------------------
# smoother-benchmark


def _denoise_windows(models, windows):
    """Extend once, evaluate each k's estimator; NaN rows where off support.

    Returns {k: values}, one value per window, plus the failure count.
    """
    first = next(iter(models.values()))
    ext, empty = extend_rows(first.op, windows, on_empty="mask")
    out = {}
    for k, model in models.items():
        vals = nystrom_apply(model.estimator, ext)
        vals[empty] = np.nan
        out[k] = vals
    return out, int(empty.sum())


def _covered_rmse(values, truth, m_s, k):
    """RMSE of window estimates against truth at positions k-1 .. T-1-(m_s-k)."""
    target = truth[k - 1 : k - 1 + values.shape[0]]
    good = np.isfinite(values)
    if not good.any():
        raise InvalidInputError("no valid smoothed values to score")
    return float(np.sqrt(np.mean((values[good] - target[good]) ** 2)))


def run_smoother_benchmark(cfg):
    seed = cfg["seed"]
    spec = system_spec(cfg)
    timer = _Timer()
    comp = int(cfg["observed_component"])
    tr, sm, ev = cfg["train"], cfg["smoother"], cfg["eval"]
    m_s, ks, L = int(sm["m_s"]), [int(k) for k in sm["ks"]], int(sm["L"])
    k_star = int(ev.get("k", ks[0]))
    params = KernelParams(
        epsilon=sm.get("epsilon"), d=sm.get("d"), knn=sm.get("knn", 128)
    )
    n_out = int(ev["n_out"])
    overlay_len = int(cfg.get("samples", {}).get("overlay_len", 500))

    t0 = time.perf_counter()
    ic = sample_invariant(spec, 1, _stream(seed, "train"))[0]
    traj = integrate(spec, ic, int(tr["n"]) + m_s - 1)
    x_train = traj.states[:, comp]
    z_train = x_train + noise_model(tr["noise"]).sample(
        traj.times, _stream(seed, "train-noise")
    )
    timer.stage("generate-train", t0)

    t0 = time.perf_counter()
    family = fit_smoother_family(z_train, m_s, ks, L, params=params)
    timer.stage("fit-smoother", t0)

    t0 = time.perf_counter()
    ic_out = sample_invariant(spec, 1, _stream(seed, "out"))[0]
    traj_out = integrate(spec, ic_out, n_out)
    x_out = traj_out.states[:, comp]
    times_out = traj_out.times
    timer.stage("generate-out", t0)

    metrics, series, info = {}, [], {}
    emb = DelayEmbedding(m_s)
    noise_cfgs = ev["noise"]
    z_by_label = {}
    for i_kind, ncfg in enumerate(noise_cfgs):
        label = noise_label(ncfg)
        t0 = time.perf_counter()
        z_out = x_out + noise_model(ncfg).sample(
            times_out, _stream(seed, "out-noise", i_kind)
        )
        z_by_label[label] = z_out
        windows = delay_embed(z_out, emb)
        ks_here = ks if i_kind == 0 else [k_star]
        values, n_failed = _denoise_windows(
            {k: family[k] for k in ks_here}, windows
        )
        if n_failed:
            info[f"off-support/noise={label}"] = n_failed
        for k in ks_here:
            metrics[f"rmse/smoother/k={k}/noise={label}"] = _covered_rmse(
                values[k], x_out, m_s, k
            )
        metrics[f"rmse/noisy/noise={label}"] = float(
            np.sqrt(np.mean((z_out - x_out) ** 2))
        )
        timer.stage(f"denoise/noise={label}", t0)

        n_show = min(overlay_len, n_out)
        smoothed = values[k_star][: n_show - (k_star - 1)]
        series.extend(
            [
                {
                    "label": f"denoise/noise={label}/truth",
                    "t": times_out[:n_show].tolist(),
                    "values": x_out[:n_show].tolist(),
                },
                {
                    "label": f"denoise/noise={label}/noisy",
                    "t": times_out[:n_show].tolist(),
                    "values": z_out[:n_show].tolist(),
                },
                {
                    "label": f"denoise/noise={label}/smoothed",
                    "t": times_out[k_star - 1 : n_show].tolist(),
                    "values": np.nan_to_num(smoothed).tolist(),
                },
            ]
        )

    first = family[ks[0]]
    info["epsilon/smoother"] = first.op.params.epsilon
    info["dimension/smoother"] = first.op.params.d

    en = cfg.get("enkf")
    if en:
        discard = int(en.get("spinup_discard", 100))
        info["enkf/inflation"] = float(en.get("inflation", 1.02))
        info["enkf/ensemble-size"] = int(en.get("ensemble_size", 64))
        for i_set, obs_set in enumerate(en["observed_sets"]):
            obs_set = [int(c) for c in obs_set]
            for i_kind, ncfg in enumerate(noise_cfgs):
                label = noise_label(ncfg)
                t0 = time.perf_counter()
                obs_mat = np.empty((n_out, len(obs_set)))
                for j, c in enumerate(obs_set):
                    if c == comp:
                        obs_mat[:, j] = z_by_label[label]
                    else:
                        obs_mat[:, j] = traj_out.states[:, c] + noise_model(
                            ncfg
                        ).sample(times_out, _stream(seed, "extra-noise", i_kind, c))
                ecfg = EnkfConfig(
                    spec=spec,
                    observed_components=tuple(obs_set),
                    obs_noise_var=nominal_variance(ncfg),
                    ensemble_size=int(en.get("ensemble_size", 64)),
                    inflation=float(en.get("inflation", 1.02)),
                )
                x0_ens = sample_invariant(
                    spec, ecfg.ensemble_size, _stream(seed, "enkf-init", i_set, i_kind)
                )
                means = enkf_run(
                    ecfg, obs_mat, x0_ens, _stream(seed, "enkf", i_set, i_kind)
                )
                err = means[discard:, comp] - x_out[discard:]
                metrics[f"rmse/enkf/obs={len(obs_set)}/noise={label}"] = float(
                    np.sqrt(np.mean(err**2))
                )
                timer.stage(f"enkf/obs={len(obs_set)}/noise={label}", t0)

    return {
        "pipeline": "smoother-benchmark",
        "experiment": cfg["experiment"],
        "metrics": metrics,
        "curves": [],
        "series": series,
        "info": info,
        "timing": timer.stages,
    }


# ---------------------------------------------------------------------------
# smooth-then-predict


def _denoise_matrix(op, est, seqs, m_s, chunk=_EXTEND_CHUNK):
    """Denoise every window of every row sequence.

    seqs has shape (n, T); the return value has shape (n, T - m_s + 1) with the
    estimate for window j in column j, NaN where the window fell off support.
    """
    n, T = seqs.shape
    windows = np.lib.stride_tricks.sliding_window_view(seqs, m_s, axis=1)
    flat = windows.reshape(-1, m_s)
    out = np.empty(flat.shape[0])
    for start in range(0, flat.shape[0], chunk):
        block = np.ascontiguousarray(flat[start : start + chunk])
        ext, empty = extend_rows(op, block, on_empty="mask")
        vals = nystrom_apply(est, ext)
        vals[empty] = np.nan
        out[start : start + chunk] = vals
    return out.reshape(n, T - m_s + 1)


def run_smooth_then_predict(cfg):
    seed = cfg["seed"]
    spec = system_spec(cfg)
    timer = _Timer()
    comp = int(cfg["observed_component"])
    sm = cfg["smoother"]
    m_s, k, L_s = int(sm["m_s"]), int(sm["k"]), int(sm["L"])
    sm_params = KernelParams(
        epsilon=sm.get("epsilon"), d=sm.get("d"), knn=sm.get("knn", 128)
    )
    m_values = _m_list(cfg["covariate"])
    leads = _lead_steps(cfg["response"])
    lead_times = [round(t * spec.obs_dt, 10) for t in leads]
    data = cfg["data"]
    n_train, n_out = int(data["train_size"]), int(data["n_out"])
    params = _kernel_params(cfg)
    n_keep = int(cfg.get("samples", {}).get("count", 2))
    ncfg = cfg["train_noise"]

    span = max(m_values) - 1
    # window end within the denoised series, and in original time
    p0_d = span
    p0 = span + k - 1
    n_steps = span + max(leads) + m_s

    t0 = time.perf_counter()
    x_tr = _observed_flow(
        spec, _draw_ics(cfg, spec, n_train, _stream(seed, "train")), n_steps, [comp]
    )[:, :, 0].T
    times = np.arange(n_steps) * spec.obs_dt
    rng_noise = _stream(seed, "train-noise")
    z_tr = x_tr + noise_model(ncfg).sample(
        np.tile(times, n_train), rng_noise
    ).reshape(n_train, n_steps)
    x_out = _observed_flow(
        spec, _draw_ics(cfg, spec, n_out, _stream(seed, "out")), n_steps, [comp]
    )[:, :, 0].T
    rng_noise_out = _stream(seed, "out-noise")
    z_out = x_out + noise_model(ncfg).sample(
        np.tile(times, n_out), rng_noise_out
    ).reshape(n_out, n_steps)
    timer.stage("generate", t0)

    t0 = time.perf_counter()
    op_s = build_markov(z_tr[:, :m_s], sm_params)
    basis = eigendecompose(op_s, L_s)
    est_s = fit_nystrom(basis, z_tr[:, k - 1])
    timer.stage("fit-smoother", t0)

    t0 = time.perf_counter()
    d_tr = _denoise_matrix(op_s, est_s, z_tr, m_s)
    d_out = _denoise_matrix(op_s, est_s, z_out, m_s)
    timer.stage("denoise", t0)

    metrics, curves, info = {}, [], {}
    # denoised column j estimates the true value at original position j + k - 1
    n_den = d_tr.shape[1]
    metrics["rmse/smoother-train"] = float(
        np.sqrt(np.nanmean((d_tr - x_tr[:, k - 1 : k - 1 + n_den]) ** 2))
    )
    metrics["rmse/smoother-out"] = float(
        np.sqrt(np.nanmean((d_out - x_out[:, k - 1 : k - 1 + n_den]) ** 2))
    )
    metrics["rmse/noisy"] = float(np.sqrt(np.mean((z_out - x_out) ** 2)))

    ok_tr = np.isfinite(d_tr).all(axis=1)
    ok_out = np.isfinite(d_out).all(axis=1)
    if not ok_tr.all():
        info["dropped/train"] = int((~ok_tr).sum())
    if not ok_out.all():
        info["dropped/out"] = int((~ok_out).sum())
    d_tr, x_tr_kept = d_tr[ok_tr], x_tr[ok_tr]
    d_out, x_out_kept = d_out[ok_out], x_out[ok_out]

    lead_idx = np.asarray(leads, dtype=int)
    truth = x_out_kept[:, p0 + lead_idx]  # (n_out, n_leads)
    series = []
    for j in range(min(n_keep, truth.shape[0])):
        series.append(
            {
                "label": f"sample={j}/truth",
                "t": lead_times,
                "values": truth[j].tolist(),
            }
        )

    for m in m_values:
        for variant, tr_series, out_series, off in (
            ("denoised", d_tr, d_out, p0_d),
            ("noise-free", x_tr_kept, x_out_kept, p0),
        ):
            t0 = time.perf_counter()
            w_tr = tr_series[:, off - m + 1 : off + 1]
            y_tr = tr_series[:, off + lead_idx]
            op = build_markov(w_tr, params)
            ext = extend_rows(op, out_series[:, off - m + 1 : off + 1])
            pred = ext @ y_tr  # (n_out, n_leads)
            label = f"{variant}/m={m}"
            info[f"epsilon/{label}"] = op.params.epsilon
            rmse = rmse_curve(pred.T[:, :, None], truth.T[:, :, None])
            for t, v in zip(lead_times, rmse):
                metrics[f"rmse/{variant}/m={m}/{_lead_key(t)}"] = float(v)
            curves.append(
                {
                    "label": label,
                    "lead_times": lead_times,
                    "rmse": [float(v) for v in rmse],
                }
            )
            for j in range(min(n_keep, truth.shape[0])):
                series.append(
                    {
                        "label": f"sample={j}/{label}",
                        "t": lead_times,
                        "values": pred[j].tolist(),
                    }
                )
            timer.stage(f"fit-eval/{label}", t0)

    return {
        "pipeline": "smooth-then-predict",
        "experiment": cfg["experiment"],
        "metrics": metrics,
        "curves": curves,
        "series": series,
        "info": info,
        "timing": timer.stages,
    }


PIPELINES = {
    "forecast": run_forecast,
    "smoother-benchmark": run_smoother_benchmark,
    "smooth-then-predict": run_smooth_then_predict,
}


def run_pipeline(cfg):
    """Dispatch a resolved config to its pipeline."""
    pipeline = cfg.get("pipeline")
    if pipeline not in PIPELINES:
        raise InvalidInputError(f"unknown pipeline {pipeline!r}")
    return PIPELINES[pipeline](cfg)

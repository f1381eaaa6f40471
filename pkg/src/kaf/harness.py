"""Declarative experiment runner and result bundles.

A bundle is a directory written by `run_experiment`:

    config.json     resolved configuration, seed included
    manifest.json   schema, experiment id, config hash, versions, wall time
    results.json    curves, overlay series, fit diagnostics
    metrics.json    flat name -> value map (the comparison contract)
    tables/*.csv    delimited tables, one per published artifact
    timing.txt      per-stage wall times (excluded from fingerprints)

Identical config and seed reproduce every byte except the wall-time field of
the manifest and timing.txt; `bundle_fingerprint` hashes a bundle with those
masked.  `compare_runs` checks two bundles' metrics against a tolerance map.
"""

import fnmatch
import hashlib
import json
import re
import shutil
import sys
import time
from pathlib import Path

from . import __version__
from .errors import InvalidInputError
from .io import dump_json, write_csv
from .pipelines import PIPELINES, run_pipeline, system_spec

__all__ = [
    "bundle_fingerprint",
    "bundled_config_dir",
    "compare_runs",
    "deep_merge",
    "emit_tables",
    "list_bundled_configs",
    "load_config",
    "load_manifest",
    "load_metrics",
    "resolve_config",
    "resolve_config_path",
    "run_experiment",
    "validate_config",
]

CONFIG_SCHEMA = 1
ENV_OUT_DIR = "KAF_OUT_DIR"

_SLUG = re.compile(r"^[a-z0-9][a-z0-9-]*$")

_COMMON_KEYS = {
    "schema_version",
    "experiment",
    "pipeline",
    "seed",
    "system",
    "metadata",
    "fast_overrides",
    "samples",
}
_PIPELINE_KEYS = {
    "forecast": {
        "sampling",
        "covariate",
        "response",
        "estimators",
        "nystrom_m",
        "data",
        "kernel",
    },
    "smoother-benchmark": {"observed_component", "train", "smoother", "eval", "enkf"},
    "smooth-then-predict": {
        "sampling",
        "observed_component",
        "covariate",
        "response",
        "data",
        "smoother",
        "kernel",
        "train_noise",
    },
}
_REQUIRED_KEYS = {
    "forecast": {"covariate", "response", "data", "kernel"},
    "smoother-benchmark": {"observed_component", "train", "smoother", "eval"},
    "smooth-then-predict": {
        "observed_component",
        "covariate",
        "response",
        "data",
        "smoother",
        "kernel",
        "train_noise",
    },
}


def bundled_config_dir():
    return Path(__file__).parent / "configs"


def list_bundled_configs():
    return sorted(p.stem for p in bundled_config_dir().glob("*.json"))


def resolve_config_path(name_or_path):
    """Accept a filesystem path or the stem of a bundled config."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    candidate = bundled_config_dir() / f"{Path(str(name_or_path)).stem}.json"
    if candidate.is_file():
        return candidate
    raise InvalidInputError(
        f"no config file {name_or_path!r} and no bundled config of that name "
        f"(bundled: {', '.join(list_bundled_configs())})"
    )


def load_config(path):
    path = resolve_config_path(path)
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise InvalidInputError(f"{path}: config must be a JSON object")
    return cfg


def deep_merge(base, override):
    """Recursively merge override into base (dicts merged, all else replaced)."""
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def resolve_config(cfg, seed=None, fast=False, overrides=None):
    """Apply tier and caller overrides; returns a validated flat config."""
    cfg = dict(cfg)
    fast_block = cfg.pop("fast_overrides", None)
    if fast:
        if not fast_block:
            raise InvalidInputError(
                f"config {cfg.get('experiment')!r} declares no fast_overrides"
            )
        cfg = deep_merge(cfg, fast_block)
    if overrides:
        cfg = deep_merge(cfg, overrides)
    if seed is not None:
        cfg["seed"] = int(seed)
    validate_config(cfg)
    return cfg


def _require(cfg, key, kind=None):
    if key not in cfg:
        raise InvalidInputError(f"config is missing {key!r}")
    if kind is not None and not isinstance(cfg[key], kind):
        raise InvalidInputError(f"config key {key!r} has the wrong type")
    return cfg[key]


def validate_config(cfg):
    if _require(cfg, "schema_version") != CONFIG_SCHEMA:
        raise InvalidInputError(
            f"unsupported schema_version {cfg['schema_version']!r}"
        )
    experiment = _require(cfg, "experiment", str)
    if not _SLUG.match(experiment):
        raise InvalidInputError(f"experiment id {experiment!r} is not a slug")
    pipeline = _require(cfg, "pipeline", str)
    if pipeline not in PIPELINES:
        raise InvalidInputError(f"unknown pipeline {pipeline!r}")
    seed = _require(cfg, "seed")
    if not isinstance(seed, int) or seed < 0:
        raise InvalidInputError("seed must be a non-negative integer")
    _require(cfg, "system", dict)
    spec = system_spec(cfg)

    allowed = _COMMON_KEYS | _PIPELINE_KEYS[pipeline]
    unknown = set(cfg) - allowed
    if unknown:
        raise InvalidInputError(
            f"unknown config key(s) for {pipeline}: {', '.join(sorted(unknown))}"
        )
    missing = _REQUIRED_KEYS[pipeline] - set(cfg)
    if missing:
        raise InvalidInputError(
            f"{pipeline} config is missing: {', '.join(sorted(missing))}"
        )

    def check_components(comps, where):
        for c in comps:
            if not isinstance(c, int) or not 0 <= c < spec.dim:
                raise InvalidInputError(
                    f"{where}: component {c!r} outside the {spec.dim}-dim state"
                )

    if pipeline == "forecast":
        cov = _require(cfg, "covariate", dict)
        check_components(_require(cov, "components", list), "covariate")
        resp = _require(cfg, "response", dict)
        check_components(resp.get("components", cov["components"]), "response")
        data = _require(cfg, "data", dict)
        sizes = _require(data, "train_sizes", list)
        if not sizes or any(n < 8 for n in sizes):
            raise InvalidInputError("train_sizes must be positive (at least 8)")
        if data.get("truth", "trajectory") == "mc-oracle" and "n_mc" not in data:
            raise InvalidInputError("mc-oracle truth needs data.n_mc")
        _require(cfg["kernel"], "L")
    elif pipeline == "smoother-benchmark":
        check_components([cfg["observed_component"]], "observed_component")
        sm = _require(cfg, "smoother", dict)
        ks = _require(sm, "ks", list)
        m_s = _require(sm, "m_s")
        if not ks or any(not 1 <= k <= m_s for k in ks):
            raise InvalidInputError("each smoother k must lie in 1..m_s")
        ev = _require(cfg, "eval", dict)
        if int(ev.get("n_out", 0)) < m_s:
            raise InvalidInputError("eval.n_out must cover one window")
        if int(ev.get("k", ks[0])) not in ks:
            raise InvalidInputError("eval.k must be one of smoother.ks")
        _require(ev, "noise", list)
        en = cfg.get("enkf")
        if en:
            for obs_set in _require(en, "observed_sets", list):
                check_components(obs_set, "enkf.observed_sets")
    else:
        check_components([cfg["observed_component"]], "observed_component")
        sm = _require(cfg, "smoother", dict)
        if not 1 <= int(sm["k"]) <= int(sm["m_s"]):
            raise InvalidInputError("smoother.k must lie in 1..m_s")
        data = _require(cfg, "data", dict)
        if int(_require(data, "n_out")) < 1:
            raise InvalidInputError("data.n_out must be >= 1")
        _require(data, "train_size")
        _require(cfg, "train_noise", dict)
    if "n_out" in cfg.get("data", {}) and int(cfg["data"]["n_out"]) < 1:
        raise InvalidInputError("data.n_out must be >= 1")
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _versions():
    import numpy
    import scipy
    import sklearn

    return {
        "python": sys.version.split()[0],
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "kaf": __version__,
    }


def run_experiment(config, out_dir=None, seed=None, fast=False, overrides=None):
    """Run one experiment config and write its bundle; returns the bundle path.

    `config` may be a path, a bundled config name, or an already-loaded dict.
    The bundle lands in out_dir/<experiment id> and is wiped first if present.
    """
    if isinstance(config, (str, Path)):
        config = load_config(config)
    cfg = resolve_config(config, seed=seed, fast=fast, overrides=overrides)
    out_dir = Path(out_dir) if out_dir is not None else Path("runs")
    bundle = out_dir / cfg["experiment"]
    if bundle.exists():
        shutil.rmtree(bundle)
    bundle.mkdir(parents=True)

    start = time.perf_counter()
    try:
        result = run_pipeline(cfg)
    except Exception as exc:
        dump_json(
            bundle / "error.json",
            {
                "error": type(exc).__name__,
                "message": str(exc),
                "experiment": cfg["experiment"],
            },
        )
        raise
    wall = time.perf_counter() - start

    dump_json(bundle / "config.json", cfg)
    dump_json(
        bundle / "manifest.json",
        {
            "schema_version": CONFIG_SCHEMA,
            "experiment": cfg["experiment"],
            "pipeline": cfg["pipeline"],
            "config_sha256": config_hash(cfg),
            "seed": cfg["seed"],
            "versions": _versions(),
            "wall_time_s": round(wall, 3),
        },
    )
    dump_json(bundle / "metrics.json", result["metrics"])
    dump_json(
        bundle / "results.json",
        {
            "schema_version": CONFIG_SCHEMA,
            "experiment": result["experiment"],
            "pipeline": result["pipeline"],
            "curves": result["curves"],
            "series": result["series"],
            "info": result["info"],
        },
    )
    with open(bundle / "timing.txt", "w") as fh:
        for stage, seconds in result["timing"]:
            fh.write(f"{stage}\t{seconds:.3f}\n")
    emit_tables(bundle)
    return bundle


def _load_json(path, what):
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"{path}: missing {what}")
    with open(path) as fh:
        return json.load(fh)


def load_manifest(bundle):
    return _load_json(Path(bundle) / "manifest.json", "bundle manifest")


def load_metrics(bundle):
    return _load_json(Path(bundle) / "metrics.json", "bundle metrics")


def _parse_label(label):
    # "rmse/smoother/k=2/noise=gaussian" -> {"k": "2", "noise": "gaussian"}
    out = {}
    for part in label.split("/"):
        if "=" in part:
            key, val = part.split("=", 1)
            out[key] = val
    return out


def emit_tables(bundle_or_results, tables_dir=None):
    """Write the delimited tables for a bundle (or a results dict).

    One file per published artifact: an RMSE-vs-lead table (header-only when
    the pipeline produced no curves), an overlay/sample-trajectory table, and,
    for the smoother benchmark, the k-sweep row and the method x noise grid.
    Rows keep the order the pipeline emitted, so reruns are byte-identical.
    """
    if isinstance(bundle_or_results, dict):
        results = bundle_or_results
        if tables_dir is None:
            raise InvalidInputError("tables_dir is required with a results dict")
    else:
        bundle = Path(bundle_or_results)
        results = _load_json(bundle / "results.json", "bundle results")
        tables_dir = tables_dir or bundle / "tables"
    tables_dir = Path(tables_dir)
    tables_dir.mkdir(parents=True, exist_ok=True)
    written = []

    rows = []
    for curve in results.get("curves", []):
        for t, v in zip(curve["lead_times"], curve["rmse"]):
            rows.append([curve["label"], t, v])
    path = tables_dir / "rmse-curves.csv"
    write_csv(path, ["label", "lead_time", "rmse"], rows)
    written.append(path)

    series = results.get("series", [])
    if results.get("pipeline") == "smoother-benchmark":
        path = tables_dir / "denoise-overlay.csv"
        rows = []
        for s in series:
            tags = _parse_label(s["label"])
            role = s["label"].rsplit("/", 1)[-1]
            for t, v in zip(s["t"], s["values"]):
                rows.append([tags.get("noise", ""), role, t, v])
        write_csv(path, ["noise", "role", "t", "value"], rows)
        written.append(path)
        written.extend(_smoother_tables(results, tables_dir))
    else:
        path = tables_dir / "sample-trajectories.csv"
        rows = []
        for s in series:
            for t, v in zip(s["t"], s["values"]):
                rows.append([s["label"], t, v])
        write_csv(path, ["label", "t", "value"], rows)
        written.append(path)
    return written


def _smoother_tables(results, tables_dir):
    metrics = results.get("metrics")
    if metrics is None:
        metrics = load_metrics(tables_dir.parent)
    smoother, enkf, noisy = {}, {}, {}
    k_order, obs_order = [], []
    # metrics.json is key-sorted; the overlay series keep the configured
    # noise order, which is also the published column order
    noise_order = []
    for s in results.get("series", []):
        noise = _parse_label(s["label"]).get("noise")
        if noise and noise not in noise_order:
            noise_order.append(noise)
    for name, value in metrics.items():
        tags = _parse_label(name)
        noise = tags.get("noise")
        if noise and noise not in noise_order:
            noise_order.append(noise)
        if name.startswith("rmse/smoother/"):
            smoother[(int(tags["k"]), noise)] = value
            if int(tags["k"]) not in k_order:
                k_order.append(int(tags["k"]))
        elif name.startswith("rmse/enkf/"):
            enkf[(int(tags["obs"]), noise)] = value
            if int(tags["obs"]) not in obs_order:
                obs_order.append(int(tags["obs"]))
        elif name.startswith("rmse/noisy/"):
            noisy[noise] = value

    written = []
    first_noise = noise_order[0] if noise_order else ""
    path = tables_dir / "k-sweep.csv"
    ks = sorted(k for k, noise in smoother if noise == first_noise)
    write_csv(
        path,
        [f"k={k}" for k in ks],
        [[smoother[(k, first_noise)] for k in ks]] if ks else [],
    )
    written.append(path)

    path = tables_dir / "noise-comparison.csv"
    rows = []
    cross_ks = sorted(
        {k for k, noise in smoother if all((k, nz) in smoother for nz in noise_order)}
    )
    for k in cross_ks:
        rows.append([f"smoother k={k}"] + [smoother[(k, nz)] for nz in noise_order])
    for n_obs in sorted(obs_order):
        rows.append(
            [f"enkf {n_obs} obs"] + [enkf[(n_obs, nz)] for nz in noise_order]
        )
    if noisy:
        rows.append(["noisy input"] + [noisy[nz] for nz in noise_order])
    write_csv(path, ["method"] + noise_order, rows)
    written.append(path)
    return written


def compare_runs(bundle_a, bundle_b, tolerances):
    """Per-metric comparison of two bundles against declared tolerances.

    `tolerances` is a path or dict: {"default": float | null,
    "metrics": {pattern: float}, "missing": "fail" | "skip"}; patterns are
    shell globs matched in declaration order, first hit wins.  A null default
    means metrics without a pattern must agree exactly; missing="skip"
    compares only metrics present in both bundles, which lets a reference
    bundle carry just its published values.  Returns a machine-readable
    verdict.
    """
    man_a, man_b = load_manifest(bundle_a), load_manifest(bundle_b)
    if man_a["experiment"] != man_b["experiment"]:
        raise InvalidInputError(
            f"experiment ids differ: {man_a['experiment']!r} vs "
            f"{man_b['experiment']!r}"
        )
    if isinstance(tolerances, (str, Path)):
        tolerances = _load_json(tolerances, "tolerance file")
    default = tolerances.get("default", 0.0)
    patterns = tolerances.get("metrics", {})
    missing_mode = tolerances.get("missing", "fail")
    if missing_mode not in ("fail", "skip"):
        raise InvalidInputError(f"unknown missing mode {missing_mode!r}")
    met_a, met_b = load_metrics(bundle_a), load_metrics(bundle_b)

    checks = []
    for name in sorted(set(met_a) | set(met_b)):
        if name not in met_a or name not in met_b:
            if missing_mode == "fail":
                checks.append(
                    {"metric": name, "pass": False, "reason": "missing in one bundle"}
                )
            continue
        tol = default
        for pattern, value in patterns.items():
            if fnmatch.fnmatchcase(name, pattern):
                tol = value
                break
        a, b = met_a[name], met_b[name]
        diff = abs(a - b)
        ok = diff == 0.0 if tol is None else diff <= tol
        checks.append(
            {
                "metric": name,
                "a": a,
                "b": b,
                "diff": diff,
                "tolerance": tol,
                "pass": ok,
            }
        )
    failures = [c["metric"] for c in checks if not c["pass"]]
    return {
        "experiment": man_a["experiment"],
        "n_checked": len(checks),
        "failures": failures,
        "pass": not failures,
        "checks": checks,
    }


def bundle_fingerprint(bundle):
    """Content hash of a bundle with the wall-time field and timing masked."""
    bundle = Path(bundle)
    digest = hashlib.sha256()
    for path in sorted(p for p in bundle.rglob("*") if p.is_file()):
        rel = path.relative_to(bundle).as_posix()
        if rel == "timing.txt":
            continue
        digest.update(rel.encode())
        if rel == "manifest.json":
            manifest = load_manifest(bundle)
            manifest["wall_time_s"] = 0.0
            digest.update(
                json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
            )
        else:
            digest.update(path.read_bytes())
    return digest.hexdigest()

"""Experiment harness: config handling, bundle layout, tables, comparison, CLI."""

import json
import shutil

import pytest

from kaf.cli import main
from kaf.errors import InvalidInputError
from kaf.harness import (
    bundle_fingerprint,
    bundled_config_dir,
    compare_runs,
    config_hash,
    deep_merge,
    emit_tables,
    list_bundled_configs,
    load_config,
    load_manifest,
    load_metrics,
    resolve_config,
    resolve_config_path,
    run_experiment,
    validate_config,
)


def tiny_forecast_cfg():
    """A forecast config small enough to run in about a second."""
    return {
        "schema_version": 1,
        "experiment": "tiny-forecast",
        "pipeline": "forecast",
        "seed": 7,
        "system": {"name": "lorenz96", "n": 5, "obs_dt": 0.015625},
        "sampling": {"source": "invariant", "spinup": 5.0},
        "covariate": {"components": [0], "m": [2]},
        "response": {"components": [0], "leads": {"max": 8, "stride": 4}},
        "estimators": ["nystrom", "smoothing"],
        "data": {"train_sizes": [300], "n_out": 40, "truth": "trajectory"},
        "kernel": {"knn": 32, "L": 16},
        "samples": {"count": 1},
    }


def tiny_smoother_cfg():
    return {
        "schema_version": 1,
        "experiment": "tiny-smoother",
        "pipeline": "smoother-benchmark",
        "seed": 11,
        "system": {"name": "lorenz63", "obs_dt": 0.1},
        "observed_component": 0,
        "train": {"n": 400, "noise": {"kind": "gaussian", "variance": 4.0}},
        "smoother": {"m_s": 4, "ks": [1, 2], "L": 24, "knn": 48},
        "eval": {
            "n_out": 300,
            "k": 2,
            "noise": [
                {"kind": "gaussian", "variance": 4.0, "label": "gaussian"},
                {"kind": "uniform", "low": -3.464, "high": 3.464, "label": "uniform"},
            ],
        },
        "enkf": {
            "ensemble_size": 20,
            "inflation": 1.02,
            "observed_sets": [[0]],
            "spinup_discard": 20,
        },
        "samples": {"overlay_len": 100},
    }


@pytest.fixture(scope="module")
def forecast_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("forecast")
    return run_experiment(tiny_forecast_cfg(), out)


@pytest.fixture(scope="module")
def smoother_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoother")
    return run_experiment(tiny_smoother_cfg(), out)


# ---------------------------------------------------------------- validation


def test_all_bundled_configs_validate_both_tiers():
    names = list_bundled_configs()
    assert len(names) >= 7
    for name in names:
        cfg = load_config(name)
        assert cfg["experiment"] == name
        resolve_config(dict(cfg))
        resolve_config(dict(cfg), fast=True)


def test_unknown_key_rejected():
    cfg = tiny_forecast_cfg()
    cfg["bandwith"] = 2.0  # typo-style stray key must not pass silently
    with pytest.raises(InvalidInputError, match="bandwith"):
        validate_config(cfg)


def test_wrong_schema_version_rejected():
    cfg = tiny_forecast_cfg()
    cfg["schema_version"] = 99
    with pytest.raises(InvalidInputError, match="schema_version"):
        validate_config(cfg)


def test_bad_experiment_slug_rejected():
    cfg = tiny_forecast_cfg()
    cfg["experiment"] = "Tiny Forecast!"
    with pytest.raises(InvalidInputError, match="slug"):
        validate_config(cfg)


def test_bad_seed_rejected():
    cfg = tiny_forecast_cfg()
    cfg["seed"] = -3
    with pytest.raises(InvalidInputError, match="seed"):
        validate_config(cfg)
    cfg["seed"] = "7"
    with pytest.raises(InvalidInputError, match="seed"):
        validate_config(cfg)


def test_component_outside_state_rejected():
    cfg = tiny_forecast_cfg()
    cfg["covariate"]["components"] = [5]  # lorenz96 n=5 has components 0..4
    with pytest.raises(InvalidInputError, match="component"):
        validate_config(cfg)


def test_tiny_train_sizes_rejected():
    cfg = tiny_forecast_cfg()
    cfg["data"]["train_sizes"] = [4]
    with pytest.raises(InvalidInputError, match="train_sizes"):
        validate_config(cfg)


def test_mc_oracle_requires_sample_count():
    cfg = tiny_forecast_cfg()
    cfg["data"]["truth"] = "mc-oracle"
    with pytest.raises(InvalidInputError, match="n_mc"):
        validate_config(cfg)


def test_eval_k_must_be_among_fitted_ks():
    cfg = tiny_smoother_cfg()
    cfg["eval"]["k"] = 3
    with pytest.raises(InvalidInputError):
        validate_config(cfg)


def test_fast_without_declared_overrides_rejected():
    with pytest.raises(InvalidInputError, match="fast_overrides"):
        resolve_config(tiny_forecast_cfg(), fast=True)


def test_resolve_applies_fast_then_overrides_then_seed():
    cfg = tiny_forecast_cfg()
    cfg["fast_overrides"] = {"data": {"n_out": 10}}
    out = resolve_config(cfg, seed=99, fast=True, overrides={"kernel": {"L": 8}})
    assert out["data"]["n_out"] == 10
    assert out["data"]["train_sizes"] == [300]
    assert out["kernel"] == {"knn": 32, "L": 8}
    assert out["seed"] == 99
    assert "fast_overrides" not in out


def test_deep_merge_merges_dicts_and_replaces_leaves():
    base = {"a": {"x": 1, "y": 2}, "b": [1, 2], "c": 3}
    out = deep_merge(base, {"a": {"y": 5}, "b": [9], "d": 4})
    assert out == {"a": {"x": 1, "y": 5}, "b": [9], "c": 3, "d": 4}
    # base must not be mutated
    assert base["a"] == {"x": 1, "y": 2} and base["b"] == [1, 2]


def test_config_hash_ignores_key_order_but_not_values():
    cfg = tiny_forecast_cfg()
    reordered = dict(reversed(list(cfg.items())))
    assert config_hash(cfg) == config_hash(reordered)
    changed = tiny_forecast_cfg()
    changed["seed"] = 8
    assert config_hash(cfg) != config_hash(changed)


def test_resolve_config_path_accepts_paths_and_bundled_stems(tmp_path):
    p = tmp_path / "own.json"
    p.write_text("{}")
    assert resolve_config_path(p) == p
    bundled = resolve_config_path("l63-smoother-k-sweep")
    assert bundled.parent == bundled_config_dir()
    with pytest.raises(InvalidInputError, match="no config"):
        resolve_config_path("no-such-experiment")


def test_load_config_rejects_non_object_json(tmp_path):
    p = tmp_path / "list.json"
    p.write_text("[1, 2]")
    with pytest.raises(InvalidInputError, match="object"):
        load_config(p)


# ------------------------------------------------------------- bundle layout


def test_bundle_layout_and_manifest(forecast_bundle):
    names = {p.name for p in forecast_bundle.iterdir()}
    assert {
        "config.json",
        "manifest.json",
        "metrics.json",
        "results.json",
        "timing.txt",
        "tables",
    } <= names
    man = load_manifest(forecast_bundle)
    assert man["experiment"] == "tiny-forecast"
    assert man["pipeline"] == "forecast"
    assert man["seed"] == 7
    assert man["wall_time_s"] > 0
    cfg = json.loads((forecast_bundle / "config.json").read_text())
    assert man["config_sha256"] == config_hash(cfg)
    assert "numpy" in man["versions"]


def test_metrics_keys_follow_the_naming_scheme(forecast_bundle):
    metrics = load_metrics(forecast_bundle)
    assert metrics, "pipeline emitted no metrics"
    for key, value in metrics.items():
        assert key.startswith("rmse/")
        assert isinstance(value, float)
    # both estimators scored at both leads
    assert "rmse/nystrom/main/lead=0.0625" in metrics
    assert "rmse/smoothing/main/lead=0.1250" in metrics


def test_rerun_wipes_stale_bundle_content(tmp_path):
    cfg = tiny_forecast_cfg()
    cfg["data"]["train_sizes"] = [120]
    cfg["data"]["n_out"] = 10
    bundle = tmp_path / cfg["experiment"]
    bundle.mkdir()
    stale = bundle / "leftover.txt"
    stale.write_text("old run")
    run_experiment(cfg, tmp_path)
    assert not stale.exists()
    assert (bundle / "manifest.json").is_file()


# ------------------------------------------------------------------- tables


def test_rmse_curve_table_matches_metrics(forecast_bundle):
    rows = (forecast_bundle / "tables" / "rmse-curves.csv").read_text().splitlines()
    assert rows[0] == "label,lead_time,rmse"
    metrics = load_metrics(forecast_bundle)
    assert len(rows) - 1 == len(metrics)
    label, lead, value = rows[1].split(",")
    assert float(value) == metrics[f"rmse/{label}/lead={float(lead):.4f}"]


def test_emit_tables_is_idempotent(forecast_bundle):
    table = forecast_bundle / "tables" / "rmse-curves.csv"
    before = table.read_bytes()
    emit_tables(forecast_bundle)
    assert table.read_bytes() == before


def test_emit_tables_on_results_dict_requires_directory():
    with pytest.raises(InvalidInputError, match="tables_dir"):
        emit_tables({"pipeline": "forecast", "curves": {}, "series": {}})


def test_empty_curves_give_header_only_table(tmp_path):
    results = {"pipeline": "forecast", "curves": {}, "series": {}, "metrics": {}}
    emit_tables(results, tables_dir=tmp_path)
    assert (tmp_path / "rmse-curves.csv").read_text() == "label,lead_time,rmse\n"


def test_smoother_tables_layout(smoother_bundle):
    tables = smoother_bundle / "tables"
    sweep = (tables / "k-sweep.csv").read_text().splitlines()
    assert sweep[0] == "k=1,k=2"
    assert len(sweep) == 2

    grid = (tables / "noise-comparison.csv").read_text().splitlines()
    assert grid[0] == "method,gaussian,uniform"
    methods = [line.split(",")[0] for line in grid[1:]]
    # only the shared k appears in the grid; the sweep holds the rest
    assert methods == ["smoother k=2", "enkf 1 obs", "noisy input"]

    overlay = (tables / "denoise-overlay.csv").read_text().splitlines()
    assert overlay[0] == "noise,role,t,value"
    roles = {line.split(",")[1] for line in overlay[1:]}
    assert roles == {"truth", "noisy", "smoothed"}


def test_enkf_settings_recorded_in_bundle(smoother_bundle):
    # the filter settings the run actually used are auditable afterwards
    results = json.loads((smoother_bundle / "results.json").read_text())
    assert results["info"]["enkf/inflation"] == 1.02
    assert results["info"]["enkf/ensemble-size"] == 20


# -------------------------------------------------------------- determinism


def test_same_seed_reproduces_bundle_byte_for_byte(tmp_path):
    cfg = tiny_forecast_cfg()
    cfg["data"]["train_sizes"] = [150]
    cfg["data"]["n_out"] = 15
    a = run_experiment(cfg, tmp_path / "a")
    b = run_experiment(cfg, tmp_path / "b")
    assert bundle_fingerprint(a) == bundle_fingerprint(b)
    c = run_experiment(cfg, tmp_path / "c", seed=8)
    assert bundle_fingerprint(c) != bundle_fingerprint(a)


# --------------------------------------------------------------- comparison


def _copy_with_metric_shift(bundle, tmp_path, shift=None, drop=None):
    clone = tmp_path / "clone" / bundle.name
    shutil.copytree(bundle, clone)
    metrics = load_metrics(clone)
    if shift:
        key = sorted(metrics)[0]
        metrics[key] += shift
    if drop:
        metrics.pop(sorted(metrics)[-1])
    (clone / "metrics.json").write_text(json.dumps(metrics, sort_keys=True))
    return clone


def test_compare_identical_bundles_passes(forecast_bundle):
    report = compare_runs(forecast_bundle, forecast_bundle, {"default": None})
    assert report["pass"]
    assert report["n_checked"] == len(load_metrics(forecast_bundle))
    assert report["failures"] == []


def test_compare_flags_shifted_metric_by_name(forecast_bundle, tmp_path):
    clone = _copy_with_metric_shift(forecast_bundle, tmp_path, shift=1.0)
    shifted = sorted(load_metrics(forecast_bundle))[0]
    report = compare_runs(forecast_bundle, clone, {"default": 0.5})
    assert not report["pass"]
    assert report["failures"] == [shifted]
    # a per-metric pattern can widen the tolerance back out
    report = compare_runs(
        forecast_bundle, clone, {"default": 0.5, "metrics": {shifted: 2.0}}
    )
    assert report["pass"]


def test_compare_missing_metric_fail_vs_skip(forecast_bundle, tmp_path):
    clone = _copy_with_metric_shift(forecast_bundle, tmp_path, drop=True)
    dropped = sorted(load_metrics(forecast_bundle))[-1]
    report = compare_runs(forecast_bundle, clone, {"default": None})
    assert not report["pass"] and dropped in report["failures"]
    report = compare_runs(
        forecast_bundle, clone, {"default": None, "missing": "skip"}
    )
    assert report["pass"]
    assert report["n_checked"] == len(load_metrics(clone))


def test_compare_rejects_mismatched_experiments(forecast_bundle, smoother_bundle):
    with pytest.raises(InvalidInputError, match="experiment ids differ"):
        compare_runs(forecast_bundle, smoother_bundle, {"default": 1.0})


def test_compare_rejects_unknown_missing_mode(forecast_bundle):
    with pytest.raises(InvalidInputError, match="missing"):
        compare_runs(forecast_bundle, forecast_bundle, {"missing": "ignore"})


def test_reference_bundles_self_compare_cleanly():
    for name in ("l63-smoother-k-sweep", "l96-40d-smoother"):
        ref = f"reference/{name}"
        report = compare_runs(ref, ref, f"{ref}/tolerances.json")
        assert report["pass"] and report["n_checked"] >= 12


# ---------------------------------------------------------------------- CLI


def test_cli_run_writes_bundle_and_prints_path(tmp_path, capsys):
    cfg = tiny_forecast_cfg()
    cfg["data"]["train_sizes"] = [120]
    cfg["data"]["n_out"] = 10
    cfg_path = tmp_path / "tiny.json"
    cfg_path.write_text(json.dumps(cfg))
    code = main(["run", str(cfg_path), "--out-dir", str(tmp_path), "--seed", "3"])
    assert code == 0
    printed = capsys.readouterr().out.strip()
    assert printed == str(tmp_path / "tiny-forecast")
    assert load_manifest(printed)["seed"] == 3


def test_cli_run_honors_out_dir_env_var(tmp_path, capsys, monkeypatch):
    cfg = tiny_forecast_cfg()
    cfg["data"]["train_sizes"] = [120]
    cfg["data"]["n_out"] = 10
    cfg_path = tmp_path / "tiny.json"
    cfg_path.write_text(json.dumps(cfg))
    monkeypatch.setenv("KAF_OUT_DIR", str(tmp_path / "from-env"))
    assert main(["run", str(cfg_path)]) == 0
    capsys.readouterr()
    assert (tmp_path / "from-env" / "tiny-forecast" / "metrics.json").is_file()


def test_cli_unknown_config_exits_2_with_structured_error(capsys):
    code = main(["run", "no-such-experiment"])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "InvalidInputError"
    assert "no-such-experiment" in err["message"]


def test_cli_tables_lists_emitted_files(forecast_bundle, capsys):
    assert main(["tables", str(forecast_bundle)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert any(line.endswith("rmse-curves.csv") for line in lines)


def test_cli_compare_exit_codes(forecast_bundle, tmp_path, capsys):
    tol = tmp_path / "tol.json"
    tol.write_text(json.dumps({"default": None}))
    code = main(["compare", str(forecast_bundle), str(forecast_bundle), str(tol)])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["pass"] and summary["failures"] == []

    clone = _copy_with_metric_shift(forecast_bundle, tmp_path, shift=5.0)
    code = main(["compare", str(forecast_bundle), str(clone), str(tol)])
    assert code == 4
    summary = json.loads(capsys.readouterr().out)
    assert summary["failures"]

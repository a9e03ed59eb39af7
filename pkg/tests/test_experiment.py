import csv
import json

import numpy as np
import pytest

from mcrc.errors import ConfigError, ResourceCapError, UndefinedMetricError, ValidationError
from mcrc.experiment import (
    ExperimentConfig,
    ExperimentResult,
    TaskSpec,
    crisscross,
    evaluate_pipeline,
    filter_sweep,
    load_bundled,
    load_config,
    readout_from_trace,
    run,
    simulate,
    with_seed,
)
from mcrc.params import PUBLISHED_SETS, ChannelParams
from mcrc.reservoir import ReservoirConfig, moving_average_filter
from mcrc.stochastic import StochasticConfig, run_stochastic_replicates
from mcrc.tasks import TaskSeries, nrmse


def write(tmp_path, text, name="cfg.json"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def small_evaluate(**extra):
    cfg = {"mode": "evaluate", "task": {"kind": "sine_to_square", "num_symbols": 200},
           "channel": "sine_to_square"}
    cfg.update(extra)
    return cfg


# --- config parsing --------------------------------------------------------

def test_error_is_anchored_to_the_offending_line(tmp_path):
    text = '{\n  "mode": "evaluate",\n  "task": {"kind": "sine_to_square"},\n  "channel": "sine_to_square",\n  "reservoir": {"virtual_nodes_M": 0}\n}\n'
    with pytest.raises(ConfigError, match=r"cfg\.json:5: reservoir:"):
        load_config(write(tmp_path, text))


def test_invalid_json_reports_line_and_column(tmp_path):
    with pytest.raises(ConfigError, match=r"cfg\.json:3:\d+: invalid JSON"):
        load_config(write(tmp_path, '{\n "mode": "evaluate",\n oops\n}'))


def test_missing_section_is_named(tmp_path):
    with pytest.raises(ConfigError, match="channel: section is required in evaluate mode"):
        load_config(write(tmp_path, json.dumps({"mode": "evaluate", "task": {"kind": "forecast_mg"}})))


@pytest.mark.parametrize("doc, needle", [
    ({"mode": "evaluate", "bogus": 1}, "bogus: unknown section"),
    ({"mode": "nonsense"}, "unknown mode"),
    ({"schema_version": 9, "mode": "evaluate"}, "schema version"),
    ({"task": {"kind": "forecast_mg"}}, "mode: missing"),
    (small_evaluate(rng_seed=-1), "rng_seed"),
    (small_evaluate(channel="no_such_preset"), "unknown preset"),
    (small_evaluate(reservoir={"memory_window_L": 3}), "memory_window_L"),
    (small_evaluate(windows=[1000, 500]), "ascending"),
    (small_evaluate(engine="quantum"), "engine"),
    ({"mode": "optimize", "task": {"kind": "forecast_mg"}, "search": {"budget": 5, "init": 10}}, "budget >= init"),
    ({"mode": "crisscross", "crisscross": {"param_sets": {"forecast_mg": "forecast_mg"},
                                           "tasks": [{"kind": "mg_cubed"}]}}, "no parameter set"),
])
def test_bad_configs_rejected(tmp_path, doc, needle):
    with pytest.raises(ConfigError, match=needle):
        load_config(write(tmp_path, json.dumps(doc)))


def test_unreadable_path():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/cfg.json")


def test_channel_overrides_on_preset(tmp_path):
    doc = small_evaluate(channel={"preset": "forecast_mg", "distance_um": 7.0, "k_off": 3.0})
    cfg = load_config(write(tmp_path, json.dumps(doc)))
    assert cfg.channel.distance_d == pytest.approx(7e-6)
    assert cfg.channel.k_off == 3.0
    assert cfg.channel.k_on == PUBLISHED_SETS["forecast_mg"].k_on


def test_stochastic_seed_follows_run_seed(tmp_path):
    cfg = load_config(write(tmp_path, json.dumps(small_evaluate(rng_seed=7))))
    assert cfg.stochastic.rng_seed == 7
    moved = with_seed(cfg, 11)
    assert moved.rng_seed == 11 and moved.stochastic.rng_seed == 11


@pytest.mark.parametrize("name", ["evaluate_forecast", "evaluate_sine", "evaluate_cubed",
                                  "optimize_forecast", "optimize_sine", "optimize_cubed",
                                  "crisscross", "crisscross_published", "stochastic_compare",
                                  "filter_sweep"])
def test_bundled_configs_parse(name):
    cfg = load_config(load_bundled(name))
    assert isinstance(cfg, ExperimentConfig)


def test_snapshot_reloads_to_same_config(tmp_path):
    cfg = load_config(load_bundled("stochastic_compare"))
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.channel == cfg.channel and again.task == cfg.task
    assert again.stochastic == cfg.stochastic and again.reservoir == cfg.reservoir


# --- results ---------------------------------------------------------------

def test_result_json_round_trip():
    r = ExperimentResult("evaluate", nrmse_det=0.25, artifacts={"a": "b"}, summary={"x": [1, 2]})
    back = ExperimentResult.from_json(r.to_json())
    assert back == r


def test_result_rejects_negative_nrmse():
    with pytest.raises(ValidationError):
        ExperimentResult("evaluate", nrmse_det=-0.1)


# --- pipelines -------------------------------------------------------------

def test_evaluate_writes_artifacts_and_score_recomputes(tmp_path):
    cfg = load_config(write(tmp_path, json.dumps(small_evaluate())))
    res = run(cfg, tmp_path / "out")
    out = tmp_path / "out"
    for rel in ("config.json", "result.json", res.artifacts["trace"], res.artifacts["predictions"]):
        assert (out / rel).exists()
    with open(out / res.artifacts["predictions"]) as fh:
        rows = list(csv.DictReader(fh))
    y = np.array([float(r["y"]) for r in rows])
    yhat = np.array([float(r["y_hat"]) for r in rows])
    assert nrmse(y, yhat) == pytest.approx(res.nrmse_det, rel=1e-12)
    on_disk = ExperimentResult.from_json((out / "result.json").read_text())
    assert on_disk.nrmse_det == res.nrmse_det


def test_evaluate_pipeline_matches_driver(tmp_path):
    cfg = load_config(write(tmp_path, json.dumps(small_evaluate())))
    direct = evaluate_pipeline(cfg.channel, cfg.task.build(), cfg.reservoir)
    assert direct.nrmse_det == run(cfg, tmp_path / "o").nrmse_det


def test_constant_targets_raise_undefined_metric():
    p = PUBLISHED_SETS["forecast_mg"]
    u = np.random.default_rng(0).random(200)
    task = TaskSeries(u, np.full(200, 0.5), "forecast_mg", 6)
    with pytest.raises(UndefinedMetricError):
        evaluate_pipeline(p, task)


def test_unknown_engine():
    task = TaskSpec("sine_to_square", 100).build()
    with pytest.raises(ValidationError):
        simulate(PUBLISHED_SETS["sine_to_square"], task, engine="quantum")


def test_crisscross_diagonal_matches_single_runs():
    sets = [PUBLISHED_SETS["forecast_mg"], PUBLISHED_SETS["sine_to_square"]]
    tasks = [TaskSpec("forecast_mg", 300).build(), TaskSpec("sine_to_square", 300).build()]
    m = crisscross(sets, tasks)
    assert m.shape == (2, 2)
    for i in range(2):
        assert m[i, i] == evaluate_pipeline(sets[i], tasks[i]).nrmse_det
    assert not np.allclose(m, m.T)


def _small_stochastic():
    p = ChannelParams(k_on=1e-19, k_off=1.0, symbol_duration_T=1.0, distance_d=3e-6,
                      n_max=800, diffusion_D=1e-11)
    task = TaskSpec("sine_to_square", 120).build()
    cfg = StochasticConfig(num_receptors=100, num_replicates=2, steps_per_symbol=50, rng_seed=3)
    return p, task, cfg


def test_filter_sweep_unit_window_equals_unfiltered_and_reuses_traces():
    p, task, scfg = _small_stochastic()
    res = ReservoirConfig()
    reps = run_stochastic_replicates(p, task.inputs, scfg)
    table, raw = filter_sweep(p, task, res, scfg, windows=(1, 10, 40), traces=reps)
    assert [w for w, _ in table] == [0, 1, 10, 40]
    assert table[0][1] == table[1][1]
    again, _ = filter_sweep(p, task, res, scfg, windows=(1, 10, 40))
    assert again == table
    filt = readout_from_trace(moving_average_filter(raw, 10), p, task, res)
    assert table[2][1] == filt.nrmse
    with pytest.raises(ValidationError):
        filter_sweep(p, task, res, scfg, windows=(10, 1), traces=reps)


def test_stochastic_evaluate_reports_raw_and_filtered():
    p, task, scfg = _small_stochastic()
    r = evaluate_pipeline(p, task, ReservoirConfig(filter_window_W=10), "stochastic", scfg)
    assert r.nrmse_det is None and r.nrmse_stoch_raw >= 0 and r.nrmse_stoch_filtered >= 0
    assert r.filter_window == 10


def test_stochastic_compare_and_sweep_drivers(tmp_path):
    doc = {"mode": "stochastic_compare", "task": {"kind": "sine_to_square", "num_symbols": 120},
           "channel": {"k_on": 1e-19, "k_off": 1.0, "symbol_duration_T": 1.0, "distance_um": 3.0,
                       "n_max": 800, "diffusion_D": 1e-11},
           "stochastic": {"num_receptors": 100, "num_replicates": 2, "steps_per_symbol": 50},
           "filter_window": 10}
    res = run(load_config(write(tmp_path, json.dumps(doc))), tmp_path / "sc")
    assert res.nrmse_det is not None and res.nrmse_stoch_filtered is not None
    assert (tmp_path / "sc" / res.artifacts["stochastic_trace_rep1"]).exists()
    doc["mode"] = "filter_sweep"
    doc.pop("filter_window")
    doc["windows"] = [1, 10]
    sw = run(load_config(write(tmp_path, json.dumps(doc))), tmp_path / "fs")
    assert sw.nrmse_stoch_raw == res.nrmse_stoch_raw  # same seed, same replicates
    assert [r[0] for r in sw.summary["table"]] == [0, 1, 10]


def test_stochastic_resource_cap_propagates(tmp_path):
    p, task, scfg = _small_stochastic()
    with pytest.raises(ResourceCapError):
        evaluate_pipeline(p, task, engine="stochastic",
                          stochastic=scfg.replace(max_particle_steps_per_second=10.0))


@pytest.mark.slow
def test_optimize_improves_on_initial_design(tmp_path):
    doc = {"mode": "optimize", "rng_seed": 0,
           "task": {"kind": "sine_to_square", "num_symbols": 400},
           "search": {"budget": 30, "init": 10}}
    res = run(load_config(write(tmp_path, json.dumps(doc))), tmp_path / "opt")
    out = tmp_path / "opt"
    assert res.nrmse_det <= res.summary["init_best"]
    lines = (out / "trials.jsonl").read_text().strip().splitlines()
    assert len(lines) == 30
    best = load_config(str(out / "best_config.json"))
    assert evaluate_pipeline(best.channel, best.task.build(), best.reservoir).nrmse_det == pytest.approx(
        res.nrmse_det, rel=1e-12)
    with open(out / "parallel_coordinates.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10 and float(rows[0]["nrmse"]) == res.nrmse_det
    assert float(rows[0]["K_D"]) == pytest.approx(float(rows[0]["k_off"]) / float(rows[0]["k_on"]))

"""End-to-end pipelines, study drivers and run artifacts.

A run is described by one JSON document (see :class:`ExperimentConfig`) and
writes everything it produces into a single output directory::

    out/
      config.json            snapshot of the resolved configuration
      result.json            ExperimentResult
      traces/                bound-fraction and prediction CSVs
      trials.jsonl           optimizer log (optimize mode)
      parallel_coordinates.csv, crisscross.csv, filter_sweep.csv
"""

import csv
import json
import logging
import os
import re
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import bayesopt
from .errors import ConfigError, ValidationError
from .params import MICRON, PUBLISHED_SETS, ChannelParams
from .receptor import BoundFractionTrace, integrate_binding
from .reservoir import (
    ReservoirConfig,
    assemble_dataset,
    build_states,
    moving_average_filter,
    predict,
    train_readout,
)
from .stochastic import StochasticConfig, run_stochastic, run_stochastic_replicates
from .tasks import DEFAULT_HORIZON, TASK_KINDS, make_task, nrmse

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MODES = ("evaluate", "optimize", "crisscross", "stochastic_compare", "filter_sweep")
ENGINES = ("deterministic", "stochastic")
DEFAULT_WINDOWS = (500, 1000, 2000, 4000, 8000)

# sections each mode cannot run without
REQUIRED_SECTIONS = {
    "evaluate": ("task", "channel"),
    "optimize": ("task", "search"),
    "crisscross": ("crisscross",),
    "stochastic_compare": ("task", "channel"),
    "filter_sweep": ("task", "channel"),
}


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class TaskSpec:
    """How to build the benchmark series for a run."""

    kind: str
    num_symbols: int = 2000
    horizon_P: int = None
    seed: int = 0
    period: float = 20.0
    fit_fraction: float = 0.7

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValidationError(f"unknown task kind {self.kind!r}; expected one of {TASK_KINDS}")
        if int(self.num_symbols) != self.num_symbols or self.num_symbols < 1:
            raise ValidationError("num_symbols must be a positive integer")
        if self.horizon_P is None:
            object.__setattr__(self, "horizon_P", DEFAULT_HORIZON[self.kind])

    def build(self):
        return make_task(
            self.kind, int(self.num_symbols), P=self.horizon_P, seed=self.seed,
            period=self.period, fit_fraction=self.fit_fraction,
        )


@dataclass(frozen=True)
class SearchSpec:
    budget: int = 200
    init: int = 20
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (int(self.budget) == self.budget and int(self.init) == self.init):
            raise ValidationError("budget and init must be integers")
        if not self.budget >= self.init >= 2:
            raise ValidationError("need budget >= init >= 2")

    def space(self):
        bounds = {}
        for name, pair in self.bounds.items():
            if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
                raise ValidationError(f"bounds for {name} must be a [lower, upper] pair")
            bounds[name] = tuple(float(v) for v in pair)
        if "distance_um" in bounds:
            lo, hi = bounds.pop("distance_um")
            bounds["distance_d"] = (lo * MICRON, hi * MICRON)
        return bayesopt.SearchSpace.channel(**bounds)


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved run description.

    ``channel`` may be omitted in modes that search or compare parameter
    sets. ``param_sets`` maps task kinds to parameter sets for criss-cross
    runs; ``tasks`` lists the tasks evaluated there.
    """

    mode: str
    task: TaskSpec = None
    channel: ChannelParams = None
    reservoir: ReservoirConfig = field(default_factory=ReservoirConfig)
    stochastic: StochasticConfig = field(default_factory=StochasticConfig)
    search: SearchSpec = None
    engine: str = "deterministic"
    windows: tuple = DEFAULT_WINDOWS
    filter_window: int = 2000
    param_sets: dict = None
    tasks: tuple = None
    rng_seed: int = 0
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        out = {"schema_version": self.schema_version, "mode": self.mode, "rng_seed": self.rng_seed}
        if self.task is not None:
            out["task"] = asdict(self.task)
        if self.channel is not None:
            out["channel"] = self.channel.to_dict()
        out["reservoir"] = {
            k: v for k, v in asdict(self.reservoir).items() if k != "memory_window_L"
        }
        out["stochastic"] = asdict(self.stochastic)
        if self.search is not None:
            out["search"] = asdict(self.search)
        out["engine"] = self.engine
        out["windows"] = list(self.windows)
        out["filter_window"] = self.filter_window
        if self.param_sets is not None:
            out["crisscross"] = {
                "param_sets": {k: p.to_dict() for k, p in self.param_sets.items()},
                "tasks": [asdict(t) for t in self.tasks],
            }
        return out

    @classmethod
    def from_dict(cls, data, source=None, path="<config>", mode=None):
        return _parse_config(data, source, path, mode)


def _line_of(source, key):
    """1-based line of the first ``"key"`` in the JSON text, else 1."""
    if source:
        m = re.search(r'"%s"\s*:' % re.escape(key), source)
        if m:
            return source.count("\n", 0, m.start()) + 1
    return 1


def _parse_config(data, source, path, mode):
    def fail(key, msg):
        raise ConfigError(f"{path}:{_line_of(source, key)}: {key}: {msg}")

    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: top level must be a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        fail("schema_version", f"unsupported schema version {version!r}; expected {SCHEMA_VERSION}")
    mode = mode or data.get("mode")
    if mode is None:
        raise ConfigError(f"{path}:1: mode: missing; expected one of {MODES}")
    mode = mode.replace("-", "_")
    if mode not in MODES:
        fail("mode", f"unknown mode {mode!r}; expected one of {MODES}")
    known = {
        "schema_version", "mode", "rng_seed", "task", "channel", "reservoir",
        "stochastic", "search", "engine", "windows", "filter_window", "crisscross",
        "description",
    }
    for key in data:
        if key not in known:
            fail(key, "unknown section")
    for section in REQUIRED_SECTIONS[mode]:
        if section not in data:
            raise ConfigError(
                f"{path}:1: {section}: section is required in {mode} mode but missing"
            )

    def build(key, factory, payload, allow_name=False):
        if not (isinstance(payload, dict) or (allow_name and isinstance(payload, str))):
            fail(key, "must be a JSON object")
        try:
            return factory(payload)
        except (TypeError, ValueError) as exc:
            fail(key, str(exc))

    kw = {"mode": mode}
    rng_seed = data.get("rng_seed", 0)
    if isinstance(rng_seed, bool) or not isinstance(rng_seed, int) or rng_seed < 0:
        fail("rng_seed", "must be a non-negative integer")
    kw["rng_seed"] = rng_seed
    if "task" in data:
        kw["task"] = build("task", lambda d: TaskSpec(**d), data["task"])
    if "channel" in data:
        kw["channel"] = build("channel", _channel_from, data["channel"], True)
    if "reservoir" in data:
        res = data["reservoir"]
        if isinstance(res, dict) and "memory_window_L" in res:
            fail("memory_window_L", "belongs to the channel parameters, not the reservoir")
        kw["reservoir"] = build("reservoir", lambda d: ReservoirConfig(**d), res)
    stoch = data.get("stochastic", {})
    kw["stochastic"] = build(
        "stochastic", lambda d: StochasticConfig(**{"rng_seed": rng_seed, **d}), stoch
    )
    if "search" in data:
        kw["search"] = build("search", lambda d: SearchSpec(**d), data["search"])
        try:
            kw["search"].space()
        except (TypeError, ValueError) as exc:
            fail("bounds", str(exc))
    if "engine" in data:
        if data["engine"] not in ENGINES:
            fail("engine", f"expected one of {ENGINES}")
        kw["engine"] = data["engine"]
    if "windows" in data:
        w = data["windows"]
        if not (isinstance(w, list) and w and all(isinstance(v, int) and v >= 1 for v in w)):
            fail("windows", "must be a non-empty list of integers >= 1")
        if sorted(w) != w:
            fail("windows", "must be sorted ascending")
        kw["windows"] = tuple(w)
    if "filter_window" in data:
        w = data["filter_window"]
        if not isinstance(w, int) or w < 0:
            fail("filter_window", "must be a non-negative integer")
        kw["filter_window"] = w
    if "crisscross" in data:
        cc = data["crisscross"]
        if not isinstance(cc, dict) or "param_sets" not in cc:
            fail("crisscross", "needs a param_sets object")
        sets = cc["param_sets"]
        if not isinstance(sets, dict) or not sets:
            fail("param_sets", "must map task kinds to parameter sets")
        kw["param_sets"] = {
            name: build("param_sets", _channel_from, p, True) for name, p in sets.items()
        }
        task_list = cc.get("tasks")
        if task_list is None:
            n = cc.get("num_symbols", 2000)
            task_list = [{"kind": k, "num_symbols": n} for k in kw["param_sets"]]
        if not isinstance(task_list, list):
            fail("tasks", "must be a list of task objects")
        kw["tasks"] = tuple(build("tasks", lambda d: TaskSpec(**d), t) for t in task_list)
        missing = [t.kind for t in kw["tasks"] if t.kind not in kw["param_sets"]]
        if missing:
            fail("param_sets", f"no parameter set for task(s) {missing}")
    return ExperimentConfig(**kw)


def _channel_from(payload):
    """Parameter set from a dict or the name of a built-in preset."""
    if isinstance(payload, str):
        if payload not in PUBLISHED_SETS:
            raise ValidationError(f"unknown preset {payload!r}; expected one of {list(PUBLISHED_SETS)}")
        return PUBLISHED_SETS[payload]
    payload = dict(payload)
    preset = payload.pop("preset", None)
    if preset is not None:
        base = _channel_from(preset).to_dict()
        if "distance_um" in payload:
            base.pop("distance_d")
        base.update(payload)
        payload = base
    return ChannelParams.from_dict(payload)


def load_config(path, mode=None):
    """Read and validate a config file; errors carry ``path:line`` anchors."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    return _parse_config(data, text, path, mode)


# --------------------------------------------------------------------------
# results


@dataclass
class ExperimentResult:
    """Summary numbers of one run plus pointers to its artifacts."""

    mode: str
    nrmse_det: float = None
    nrmse_stoch_raw: float = None
    nrmse_stoch_filtered: float = None
    filter_window: int = None
    artifacts: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    config: dict = None

    def __post_init__(self):
        for name in ("nrmse_det", "nrmse_stoch_raw", "nrmse_stoch_filtered"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValidationError(f"{name} must be >= 0, got {v!r}")

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(**{f.name: d.get(f.name) for f in fields(cls) if f.name in d})


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass(frozen=True, eq=False)
class PipelineOutput:
    """Everything a single pipeline evaluation produced."""

    nrmse: float
    trace: BoundFractionTrace
    symbols: np.ndarray
    targets: np.ndarray
    predictions: np.ndarray
    weights: object


# --------------------------------------------------------------------------
# pipelines


def simulate(params, task, engine="deterministic", stochastic=None, backend=None):
    """Bound-fraction trace for the task's inputs under the chosen engine."""
    if engine == "deterministic":
        return integrate_binding(params, task.inputs, backend=backend)
    if engine == "stochastic":
        cfg = stochastic if stochastic is not None else StochasticConfig()
        return run_stochastic(params, task.inputs, cfg, backend=backend)
    raise ValidationError(f"unknown engine {engine!r}; expected one of {ENGINES}")


def readout_from_trace(trace, params, task, reservoir):
    """Filter (optionally), sample, train on the leading split, score the rest."""
    reservoir = reservoir.replace(memory_window_L=int(params.memory_window_L))
    if reservoir.filter_window_W > 0:
        trace = moving_average_filter(trace, reservoir.filter_window_W)
    states = build_states(trace, params, reservoir, len(task))
    dataset = assemble_dataset(states, task.targets, reservoir)
    train, test = dataset.split(reservoir.train_fraction)
    weights = train_readout(train, reservoir)
    yhat = predict(weights, test.states)
    score = nrmse(test.targets, yhat)
    return PipelineOutput(score, trace, test.symbols, test.targets, yhat, weights)


def evaluate_pipeline(params, task, reservoir=None, engine="deterministic", stochastic=None,
                      backend=None):
    """Run the channel as a reservoir on ``task`` and score the test split.

    With the stochastic engine the raw replicate-averaged trace is scored and,
    when ``reservoir.filter_window_W > 0``, the filtered trace as well.
    """
    reservoir = reservoir if reservoir is not None else ReservoirConfig()
    if engine == "deterministic":
        out = readout_from_trace(simulate(params, task, engine), params, task, reservoir)
        return ExperimentResult("evaluate", nrmse_det=out.nrmse,
                                filter_window=reservoir.filter_window_W or None)
    raw = simulate(params, task, engine, stochastic, backend)
    res = ExperimentResult("evaluate")
    res.nrmse_stoch_raw = readout_from_trace(
        raw, params, task, reservoir.replace(filter_window_W=0)
    ).nrmse
    if reservoir.filter_window_W > 0:
        res.nrmse_stoch_filtered = readout_from_trace(raw, params, task, reservoir).nrmse
        res.filter_window = reservoir.filter_window_W
    return res


def crisscross(param_sets, tasks, reservoir=None):
    """NRMSE of every parameter set (rows) on every task (columns)."""
    reservoir = reservoir if reservoir is not None else ReservoirConfig()
    tasks = list(tasks)
    param_sets = list(param_sets)
    matrix = np.empty((len(param_sets), len(tasks)))
    for i, params in enumerate(param_sets):
        for j, task in enumerate(tasks):
            trace = simulate(params, task)
            matrix[i, j] = readout_from_trace(trace, params, task, reservoir).nrmse
    return matrix


def filter_sweep(params, task, reservoir, stochastic, windows=DEFAULT_WINDOWS, traces=None,
                 backend=None):
    """Per-window NRMSE of the stochastic pipeline, W=0 being unfiltered.

    The replicate traces are simulated once (or taken from ``traces``) and
    reused for every window. Returns ``(table, raw_trace)`` where ``table``
    is a list of ``(W, nrmse)`` rows.
    """
    windows = list(windows)
    if windows != sorted(windows) or any(int(w) != w or w < 1 for w in windows):
        raise ValidationError("windows must be ascending integers >= 1")
    if traces is None:
        traces = run_stochastic_replicates(params, task.inputs, stochastic, backend=backend)
    raw = traces[0].with_samples(np.mean([t.samples for t in traces], axis=0))
    table = []
    for W in [0] + windows:
        cfg = reservoir.replace(filter_window_W=int(W))
        table.append((int(W), readout_from_trace(raw, params, task, cfg).nrmse))
    return table, raw


def objective_for(task, reservoir=None):
    """Deterministic test NRMSE as a function of a parameter dict."""
    reservoir = reservoir if reservoir is not None else ReservoirConfig()

    def objective(values):
        params = ChannelParams.from_dict(values)
        return readout_from_trace(simulate(params, task), params, task, reservoir).nrmse

    return objective


# --------------------------------------------------------------------------
# artifact writers


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_predictions(path, out):
    _write_csv(path, ["n", "y", "y_hat"],
               zip(out.symbols.tolist(), out.targets, out.predictions))


def write_parallel_coordinates(path, trials, top=10):
    """Top trials with natural-unit parameters and K_D = k_off / k_on."""
    ok = [t for t in trials if t.status == "ok"]
    ok.sort(key=lambda t: (t.objective, t.index))
    names = list(ok[0].params) if ok else []
    header = ["rank", "trial"] + names + ["K_D", "nrmse"]
    rows = []
    for rank, t in enumerate(ok[:top], 1):
        vals = [t.params[n] for n in names]
        rows.append([rank, t.index] + vals + [t.params["k_off"] / t.params["k_on"], t.objective])
    _write_csv(path, header, rows)


def write_matrix(path, row_names, col_names, matrix):
    _write_csv(path, ["param_set"] + list(col_names),
               ([r] + list(map(float, m)) for r, m in zip(row_names, matrix)))


# --------------------------------------------------------------------------
# mode drivers


def run(config, out_dir):
    """Execute ``config`` and write its artifacts under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    traces_dir = os.path.join(out_dir, "traces")
    os.makedirs(traces_dir, exist_ok=True)
    snapshot = config.to_dict()
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(snapshot, fh, indent=2, default=_json_default)
    t0 = time.perf_counter()
    driver = {
        "evaluate": _run_evaluate,
        "optimize": _run_optimize,
        "crisscross": _run_crisscross,
        "stochastic_compare": _run_stochastic_compare,
        "filter_sweep": _run_filter_sweep,
    }[config.mode]
    result = driver(config, out_dir, traces_dir)
    result.config = snapshot
    result.summary["runtime_s"] = time.perf_counter() - t0
    result.artifacts = {k: os.path.relpath(v, out_dir) for k, v in result.artifacts.items()}
    result.artifacts.setdefault("config", "config.json")
    with open(os.path.join(out_dir, "result.json"), "w") as fh:
        fh.write(result.to_json())
    return result


def _run_evaluate(config, out_dir, traces_dir):
    params, task = config.channel, config.task.build()
    res = ExperimentResult("evaluate")
    if config.engine == "deterministic":
        trace = simulate(params, task)
        out = readout_from_trace(trace, params, task, config.reservoir)
        res.nrmse_det = out.nrmse
    else:
        trace = simulate(params, task, "stochastic", config.stochastic)
        raw = readout_from_trace(trace, params, task, config.reservoir.replace(filter_window_W=0))
        res.nrmse_stoch_raw = raw.nrmse
        out = raw
        if config.reservoir.filter_window_W > 0:
            out = readout_from_trace(trace, params, task, config.reservoir)
            res.nrmse_stoch_filtered = out.nrmse
            res.filter_window = config.reservoir.filter_window_W
    trace_path = os.path.join(traces_dir, f"bound_{config.engine}.csv")
    trace.to_csv(trace_path)
    pred_path = os.path.join(traces_dir, "predictions.csv")
    write_predictions(pred_path, out)
    res.artifacts = {"trace": trace_path, "predictions": pred_path}
    res.summary = {"task": config.task.kind, "engine": config.engine,
                   "test_symbols": int(out.symbols.size)}
    return res


def _run_optimize(config, out_dir, traces_dir):
    task = config.task.build()
    space = config.search.space()
    objective = objective_for(task, config.reservoir)
    log_path = os.path.join(out_dir, "trials.jsonl")
    with open(log_path, "w") as fh:
        trials = bayesopt.optimize(
            objective, space, config.search.budget, config.search.init,
            rng_seed=config.rng_seed, log_file=fh,
        )
    pc_path = os.path.join(out_dir, "parallel_coordinates.csv")
    write_parallel_coordinates(pc_path, trials)
    best = trials[0]
    init_best = min(
        (t.objective for t in trials if t.index < config.search.init and t.status == "ok"),
        default=float("nan"),
    )
    best_params = ChannelParams.from_dict(best.params)
    out = readout_from_trace(simulate(best_params, task), best_params, task, config.reservoir)
    best_trace = os.path.join(traces_dir, "bound_best.csv")
    out.trace.to_csv(best_trace)
    pred_path = os.path.join(traces_dir, "predictions_best.csv")
    write_predictions(pred_path, out)
    best_cfg = os.path.join(out_dir, "best_config.json")
    with open(best_cfg, "w") as fh:
        json.dump({
            "schema_version": SCHEMA_VERSION, "mode": "evaluate",
            "task": asdict(config.task), "channel": best_params.to_dict(),
            "reservoir": {k: v for k, v in asdict(config.reservoir).items()
                          if k != "memory_window_L"},
        }, fh, indent=2)
    top = [t for t in trials if t.status == "ok"][:10]
    medians = {n: float(np.median([t.params[n] for t in top])) for n in space.names}
    return ExperimentResult(
        "optimize", nrmse_det=best.objective,
        artifacts={"trials": log_path, "parallel_coordinates": pc_path,
                   "best_trace": best_trace, "predictions": pred_path, "best_config": best_cfg},
        summary={
            "task": config.task.kind,
            "budget": config.search.budget,
            "init": config.search.init,
            "best_trial": best.index,
            "best_params": best.params,
            "init_best": init_best,
            "failed_trials": sum(t.status != "ok" for t in trials),
            "top10_median": medians,
        },
    )


def _run_crisscross(config, out_dir, traces_dir):
    names = [t.kind for t in config.tasks]
    sets = [config.param_sets[n] for n in names]
    tasks = [t.build() for t in config.tasks]
    matrix = crisscross(sets, tasks, config.reservoir)
    path = os.path.join(out_dir, "crisscross.csv")
    write_matrix(path, names, names, matrix)
    matched = all(int(np.argmin(matrix[:, j])) == j for j in range(len(names)))
    return ExperimentResult(
        "crisscross",
        artifacts={"matrix": path},
        summary={"rows": names, "columns": names, "matrix": matrix.tolist(),
                 "diagonal_is_column_min": matched},
    )


def _run_stochastic_compare(config, out_dir, traces_dir):
    params, task = config.channel, config.task.build()
    det = simulate(params, task)
    det_out = readout_from_trace(det, params, task, config.reservoir.replace(filter_window_W=0))
    reps = run_stochastic_replicates(params, task.inputs, config.stochastic)
    raw = reps[0].with_samples(np.mean([t.samples for t in reps], axis=0))
    raw_out = readout_from_trace(raw, params, task, config.reservoir.replace(filter_window_W=0))
    W = config.filter_window
    res = ExperimentResult("stochastic_compare", nrmse_det=det_out.nrmse,
                           nrmse_stoch_raw=raw_out.nrmse)
    art = {}
    det_path = os.path.join(traces_dir, "bound_deterministic.csv")
    det.to_csv(det_path)
    art["deterministic_trace"] = det_path
    for r, t in enumerate(reps):
        p = os.path.join(traces_dir, f"bound_stochastic_rep{r}.csv")
        t.to_csv(p)
        art[f"stochastic_trace_rep{r}"] = p
    p = os.path.join(traces_dir, "bound_stochastic_mean.csv")
    raw.to_csv(p)
    art["stochastic_trace_mean"] = p
    for name, out in (("deterministic", det_out), ("stochastic_raw", raw_out)):
        p = os.path.join(traces_dir, f"predictions_{name}.csv")
        write_predictions(p, out)
        art[f"predictions_{name}"] = p
    if W > 0:
        filt_out = readout_from_trace(raw, params, task,
                                      config.reservoir.replace(filter_window_W=W))
        res.nrmse_stoch_filtered = filt_out.nrmse
        res.filter_window = W
        p = os.path.join(traces_dir, "bound_stochastic_filtered.csv")
        filt_out.trace.to_csv(p)
        art["stochastic_trace_filtered"] = p
        p = os.path.join(traces_dir, "predictions_stochastic_filtered.csv")
        write_predictions(p, filt_out)
        art["predictions_stochastic_filtered"] = p
    res.artifacts = art
    res.summary = {"task": config.task.kind, "replicates": config.stochastic.num_replicates,
                   "trace_dt": raw.dt}
    return res


def _run_filter_sweep(config, out_dir, traces_dir):
    params, task = config.channel, config.task.build()
    reps = run_stochastic_replicates(params, task.inputs, config.stochastic)
    table, raw = filter_sweep(params, task, config.reservoir, config.stochastic,
                              config.windows, traces=reps)
    path = os.path.join(out_dir, "filter_sweep.csv")
    _write_csv(path, ["W", "nrmse"], table)
    raw_path = os.path.join(traces_dir, "bound_stochastic_mean.csv")
    raw.to_csv(raw_path)
    best_W, best = min(table[1:], key=lambda r: (r[1], r[0]))
    return ExperimentResult(
        "filter_sweep",
        nrmse_stoch_raw=table[0][1],
        nrmse_stoch_filtered=best,
        filter_window=best_W,
        artifacts={"table": path, "stochastic_trace_mean": raw_path},
        summary={"task": config.task.kind, "table": [list(r) for r in table],
                 "replicates": config.stochastic.num_replicates},
    )


def with_seed(config, seed):
    """Copy of ``config`` with ``rng_seed`` (and the stochastic seed) replaced."""
    if seed is None:
        return config
    return replace(config, rng_seed=int(seed),
                   stochastic=config.stochastic.replace(rng_seed=int(seed)))


def load_bundled(name):
    """Path of a config shipped with the package, e.g. ``"evaluate_forecast"``."""
    here = os.path.join(os.path.dirname(__file__), "configs", name + ".json")
    if not os.path.exists(here):
        raise ConfigError(f"no bundled config named {name!r}")
    return here

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcrc.errors import ValidationError
from mcrc.params import ChannelParams
from mcrc.receptor import BoundFractionTrace, integrate_binding
from mcrc.reservoir import (
    ReadoutWeights,
    ReservoirConfig,
    ReservoirDataset,
    assemble_dataset,
    build_states,
    moving_average_filter,
    predict,
    regularized_objective,
    train_readout,
)
from mcrc.tasks import nrmse

from .oracles import nrmse_plain, ridge_mp


def trace_of(values, dt=0.01):
    return BoundFractionTrace(dt, np.asarray(values, dtype=float))


unit_traces = arrays(np.float64, st.integers(1, 60), elements=st.floats(0, 1))


# --- filter ----------------------------------------------------------------

@pytest.mark.parametrize("W", [1, 2, 7, 2000])
def test_filter_keeps_constant_trace(W):
    out = moving_average_filter(trace_of(np.full(300, 0.4)), W)
    assert np.array_equal(out.samples, np.full(300, 0.4))


def test_filter_two_sample_mean():
    out = moving_average_filter(trace_of([0, 1, 0, 1, 0, 1, 0, 1]), 2)
    assert out.samples.tolist() == [0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]


def test_filter_reduces_white_noise_variance():
    sigma = 0.05
    W = 2000
    x = 0.5 + sigma * np.random.default_rng(1).standard_normal(200_000)
    out = moving_average_filter(trace_of(x), W).samples[W:]
    ratio = out.var() / sigma**2
    assert ratio == pytest.approx(1 / W, rel=0.2)


@pytest.mark.parametrize("W", [0, -3, 1.5])
def test_filter_window_must_be_positive_integer(W):
    with pytest.raises(ValidationError):
        moving_average_filter(trace_of([0.1, 0.2]), W)


@settings(max_examples=60, deadline=None)
@given(unit_traces, st.integers(1, 80))
def test_filter_is_causal_and_expanding(x, W):
    out = moving_average_filter(trace_of(x), W).samples
    assert out.size == x.size
    for k in range(x.size):
        lo = max(0, k - W + 1)
        assert out[k] == pytest.approx(x[lo:k + 1].mean(), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(unit_traces, st.integers(1, 80), st.floats(0, 0.5), st.floats(0, 0.5))
def test_filter_linear_and_shift_commuting(x, W, a, shift):
    y = x[::-1].copy()
    half = 0.5 * x
    f = lambda v: moving_average_filter(trace_of(v), W).samples
    np.testing.assert_allclose(f(a * x + (1 - a) * y), a * f(x) + (1 - a) * f(y), atol=1e-12)
    np.testing.assert_allclose(f(half + shift), f(half) + shift, atol=1e-12)


# --- states ----------------------------------------------------------------

P1 = ChannelParams(1e-18, 1.0, 1.0, 4e-6, 1e4, 1e-11)


def test_constant_trace_gives_constant_states():
    st_ = build_states(trace_of(np.full(1001, 0.5), dt=0.005), P1, ReservoirConfig(), 5)
    assert st_.shape == (5, 20) and np.all(st_ == 0.5)


def test_single_node_samples_symbol_end():
    dt = 0.01
    x = np.linspace(0, 1, 501)
    states = build_states(trace_of(x, dt), P1, ReservoirConfig(virtual_nodes_M=1), 5)
    np.testing.assert_array_equal(states[:, 0], x[[100, 200, 300, 400, 500]])


def test_ramp_offsets_by_hand():
    horizon = 2.0
    dt = 0.001
    t = np.arange(2001) * dt
    states = build_states(trace_of(t / horizon, dt), P1, ReservoirConfig(virtual_nodes_M=4), 1)
    np.testing.assert_allclose(states[0], np.array([0.25, 0.5, 0.75, 1.0]) / horizon, rtol=1e-12)


def test_short_trace_rejected():
    with pytest.raises(ValidationError):
        build_states(trace_of(np.zeros(150), 0.01), P1, ReservoirConfig(), 2)


# --- dataset ---------------------------------------------------------------

def _enumerate_rows(n_sym, wash, L):
    """Independent enumeration of symbols that have a full post-washout window."""
    return [n for n in range(n_sym) if n - L + 1 >= wash]


def test_window_of_one_is_state_plus_bias():
    states = np.arange(12.0).reshape(6, 2)
    ds = assemble_dataset(states, np.arange(6.0), ReservoirConfig(memory_window_L=1, washout_symbols=0))
    np.testing.assert_array_equal(ds.states, np.hstack([states, np.ones((6, 1))]))


def test_window_two_after_washout_counts():
    cfg = ReservoirConfig(memory_window_L=2, washout_symbols=4)
    ds = assemble_dataset(np.zeros((7, 3)), np.zeros(7), cfg)
    assert len(ds) == 2 and ds.symbols.tolist() == [5, 6]


def test_enumeration_oracle_for_row_count():
    cfg = ReservoirConfig(memory_window_L=5, washout_symbols=10)
    ds = assemble_dataset(np.zeros((100, 2)), np.zeros(100), cfg)
    assert len(ds) == len(_enumerate_rows(100, 10, 5)) == 86


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10), st.integers(0, 20), st.integers(1, 4))
def test_rows_never_touch_washout(L, wash, extra, M):
    n = wash + L + extra
    states = np.arange(n * M, dtype=float).reshape(n, M)
    ds = assemble_dataset(states, np.arange(n, dtype=float), ReservoirConfig(memory_window_L=L, washout_symbols=wash))
    assert ds.symbols.tolist() == _enumerate_rows(n, wash, L)
    for row, n_sym in zip(ds.states, ds.symbols):
        expected = np.concatenate([states[k] for k in range(n_sym - L + 1, n_sym + 1)] + [[1.0]])
        np.testing.assert_array_equal(row, expected)
    assert np.array_equal(ds.targets, ds.symbols.astype(float))


def test_insufficient_symbols():
    with pytest.raises(ValidationError):
        assemble_dataset(np.zeros((5, 2)), np.zeros(5), ReservoirConfig(memory_window_L=3, washout_symbols=3))


# --- readout ---------------------------------------------------------------

def test_identity_design_returns_targets():
    y = np.array([3.0, -1.0, 0.5, 2.0])
    w = train_readout(ReservoirDataset(np.eye(4), y), ReservoirConfig(ridge_lambda=0.0))
    np.testing.assert_allclose(w.weights, y, rtol=1e-14)


def test_realizable_target_fits_exactly():
    rng = np.random.default_rng(2)
    X = rng.random((80, 6))
    y = X @ rng.standard_normal(6)
    ds = ReservoirDataset(X, y)
    w = train_readout(ds, ReservoirConfig(ridge_lambda=0.0))
    assert nrmse(y, predict(w, X)) <= 1e-10


def test_ridge_matches_high_precision_normal_equations():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((50, 8))
    y = rng.standard_normal(50)
    w = train_readout(ReservoirDataset(X, y), ReservoirConfig(ridge_lambda=1e-3)).weights
    np.testing.assert_allclose(w, ridge_mp(X.tolist(), y.tolist(), 1e-3), rtol=1e-8, atol=1e-12)


def test_rank_deficient_falls_back_to_min_norm(caplog):
    X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([2.0, 4.0, 6.0])
    w = train_readout(ReservoirDataset(X, y), ReservoirConfig(ridge_lambda=0.0))
    assert w.rank_deficient and w.rank == 1
    np.testing.assert_allclose(w.weights, [1.0, 1.0], rtol=1e-12)
    assert "minimum-norm" in caplog.text


def test_predict_zero_and_bias_only():
    x = np.random.default_rng(4).random((5, 4))
    x[:, -1] = 1.0  # bias column
    assert np.all(predict(ReadoutWeights(np.zeros(4)), x) == 0)
    assert np.all(predict(ReadoutWeights([0, 0, 0, 1.0]), x) == 1)
    with pytest.raises(ValidationError):
        predict(ReadoutWeights(np.zeros(3)), x)


def test_predict_matches_fitted_values():
    rng = np.random.default_rng(5)
    X = rng.random((40, 5))
    y = rng.random(40)
    ds = ReservoirDataset(X, y)
    w = train_readout(ds, ReservoirConfig())
    fitted = X @ w.weights
    np.testing.assert_array_equal(predict(w, X), fitted)
    assert predict(w, X[3]) == pytest.approx(fitted[3], rel=1e-14)


def test_non_finite_weights_rejected():
    with pytest.raises(ValidationError):
        ReadoutWeights([1.0, np.nan])


def test_weights_are_first_order_optimal():
    rng = np.random.default_rng(6)
    X = rng.random((60, 7))
    y = rng.random(60)
    ds = ReservoirDataset(X, y)
    lam = 1e-3
    w = train_readout(ds, ReservoirConfig(ridge_lambda=lam)).weights
    base = regularized_objective(w, ds, lam)
    for _ in range(200):
        delta = rng.standard_normal(7)
        delta *= 1e-4 / np.linalg.norm(delta)
        assert regularized_objective(w + delta, ds, lam) >= base


def test_training_is_deterministic():
    rng = np.random.default_rng(7)
    ds = ReservoirDataset(rng.random((30, 4)), rng.random(30))
    a = train_readout(ds, ReservoirConfig()).weights
    b = train_readout(ds, ReservoirConfig()).weights
    assert np.array_equal(a, b)


def test_csv_round_trips(tmp_path):
    rng = np.random.default_rng(8)
    ds = ReservoirDataset(rng.random((6, 3)), rng.random(6), np.arange(6))
    ds.to_csv(tmp_path / "ds.csv")
    back = ReservoirDataset.from_csv(tmp_path / "ds.csv")
    np.testing.assert_array_equal(back.states, ds.states)
    np.testing.assert_array_equal(back.targets, ds.targets)
    w = train_readout(ds, ReservoirConfig())
    w.to_csv(tmp_path / "w.csv")
    np.testing.assert_array_equal(ReadoutWeights.from_csv(tmp_path / "w.csv").weights, w.weights)


def test_identity_task_with_negligible_isi():
    # fast diffusion, short distance, long symbol: each pulse is gone before the next
    p = ChannelParams(k_on=1e-18, k_off=8.0, symbol_duration_T=2.5, distance_d=2e-6,
                      n_max=2e3, diffusion_D=1e-9, memory_window_L=1)
    u = np.random.default_rng(9).random(600)
    tr = integrate_binding(p, u)
    cfg = ReservoirConfig(memory_window_L=1)
    ds = assemble_dataset(build_states(tr, p, cfg, u.size), u, cfg)
    train, test = ds.split(cfg.train_fraction)
    w = train_readout(train, cfg)
    err = nrmse(test.targets, predict(w, test.states))
    assert err <= 0.1
    assert err == pytest.approx(nrmse_plain(test.targets.tolist(), predict(w, test.states).tolist()), rel=1e-12)


def test_config_validation():
    with pytest.raises(ValidationError):
        ReservoirConfig(virtual_nodes_M=0)
    with pytest.raises(ValidationError):
        ReservoirConfig(ridge_lambda=-1.0)
    with pytest.raises(ValidationError):
        ReservoirConfig(filter_window_W=-1)

"""Time-multiplexed reservoir states and the linear readout."""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReservoirConfig:
    """Readout-side settings.

    Attributes:
        virtual_nodes_M: samples taken per symbol interval.
        memory_window_L: consecutive symbol states concatenated per row.
        washout_symbols: leading symbols never used for training or testing.
        ridge_lambda: Tikhonov weight; 0 gives the pseudoinverse solution.
        filter_window_W: causal moving-average window in trace samples, 0 = off.
        train_fraction: leading share of post-washout rows used for training.
    """

    virtual_nodes_M: int = 20
    memory_window_L: int = 5
    washout_symbols: int = 50
    ridge_lambda: float = 1e-6
    filter_window_W: int = 0
    train_fraction: float = 0.7

    def __post_init__(self):
        for name in ("virtual_nodes_M", "memory_window_L"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        for name in ("washout_symbols", "filter_window_W"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValidationError(f"{name} must be a non-negative integer, got {v!r}")
        if not (self.ridge_lambda >= 0 and np.isfinite(self.ridge_lambda)):
            raise ValidationError("ridge_lambda must be finite and >= 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie in (0, 1)")

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ReservoirDataset:
    """Design matrix (windowed states plus bias column) and aligned targets."""

    states: np.ndarray
    targets: np.ndarray
    symbols: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.states, dtype=np.float64))
        y = np.asarray(self.targets, dtype=np.float64).ravel()
        if X.shape[0] != y.size:
            raise ValidationError("row count and target count differ")
        object.__setattr__(self, "states", X)
        object.__setattr__(self, "targets", y)
        if self.symbols is not None:
            object.__setattr__(self, "symbols", np.asarray(self.symbols, dtype=np.int64))

    def __len__(self):
        return self.targets.size

    def split(self, train_fraction):
        """Contiguous (train, test) split; no shuffling."""
        n_train = int(round(train_fraction * len(self)))
        if not 0 < n_train < len(self):
            raise ValidationError(f"split of {len(self)} rows leaves an empty side")
        sym = self.symbols
        return (
            ReservoirDataset(self.states[:n_train], self.targets[:n_train],
                             None if sym is None else sym[:n_train]),
            ReservoirDataset(self.states[n_train:], self.targets[n_train:],
                             None if sym is None else sym[n_train:]),
        )

    def to_csv(self, path):
        n_feat = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n"] + [f"x{i}" for i in range(n_feat - 1)] + ["bias", "y"])
            syms = self.symbols if self.symbols is not None else np.arange(len(self))
            for n, row, y in zip(syms, self.states, self.targets):
                w.writerow([int(n)] + [repr(float(v)) for v in row] + [repr(float(y))])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1:-1], data[:, -1], data[:, 0].astype(np.int64))


@dataclass(frozen=True, eq=False)
class ReadoutWeights:
    weights: np.ndarray
    rank: int = -1
    rank_deficient: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if not np.all(np.isfinite(w)):
            raise ValidationError("readout weights must be finite")
        object.__setattr__(self, "weights", w)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "weight"])
            for i, v in enumerate(self.weights):
                w.writerow([i, repr(float(v))])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1])


def moving_average_filter(trace, window_W):
    """Causal moving average over ``window_W`` samples.

    The first ``W - 1`` outputs average over the samples seen so far, so the
    filter never reaches before the start of the trace.
    """
    if int(window_W) != window_W or window_W < 1:
        raise ValidationError(f"filter window must be a positive integer, got {window_W!r}")
    W = int(window_W)
    x = trace.samples
    if W == 1:
        return trace.with_samples(x.copy())
    # centering on the first sample keeps constant traces exact and the
    # running sums small
    ref = x[0]
    csum = np.concatenate(([0.0], np.cumsum(x - ref)))
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - W, 0)
    out = (csum[idx] - csum[lo]) / (idx - lo) + ref
    return trace.with_samples(np.clip(out, x.min(), x.max()))


def node_offsets(params, config):
    """Sampling offsets within a symbol, ``(j + 1) T / M`` for ``j < M``."""
    M = config.virtual_nodes_M
    return params.symbol_duration_T * np.arange(1, M + 1) / M


def build_states(trace, params, config, num_symbols):
    """Sample the trace at the virtual-node offsets of every symbol.

    Returns a ``(num_symbols, M)`` matrix. Samples are taken at the nearest
    trace grid point.
    """
    if num_symbols < 1:
        raise ValidationError("num_symbols must be >= 1")
    T = params.symbol_duration_T
    if T / config.virtual_nodes_M < trace.dt * (1 - 1e-9):
        raise ValidationError(
            f"M={config.virtual_nodes_M} nodes are finer than the trace grid dt={trace.dt}"
        )
    times = np.arange(num_symbols)[:, None] * T + node_offsets(params, config)[None, :]
    idx = np.rint((times - trace.t0) / trace.dt).astype(np.int64)
    if idx.min() < 0 or idx.max() >= len(trace):
        raise ValidationError(
            f"trace of {trace.duration:.6g} s is too short for {num_symbols} symbols of {T} s"
        )
    return trace.samples[idx]


def assemble_dataset(states, targets, config):
    """Window ``L`` consecutive symbol states, append a bias, align targets.

    Row for symbol ``n`` holds states ``n - L + 1 .. n``; the first row is the
    first full window after the washout.
    """
    states = np.asarray(states, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if states.ndim != 2:
        raise ValidationError("states must be a matrix")
    n_sym = states.shape[0]
    if targets.size != n_sym:
        raise ValidationError(f"{n_sym} state rows but {targets.size} targets")
    L, wash = config.memory_window_L, config.washout_symbols
    if n_sym < wash + L:
        raise ValidationError(
            f"{n_sym} symbols cannot cover washout {wash} plus a window of {L}"
        )
    first = wash + L - 1
    rows = np.arange(first, n_sym)
    blocks = [states[rows - (L - 1) + i] for i in range(L)]
    X = np.hstack(blocks + [np.ones((rows.size, 1))])
    return ReservoirDataset(X, targets[rows], rows)


def train_readout(dataset, config):
    """Ridge-regularized least squares for the readout weights.

    Solves ``(X^T X + lambda I) w = X^T y`` through the SVD of ``X``, which
    reduces to the minimum-norm pseudoinverse solution when ``lambda = 0``.
    """
    X, y = dataset.states, dataset.targets
    if X.shape[0] == 0:
        raise ValidationError("cannot train on an empty dataset")
    lam = float(config.ridge_lambda)
    U, s, Vt = scipy.linalg.svd(X, full_matrices=False, lapack_driver="gesdd")
    tol = s[0] * max(X.shape) * np.finfo(float).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    deficient = rank < X.shape[1]
    if lam > 0:
        filt = s / (s * s + lam)
    else:
        filt = np.zeros_like(s)
        filt[:rank] = 1.0 / s[:rank]
        if deficient:
            log.warning(
                "readout design matrix has rank %d < %d columns; returning the "
                "minimum-norm solution", rank, X.shape[1]
            )
    w = Vt.T @ (filt * (U.T @ y))
    return ReadoutWeights(w, rank, deficient)


def predict(weights, states):
    """``w . x`` for a single row, or a vector of predictions for a matrix."""
    w = weights.weights if isinstance(weights, ReadoutWeights) else np.asarray(weights)
    x = np.asarray(states, dtype=np.float64)
    if x.shape[-1] != w.size:
        raise ValidationError(f"state dimension {x.shape[-1]} != weight dimension {w.size}")
    out = x @ w
    return float(out) if out.ndim == 0 else out


def regularized_objective(weights, dataset, ridge_lambda):
    w = np.asarray(getattr(weights, "weights", weights), dtype=np.float64)
    r = dataset.states @ w - dataset.targets
    return float(r @ r + ridge_lambda * (w @ w))

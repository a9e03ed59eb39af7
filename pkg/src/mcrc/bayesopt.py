"""Gaussian-process Bayesian optimization with Expected Improvement."""

import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
from scipy.stats import norm, qmc

from .errors import OptimizationError, SurrogateError, ValidationError
from .params import MICRON

log = logging.getLogger(__name__)

SQRT5 = math.sqrt(5.0)
JITTER_START = 1e-8
JITTER_MAX = 1e-4
N_RESTARTS = 8
N_CANDIDATES = 4096
N_REFINE = 8
REFINE_STEPS = 32
# EI below this (in units of the standardized objective) counts as zero
EI_FLAT = 1e-6

# log-space box for (signal variance, lengthscales, noise variance)
LOG_SIGNAL_BOUNDS = (math.log(1e-2), math.log(1e2))
LOG_LENGTH_BOUNDS = (math.log(1e-2), math.log(1e2))
LOG_NOISE_BOUNDS = (math.log(1e-10), math.log(1.0))


@dataclass(frozen=True)
class SearchSpace:
    """Box of named dimensions, each searched on a linear or log10 scale."""

    names: tuple
    lower: tuple
    upper: tuple
    log_scale: tuple
    integer: tuple = None

    def __post_init__(self):
        n = len(self.names)
        integer = self.integer if self.integer is not None else (False,) * n
        object.__setattr__(self, "integer", tuple(bool(v) for v in integer))
        for name in ("lower", "upper", "log_scale"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"{name} has the wrong number of entries")
        for nm, lo, hi, lg in zip(self.names, self.lower, self.upper, self.log_scale):
            if not lo < hi:
                raise ValidationError(f"bounds for {nm} need lower < upper")
            if lg and lo <= 0:
                raise ValidationError(f"log-scaled {nm} needs a positive lower bound")

    @property
    def dim(self):
        return len(self.names)

    @classmethod
    def channel(cls, **overrides):
        """Default box over the seven channel knobs.

        ``overrides`` maps a dimension name to a ``(lower, upper)`` pair.
        """
        box = {
            "k_on": (1e-19, 1e-16, True, False),
            "k_off": (1.0, 10.0, False, False),
            "symbol_duration_T": (0.5, 2.5, False, False),
            "distance_d": (2.0 * MICRON, 8.0 * MICRON, False, False),
            "n_max": (1e3, 2e4, True, True),
            "diffusion_D": (1e-12, 1e-9, True, False),
            "memory_window_L": (1, 10, False, True),
        }
        for name, (lo, hi) in overrides.items():
            if name not in box:
                raise ValidationError(f"unknown search dimension {name!r}")
            box[name] = (lo, hi) + box[name][2:]
        names = tuple(box)
        return cls(
            names,
            tuple(float(v[0]) for v in box.values()),
            tuple(float(v[1]) for v in box.values()),
            tuple(v[2] for v in box.values()),
            tuple(v[3] for v in box.values()),
        )

    def _transformed_bounds(self):
        lo = np.array([math.log10(v) if g else v for v, g in zip(self.lower, self.log_scale)])
        hi = np.array([math.log10(v) if g else v for v, g in zip(self.upper, self.log_scale)])
        return lo, hi

    def decode(self, x):
        """Normalized point in [0, 1]^d to a dict of natural values."""
        x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
        lo, hi = self._transformed_bounds()
        z = lo + x * (hi - lo)
        out = {}
        for i, name in enumerate(self.names):
            v = 10.0 ** z[i] if self.log_scale[i] else z[i]
            v = min(max(v, self.lower[i]), self.upper[i])
            if self.integer[i]:
                v = int(min(max(round(v), math.ceil(self.lower[i])), math.floor(self.upper[i])))
            else:
                v = float(v)
            out[name] = v
        return out

    def encode(self, values):
        """Dict (or sequence) of natural values to a normalized point."""
        if isinstance(values, dict):
            values = [values[n] for n in self.names]
        lo, hi = self._transformed_bounds()
        z = np.array(
            [math.log10(v) if g else float(v) for v, g in zip(values, self.log_scale)]
        )
        return (z - lo) / (hi - lo)

    def to_dict(self):
        return {
            "names": list(self.names),
            "lower": list(self.lower),
            "upper": list(self.upper),
            "log_scale": list(self.log_scale),
            "integer": list(self.integer),
        }


def matern52(X1, X2, lengthscales, signal_var):
    """Matern-5/2 covariance with per-dimension lengthscales."""
    A = np.asarray(X1) / lengthscales
    B = np.asarray(X2) / lengthscales
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    r = np.sqrt(np.maximum(sq, 0.0))
    return signal_var * (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-SQRT5 * r)


@dataclass(frozen=True, eq=False)
class GpModel:
    """Fitted GP surrogate over normalized inputs and standardized values."""

    train_x: np.ndarray
    train_y: np.ndarray
    signal_var: float
    lengthscales: np.ndarray
    noise_var: float
    y_mean: float = 0.0
    y_std: float = 1.0
    jitter: float = JITTER_START
    chol: np.ndarray = field(default=None, repr=False)
    alpha: np.ndarray = field(default=None, repr=False)
    log_marginal_likelihood: float = float("nan")

    @classmethod
    def build(cls, train_x, train_y, signal_var, lengthscales, noise_var, jitter=JITTER_START):
        """Factorize the kernel matrix for fixed hyperparameters."""
        X = np.atleast_2d(np.asarray(train_x, dtype=np.float64))
        y = np.asarray(train_y, dtype=np.float64).ravel()
        y_mean = float(y.mean())
        y_std = float(y.std())
        if not y_std > 0:
            y_std = 1.0
        z = (y - y_mean) / y_std
        ls = np.broadcast_to(np.asarray(lengthscales, dtype=np.float64), (X.shape[1],)).copy()
        if signal_var <= 0 or noise_var < 0 or np.any(ls <= 0):
            raise ValidationError("GP hyperparameters must be positive")
        K = matern52(X, X, ls, signal_var)
        L, jitter = _cholesky(K, noise_var, jitter)
        alpha = scipy.linalg.cho_solve((L, True), z)
        lml = -0.5 * z @ alpha - np.log(np.diag(L)).sum() - 0.5 * z.size * math.log(2 * math.pi)
        return cls(X, y, float(signal_var), ls, float(noise_var), y_mean, y_std,
                   jitter, L, alpha, float(lml))

    def predict_standardized(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        Ks = matern52(x, self.train_x, self.lengthscales, self.signal_var)
        mu = Ks @ self.alpha
        v = scipy.linalg.solve_triangular(self.chol, Ks.T, lower=True)
        var = np.maximum(self.signal_var - (v * v).sum(0), 0.0)
        return mu, np.sqrt(var)


def _cholesky(K, noise_var, jitter=JITTER_START):
    n = K.shape[0]
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            L = scipy.linalg.cholesky(K + (noise_var + jitter) * np.eye(n), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise SurrogateError("kernel matrix is not positive definite even with jitter 1e-4")


def _neg_lml(theta, X, z, sq_diffs):
    """Negative log marginal likelihood and its gradient in log-hyperparameters."""
    d = X.shape[1]
    s2 = math.exp(theta[0])
    ls = np.exp(theta[1 : 1 + d])
    noise = math.exp(theta[1 + d])
    scaled = sq_diffs / (ls * ls)  # (n, n, d)
    r = np.sqrt(scaled.sum(-1))
    e = np.exp(-SQRT5 * r)
    K = s2 * (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * e
    try:
        L, jitter = _cholesky(K, noise)
    except SurrogateError:
        return 1e25, np.zeros_like(theta)
    alpha = scipy.linalg.cho_solve((L, True), z)
    n = z.size
    lml = -0.5 * z @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi)
    Kinv = scipy.linalg.cho_solve((L, True), np.eye(n))
    inner = np.outer(alpha, alpha) - Kinv
    grad = np.empty_like(theta)
    grad[0] = 0.5 * np.sum(inner * K)
    common = s2 * (5.0 / 3.0) * (1.0 + SQRT5 * r) * e
    grad[1 : 1 + d] = 0.5 * np.einsum("ij,ij,ijk->k", inner, common, scaled)
    grad[1 + d] = 0.5 * noise * np.trace(inner)
    return -lml, -grad


def hyper_bounds(d):
    return [LOG_SIGNAL_BOUNDS] + [LOG_LENGTH_BOUNDS] * d + [LOG_NOISE_BOUNDS]


def log_marginal_likelihood(X, y, signal_var, lengthscales, noise_var):
    """LML of standardized ``y`` under the given hyperparameters."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    std = y.std() if y.std() > 0 else 1.0
    z = (y - y.mean()) / std
    d = X.shape[1]
    theta = np.concatenate(
        ([math.log(signal_var)],
         np.log(np.broadcast_to(lengthscales, (d,))),
         [math.log(noise_var)])
    )
    sq = (X[:, None, :] - X[None, :, :]) ** 2
    return -_neg_lml(theta, X, z, sq)[0]


def gp_fit(points, values, seed=0, n_restarts=N_RESTARTS, warm_start=None):
    """Fit Matern-5/2 hyperparameters by maximizing the log marginal likelihood.

    Runs L-BFGS-B from ``n_restarts`` starts (a default start, the optional
    ``warm_start`` and random draws from ``seed``) and keeps the best.
    """
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    y = np.asarray(values, dtype=np.float64).ravel()
    if X.shape[0] < 2 or X.shape[0] != y.size:
        raise ValidationError("gp_fit needs at least two points with matching values")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
        raise ValidationError("gp_fit needs finite points and values")
    d = X.shape[1]
    std = y.std() if y.std() > 0 else 1.0
    z = (y - y.mean()) / std
    sq = (X[:, None, :] - X[None, :, :]) ** 2
    bounds = hyper_bounds(d)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    rng = np.random.default_rng(seed)
    starts = [np.concatenate(([0.0], np.full(d, math.log(0.3)), [math.log(1e-4)]))]
    if warm_start is not None:
        starts.append(np.clip(np.asarray(warm_start, dtype=np.float64), lo, hi))
    while len(starts) < n_restarts:
        starts.append(rng.uniform(lo, hi))
    best = None
    for theta0 in starts:
        res = scipy.optimize.minimize(
            _neg_lml, theta0, args=(X, z, sq), jac=True, method="L-BFGS-B", bounds=bounds
        )
        if best is None or (np.isfinite(res.fun) and res.fun < best.fun):
            best = res
    theta = best.x
    model = GpModel.build(
        X, y, math.exp(theta[0]), np.exp(theta[1 : 1 + d]), math.exp(theta[1 + d])
    )
    return model


def gp_theta(model):
    """Log-hyperparameter vector of a fitted model (for warm starts)."""
    return np.concatenate(
        ([math.log(model.signal_var)], np.log(model.lengthscales), [math.log(model.noise_var)])
    )


def gp_predict(model, x):
    """Posterior mean and standard deviation in the objective's own units."""
    mu, sd = model.predict_standardized(x)
    mu = mu * model.y_std + model.y_mean
    sd = sd * model.y_std
    if np.ndim(x) == 1:
        return float(mu[0]), float(sd[0])
    return mu, sd


def ei_from_moments(mu, sigma, f_min):
    """Expected improvement below ``f_min`` of a normal with given moments."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    gap = f_min - mu
    safe = np.where(sigma > 1e-12, sigma, 1.0)
    Z = gap / safe
    ei = gap * norm.cdf(Z) + safe * norm.pdf(Z)
    ei = np.where(sigma > 1e-12, ei, np.maximum(gap, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def expected_improvement(model, x, f_min):
    """EI of minimizing the objective at ``x`` given the incumbent ``f_min``."""
    if not math.isfinite(f_min):
        raise ValidationError("f_min must be finite")
    mu, sd = gp_predict(model, x)
    return ei_from_moments(mu, sd, f_min)


def _ei_standardized(model, x, f_min_std):
    mu, sd = model.predict_standardized(x)
    return ei_from_moments(mu, sd, f_min_std), sd


def propose_next(model, space, f_min, rng):
    """Maximize EI over quasi-random candidates refined by coordinate search.

    Returns ``(natural_values, normalized_point)``; the point reflects any
    rounding of integer dimensions.
    """
    d = space.dim
    f_std = (f_min - model.y_mean) / model.y_std
    sampler = qmc.Sobol(d, scramble=True, seed=int(rng.integers(2**31)))
    cand = sampler.random_base2(int(math.log2(N_CANDIDATES)))
    ei, sd = _ei_standardized(model, cand, f_std)
    if ei.max() <= EI_FLAT:
        if np.ptp(sd) <= 1e-9 * max(sd.max(), 1e-300):
            # no usable variance signal: go as far from the data as possible
            dist = np.sqrt(((cand[:, None, :] - model.train_x[None, :, :]) ** 2).sum(-1)).min(1)
            pick = cand[int(np.argmax(dist))]
        else:
            pick = cand[int(np.argmax(sd))]
        log.debug("EI landscape is flat; proposing the most uncertain candidate")
    else:
        top = np.argsort(-ei, kind="stable")[:N_REFINE]
        best_x, best_val = None, -np.inf
        for i in top:
            x, val = _coordinate_search(model, cand[i], ei[i], f_std)
            if val > best_val:
                best_x, best_val = x, val
        pick = best_x
    values = space.decode(pick)
    return values, space.encode(values)


def _coordinate_search(model, x0, ei0, f_std):
    x = x0.copy()
    val = float(ei0)
    d = x.size
    step = 0.05
    eye = np.eye(d)
    for _ in range(REFINE_STEPS):
        trial = np.clip(np.vstack([x + step * eye, x - step * eye]), 0.0, 1.0)
        ei, _ = _ei_standardized(model, trial, f_std)
        j = int(np.argmax(ei))
        if ei[j] > val:
            x, val = trial[j], float(ei[j])
        else:
            step *= 0.5
    return x, val


@dataclass
class Trial:
    """One objective evaluation."""

    index: int
    params: dict
    x: np.ndarray
    objective: float
    status: str = "ok"
    duration: float = 0.0
    error: str = ""

    def to_json(self):
        return json.dumps(
            {
                "index": self.index,
                "params": self.params,
                "x": [float(v) for v in self.x],
                "objective": self.objective if math.isfinite(self.objective) else None,
                "status": self.status,
                "duration": self.duration,
                "error": self.error,
            }
        )

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        obj = d["objective"]
        return cls(
            d["index"], d["params"], np.asarray(d["x"]),
            float("nan") if obj is None else float(obj),
            d["status"], d["duration"], d.get("error", ""),
        )


def _evaluate(objective, index, values, x):
    t0 = time.perf_counter()
    try:
        f = float(objective(values))
        if not math.isfinite(f):
            raise ArithmeticError(f"objective returned {f}")
    except Exception as exc:  # a failed trial is data, not a crash
        return Trial(index, values, x, float("nan"), "failed",
                     time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")
    return Trial(index, values, x, f, "ok", time.perf_counter() - t0)


def quasi_random_points(dim, n, seed):
    """Scrambled Sobol points in [0, 1]^dim."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # non power-of-two sample sizes
        return qmc.Sobol(dim, scramble=True, seed=seed).random(n)


def optimize(objective, space, budget, init, rng_seed=0, log_file=None, on_trial=None):
    """Sequential EI-driven minimization of ``objective``.

    ``objective`` receives a dict of natural parameter values. The first
    ``init`` trials come from a Sobol design; the rest from ``propose_next``.
    Failed trials are fitted at the worst observed value.

    Returns every trial sorted ascending by objective (failed trials last).
    """
    if not budget >= init >= 2:
        raise ValidationError("need budget >= init >= 2")
    rng = np.random.default_rng(rng_seed)
    trials = []

    def record(trial):
        trials.append(trial)
        if log_file is not None:
            log_file.write(trial.to_json() + "\n")
            log_file.flush()
        if on_trial is not None:
            on_trial(trial)

    for x in quasi_random_points(space.dim, init, rng_seed):
        values = space.decode(x)
        record(_evaluate(objective, len(trials), values, space.encode(values)))
    if not any(t.status == "ok" for t in trials):
        raise OptimizationError(
            "every initial design point failed; first error: " + trials[0].error
        )

    warm = None
    while len(trials) < budget:
        ok = [t.objective for t in trials if t.status == "ok"]
        worst, f_min = max(ok), min(ok)
        X = np.array([t.x for t in trials])
        y = np.array([t.objective if t.status == "ok" else worst for t in trials])
        try:
            model = gp_fit(X, y, seed=rng_seed * 100003 + len(trials), warm_start=warm)
            warm = gp_theta(model)
            values, x = propose_next(model, space, f_min, rng)
        except SurrogateError as exc:
            log.warning("surrogate failed (%s); sampling at random", exc)
            values = space.decode(rng.random(space.dim))
            x = space.encode(values)
        record(_evaluate(objective, len(trials), values, x))

    return sorted(trials, key=_sort_key)


def _sort_key(trial):
    return (trial.status != "ok", trial.objective if trial.status == "ok" else 0.0, trial.index)


def random_search(objective, space, budget, rng_seed=0):
    """Pure Sobol search with the same design the optimizer starts from."""
    return optimize(objective, space, budget, budget, rng_seed)

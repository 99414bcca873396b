"""Conditional goodness-of-fit tests for Poisson log-linear models.

Given the sufficient statistic ``t = A y``, the conditional law of the
counts is proportional to ``prod 1/y_i!`` on the fiber.  ``mh_run`` samples
it with a Metropolis-Hastings walk along a Markov basis; ``exact_p_value``
sums the same law over the enumerated fiber.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence, Union

import numba
import numpy as np

from . import fiber as fib
from .markov import MarkovBasis, Move
from .model import CovariateMatrix


class GlmError(ArithmeticError):
    def __init__(self, message: str, fit: "GlmFit | None" = None):
        super().__init__(message)
        self.fit = fit


class ChainError(RuntimeError):
    pass


@dataclass
class GlmFit:
    beta: np.ndarray
    mu: np.ndarray
    converged: bool
    iterations: int


def _design(X) -> np.ndarray:
    M = X.entries if isinstance(X, CovariateMatrix) else np.asarray(X)
    return M.astype(float)


def fit_poisson_glm(X, y: Sequence[int], tol: float = 1e-8, max_iter: int = 100) -> GlmFit:
    """Maximum likelihood fit of ``log mu = X beta`` by damped Newton steps.

    Stops once ``max |X'(y - mu)| <= tol * (1 + |X'y|_inf)``.  Starts from
    ``mu = mean(y)``, which needs the first column of ``X`` to be the
    intercept.
    """
    M = _design(X)
    y = np.asarray(y, dtype=float)
    if y.shape != (M.shape[0],):
        raise ValueError(f"count vector has length {y.size}, design has {M.shape[0]} runs")
    if (y < 0).any() or not y.any():
        raise ValueError("counts must be nonnegative and not all zero")
    target = M.T @ y
    bound = tol * (1.0 + np.abs(target).max())
    beta = np.zeros(M.shape[1])
    beta[0] = math.log(y.mean())

    def loglik(b):
        eta = M @ b
        return float(y @ eta - np.exp(eta).sum())

    cur = loglik(beta)
    for it in range(1, max_iter + 1):
        mu = np.exp(M @ beta)
        score = M.T @ (y - mu)
        if np.abs(score).max() <= bound:
            return GlmFit(beta, mu, True, it - 1)
        info = M.T @ (mu[:, None] * M)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            raise GlmError("singular information matrix", GlmFit(beta, mu, False, it)) from None
        scale = 1.0
        while True:
            trial = beta + scale * step
            new = loglik(trial)
            if new >= cur - 1e-12 * abs(cur) or scale < 1e-10:
                break
            scale /= 2
        beta, cur = trial, new
    mu = np.exp(M @ beta)
    if np.abs(M.T @ (y - mu)).max() <= bound:
        return GlmFit(beta, mu, True, max_iter)
    raise GlmError(f"Newton iterations did not converge in {max_iter} steps "
                   "(the maximum likelihood estimate may lie on the boundary)",
                   GlmFit(beta, mu, False, max_iter))


def _check_mu(mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if (mu <= 0).any():
        raise ValueError("fitted means must be positive")
    return mu


def pearson_stat(y, mu) -> float:
    mu = _check_mu(mu)
    y = np.asarray(y, dtype=float)
    return float(((y - mu) ** 2 / mu).sum())


def deviance_stat(y, mu) -> float:
    mu = _check_mu(mu)
    y = np.asarray(y, dtype=float)
    pos = y > 0
    return float(2 * ((y[pos] * np.log(y[pos] / mu[pos])).sum() - (y - mu).sum()))


STATISTICS: dict[str, Callable] = {"pearson": pearson_stat, "deviance": deviance_stat}
_CODES = {"pearson": 0, "deviance": 1}

Statistic = Union[str, Callable[[np.ndarray], float]]


@dataclass(frozen=True)
class ChainConfig:
    steps: int = 100_000
    burn_in: int = 10_000
    seed: int = 0
    thinning: int = 1

    def __post_init__(self):
        if not self.steps > self.burn_in >= 0:
            raise ValueError("need steps > burn_in >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be at least 1")

    @property
    def samples(self) -> int:
        return -(-(self.steps - self.burn_in) // self.thinning)


@dataclass
class TestResult:
    statistic: str
    observed: float
    p_value: float
    se: float
    acceptance_rate: float
    n_samples: int
    method: str = "mcmc"
    ess: float = 0.0
    p_exact: Fraction | None = None
    trace: np.ndarray | None = field(default=None, repr=False)

    __test__ = False  # not a pytest class

    def as_dict(self) -> dict:
        out = asdict(self)
        out.pop("trace")
        out["p_exact"] = None if self.p_exact is None else str(self.p_exact)
        return out


def _threshold(obs: float) -> float:
    return obs - 1e-9 * max(1.0, abs(obs))


def _resolve(stat: Statistic, A: np.ndarray, y_obs: np.ndarray, mu):
    """``(name, callable)`` for ``stat``, fitting the null model if needed."""
    if callable(stat):
        return getattr(stat, "__name__", "custom"), stat, mu
    if stat not in STATISTICS:
        raise ValueError(f"unknown statistic {stat!r}; choose from {sorted(STATISTICS)}")
    if mu is None:
        mu = fit_poisson_glm(A.T, y_obs).mu
    fn = STATISTICS[stat]
    return stat, (lambda y: fn(y, mu)), mu


def batch_means_se(x: np.ndarray, batches: int = 50) -> tuple[float, float]:
    """Monte Carlo standard error and effective sample size of ``mean(x)``."""
    n = len(x)
    p = float(x.mean())
    if n == 0:
        return 0.0, 0.0
    b = max(1, min(batches, n // 10))
    size = n // b
    if b < 2 or size == 0:
        var = p * (1 - p)
    else:
        means = x[: b * size].reshape(b, size).mean(axis=1)
        var = size * float(means.var(ddof=1))
    if var <= 0:
        return 0.0, float(n)
    se = math.sqrt(var / n)
    ess = p * (1 - p) / se**2 if 0 < p < 1 else float(n)
    return se, ess


@numba.njit(cache=True)
def _stat(y, mu, code):
    s = 0.0
    for x in range(y.shape[0]):
        if code == 0:
            d = y[x] - mu[x]
            s += d * d / mu[x]
        else:
            if y[x] > 0:
                s += 2.0 * (y[x] * math.log(y[x] / mu[x]) - (y[x] - mu[x]))
            else:
                s += 2.0 * mu[x]
    return s


@numba.njit(cache=True)
def _matvec(A, y):
    out = np.zeros(A.shape[0], dtype=np.int64)
    for r in range(A.shape[0]):
        for x in range(A.shape[1]):
            out[r] += A[r, x] * y[x]
    return out


@numba.njit(cache=True)
def _chain(y0, moves, idx, signs, us, logfact, burn, thin, mu, code, A, debug, states):
    k = y0.shape[0]
    y = y0.copy()
    t = _matvec(A, y0)
    steps = idx.shape[0]
    n_rec = (steps - burn + thin - 1) // thin
    trace = np.zeros(n_rec)
    kept = np.zeros((n_rec if states else 0, k), dtype=np.int64)
    rec = 0
    acc = 0
    cur = _stat(y, mu, code) if code >= 0 else 0.0
    for s in range(steps):
        mv = idx[s]
        sg = signs[s]
        ok = True
        lr = 0.0
        for x in range(k):
            zx = moves[mv, x]
            if zx != 0:
                nv = y[x] + sg * zx
                if nv < 0:
                    ok = False
                    break
                lr += logfact[y[x]] - logfact[nv]
        if ok and (lr >= 0.0 or us[s] < math.exp(lr)):
            for x in range(k):
                y[x] += sg * moves[mv, x]
            acc += 1
            if code >= 0:
                cur = _stat(y, mu, code)
            if debug:
                if not np.array_equal(_matvec(A, y), t):
                    raise AssertionError("chain left the fiber")
        if s >= burn and (s - burn) % thin == 0:
            trace[rec] = cur
            if states:
                kept[rec] = y
            rec += 1
    return trace, kept, acc


def mh_run(A, basis: MarkovBasis | Sequence[Move], y_obs: Sequence[int], stat: Statistic = "pearson",
           cfg: ChainConfig = ChainConfig(), mu=None, debug: bool = False) -> TestResult:
    """Metropolis-Hastings estimate of ``P(stat(Y) >= stat(y_obs) | A Y = A y_obs)``.

    Each step draws a move and a sign uniformly, rejects proposals leaving
    the orthant and accepts the rest with probability
    ``min(1, prod y_i! / prod y'_i!)``.  ``mu`` (the null fit) is computed
    once from ``y_obs`` unless given.  ``debug`` checks ``A y`` after every
    accepted move.
    """
    A = np.asarray(A, dtype=np.int64)
    y_obs = np.asarray(y_obs, dtype=np.int64)
    moves = np.array([m.z for m in basis], dtype=np.int64).reshape(-1, A.shape[1])
    name, fn, mu = _resolve(stat, A, y_obs, mu)
    observed = float(fn(y_obs))
    if len(moves) == 0:
        probe = fib.enumerate_fiber(A, A @ y_obs, limit=2)
        if len(probe) > 1:
            raise ChainError("chain cannot mix: the basis is empty but the fiber has several points")
        n = cfg.samples
        return TestResult(name, observed, 1.0, 0.0, 0.0, n, ess=float(n), trace=np.full(n, observed))
    rng = np.random.default_rng(cfg.seed)
    idx = rng.integers(0, len(moves), cfg.steps)
    signs = rng.integers(0, 2, cfg.steps) * 2 - 1
    us = rng.random(cfg.steps)
    total = int(y_obs.sum())
    logfact = np.array([math.lgamma(i + 1) for i in range(total + 1)])
    code = _CODES.get(stat, -1) if isinstance(stat, str) else -1
    mu_arr = np.asarray(mu if mu is not None else np.ones(len(y_obs)), dtype=float)
    trace, kept, acc = _chain(y_obs, moves, idx, signs, us, logfact, cfg.burn_in, cfg.thinning,
                              mu_arr, code, A, debug, code < 0)
    if code < 0:
        trace = np.array([float(fn(y)) for y in kept])
    hits = (trace >= _threshold(observed)).astype(float)
    p = float(hits.mean())
    se, ess = batch_means_se(hits)
    return TestResult(name, observed, p, se, acc / cfg.steps, len(trace), ess=ess, trace=trace)


def log_weight(y) -> float:
    return -sum(math.lgamma(int(v) + 1) for v in y)


def exact_p_value(A, y_obs: Sequence[int], stat: Statistic = "pearson", mu=None,
                  cap: int | None = None) -> TestResult:
    """Exact conditional p-value by enumerating the fiber.

    Weights ``n!/prod y_i!`` are integers, so the ratio is an exact
    fraction.
    """
    A = np.asarray(A, dtype=np.int64)
    y_obs = np.asarray(y_obs, dtype=np.int64)
    name, fn, mu = _resolve(stat, A, y_obs, mu)
    observed = float(fn(y_obs))
    f = fib.enumerate_fiber(A, A @ y_obs, cap)
    n = int(y_obs.sum())
    top = math.factorial(n)
    thr = _threshold(observed)
    num = den = 0
    for y in f.points.tolist():
        w = top
        for v in y:
            w //= math.factorial(v)
        den += w
        if fn(np.array(y)) >= thr:
            num += w
    p = Fraction(num, den)
    return TestResult(name, observed, float(p), 0.0, 1.0, len(f), method="exact", ess=float(len(f)), p_exact=p)


def stationary_weight(y) -> Fraction:
    """Unnormalized conditional probability ``prod 1/y_i!``."""
    d = 1
    for v in y:
        d *= math.factorial(int(v))
    return Fraction(1, d)


def transition_probability(u, v, moves: Sequence[Move]) -> Fraction:
    """Exact one-step probability ``P(u -> v)`` of the chain, for ``u != v``."""
    u = tuple(int(x) for x in u)
    v = tuple(int(x) for x in v)
    ratio = stationary_weight(v) / stationary_weight(u)
    total = Fraction(0)
    for m in moves:
        for sign in (1, -1):
            if tuple(a + sign * b for a, b in zip(u, m.z)) == v:
                total += Fraction(1, 2 * len(moves)) * min(Fraction(1), ratio)
    return total

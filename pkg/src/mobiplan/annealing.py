"""Bounded continuous minimization: dual annealing + local refinement.

Generalized simulated annealing with the Tsallis visiting distribution in
its classical parameterization (initial temperature 5230, visiting parameter
2.62, acceptance parameter -5.0, restart ratio 2e-5), periodically refined
by projected gradient descent with a backtracking line search. Large
objective values are ordinary data, not errors: annealing has to be able to
walk through infeasible regions priced at the C0 sentinel.

Everything is deterministic given the config seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

TAIL_LIMIT = 1e8
MIN_VISIT_BOUND = 1e-10
ARMIJO_C1 = 1e-4
BACKTRACK_MAX = 30
REFINE_MAX_ITERS = 25


@dataclass(frozen=True)
class SearchSpace:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=np.float64).reshape(-1)
        upper = np.array(self.upper, dtype=np.float64).reshape(-1)
        if lower.size < 1 or lower.shape != upper.shape:
            raise ValueError("bounds must be equal-length nonempty vectors")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("bounds must be finite")
        if not np.all(lower < upper):
            raise ValueError("lower bounds must be strictly below upper")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dimension(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(x >= self.lower - tol)
                    and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class AnnealConfig:
    max_evals: int = 1000
    initial_temp: float = 5230.0
    visit_param: float = 2.62
    accept_param: float = -5.0
    restart_temp_ratio: float = 2e-5
    local_refine: bool = True
    rng_seed: int = 0
    record_history: bool = False

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if not self.initial_temp > 0.0:
            raise ValueError("initial_temp must be positive")
        if not 1.0 < self.visit_param <= 3.0:
            raise ValueError("visit_param must lie in (1, 3]")
        if not self.accept_param < 0.0:
            raise ValueError("accept_param must be negative")
        if not 0.0 < self.restart_temp_ratio < 1.0:
            raise ValueError("restart_temp_ratio must lie in (0, 1)")


@dataclass(frozen=True)
class AnnealResult:
    x_best: np.ndarray
    f_best: float
    evals_used: int
    history: tuple = ()


class _BudgetTracker:
    """Wraps the objective: counts evals, asserts bounds, tracks the best."""

    def __init__(self, objective, space: SearchSpace, record: bool):
        self._objective = objective
        self._space = space
        self._record = record
        self.evals = 0
        self.f_best = math.inf
        self.x_best: Optional[np.ndarray] = None
        self.history = []

    def __call__(self, x: np.ndarray) -> float:
        if not self._space.contains(x, tol=1e-12):
            raise AssertionError("evaluated point escaped the search box")
        f = float(self._objective(x))
        self.evals += 1
        if f < self.f_best:
            self.f_best = f
            self.x_best = np.array(x)
        if self._record:
            self.history.append((self.evals, self.f_best))
        return f

    def remaining(self, budget: int) -> int:
        return budget - self.evals


def _tsallis_factors(qv: float) -> tuple:
    factor2 = math.exp((4.0 - qv) * math.log(qv - 1.0))
    factor3 = math.exp((2.0 - qv) * math.log(2.0) / (qv - 1.0))
    factor4p = math.sqrt(math.pi) * factor2 / (factor3 * (3.0 - qv))
    factor5 = 1.0 / (qv - 1.0) - 0.5
    d1 = 2.0 - factor5
    factor6 = (math.pi * (1.0 - factor5)
               / math.sin(math.pi * (1.0 - factor5))
               / math.exp(math.lgamma(d1)))
    return factor4p, factor6


def _visit_values(rng, qv: float, temperature: float, count: int,
                  factor4p: float, factor6: float) -> np.ndarray:
    """Heavy-tailed Tsallis visiting deviates."""
    x = rng.normal(size=count)
    y = rng.normal(size=count)
    factor1 = math.exp(math.log(temperature) / (qv - 1.0))
    factor4 = factor4p * factor1
    x *= math.exp(-(qv - 1.0) * math.log(factor6 / factor4) / (3.0 - qv))
    den = np.exp((qv - 1.0) * np.log(np.fabs(y)) / (3.0 - qv))
    return x / den


def _fold_into_bounds(value: float, lo: float, span: float) -> float:
    folded = math.fmod(math.fmod(value - lo, span) + span, span) + lo
    if abs(folded - lo) < MIN_VISIT_BOUND:
        folded += MIN_VISIT_BOUND
    return folded


def _visit_point(rng, x: np.ndarray, step: int, temperature: float,
                 space: SearchSpace, qv: float,
                 factors: tuple) -> np.ndarray:
    """One visiting move: all coordinates early in the chain, then one at
    a time, folded back into the box."""
    dim = x.size
    factor4p, factor6 = factors
    if step < dim:
        visits = _visit_values(rng, qv, temperature, dim, factor4p, factor6)
        big = visits > TAIL_LIMIT
        small = visits < -TAIL_LIMIT
        if big.any():
            visits[big] = TAIL_LIMIT * rng.uniform()
        if small.any():
            visits[small] = -TAIL_LIMIT * rng.uniform()
        x_visit = x + visits
        for i in range(dim):
            x_visit[i] = _fold_into_bounds(x_visit[i], space.lower[i],
                                           space.span[i])
    else:
        x_visit = x.copy()
        visit = float(_visit_values(rng, qv, temperature, 1,
                                    factor4p, factor6)[0])
        if visit > TAIL_LIMIT:
            visit = TAIL_LIMIT * rng.uniform()
        elif visit < -TAIL_LIMIT:
            visit = -TAIL_LIMIT * rng.uniform()
        index = step - dim
        x_visit[index] = _fold_into_bounds(x[index] + visit,
                                           space.lower[index],
                                           space.span[index])
    return x_visit


def _fd_gradient(objective, x: np.ndarray, space: SearchSpace) -> tuple:
    """Central finite differences with probes clipped to the box.

    Step h_i = 1e-6 * (1 + |x_i|); the divisor uses the actual (possibly
    clipped) probe separation. Returns (gradient, evals_spent).
    """
    dim = x.size
    g = np.empty(dim)
    for i in range(dim):
        h = 1e-6 * (1.0 + abs(x[i]))
        hi_x = x.copy()
        lo_x = x.copy()
        hi_x[i] = min(x[i] + h, space.upper[i])
        lo_x[i] = max(x[i] - h, space.lower[i])
        denom = hi_x[i] - lo_x[i]
        g[i] = (objective(hi_x) - objective(lo_x)) / denom
    return g, 2 * dim


def local_refine(objective: Callable, x0, space: SearchSpace,
                 max_iters: int = REFINE_MAX_ITERS) -> AnnealResult:
    """Projected gradient descent with a backtracking Armijo line search.

    Terminates on the first iteration with no improving step; never returns
    a point worse than x0.
    """
    x = space.clip(np.array(x0, dtype=np.float64).reshape(-1))
    if x.shape != space.lower.shape:
        raise ValueError("x0 dimension mismatch")
    fx = float(objective(x))
    evals = 1
    for _ in range(max_iters):
        g, spent = _fd_gradient(objective, x, space)
        evals += spent
        gnorm2 = float(g @ g)
        if gnorm2 == 0.0:
            break
        alpha = 1.0
        improved = False
        for _bt in range(BACKTRACK_MAX):
            x_new = space.clip(x - alpha * g)
            f_new = float(objective(x_new))
            evals += 1
            if f_new <= fx - ARMIJO_C1 * alpha * gnorm2:
                x, fx = x_new, f_new
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return AnnealResult(x_best=x, f_best=fx, evals_used=evals)


def minimize(objective: Callable, space: SearchSpace,
             cfg: AnnealConfig) -> AnnealResult:
    """Global annealing search over the box, starting from its midpoint."""
    dim = space.dimension
    if cfg.max_evals < dim:
        raise ValueError("max_evals must be at least the dimension")
    rng = np.random.Generator(np.random.PCG64(cfg.rng_seed))
    tracker = _BudgetTracker(objective, space, cfg.record_history)
    qv = cfg.visit_param
    qa = cfg.accept_param
    factors = _tsallis_factors(qv)
    t1 = math.exp((qv - 1.0) * math.log(2.0)) - 1.0
    restart_temp = cfg.initial_temp * cfg.restart_temp_ratio

    x_current = space.midpoint()
    f_current = tracker(x_current)

    anneal_step = 0
    while tracker.remaining(cfg.max_evals) > 0:
        s = float(anneal_step) + 2.0
        t2 = math.exp((qv - 1.0) * math.log(s)) - 1.0
        temperature = cfg.initial_temp * t1 / t2
        if temperature < restart_temp:
            # schedule exhausted: restart the chain from a random point
            x_current = space.lower + rng.uniform(size=dim) * space.span
            f_current = tracker(x_current)
            anneal_step = 0
            continue
        temperature_step = temperature / float(anneal_step + 1)
        improved_in_chain = False
        for j in range(2 * dim):
            if tracker.remaining(cfg.max_evals) <= 0:
                break
            x_visit = _visit_point(rng, x_current, j, temperature, space,
                                   qv, factors)
            f_visit = tracker(x_visit)
            if f_visit < f_current:
                x_current, f_current = x_visit, f_visit
                improved_in_chain = True
            else:
                r = rng.uniform()
                pqv_temp = 1.0 - ((1.0 - qa) * (f_visit - f_current)
                                  / temperature_step)
                if pqv_temp > 0.0:
                    pqv = math.exp(math.log(pqv_temp) / (1.0 - qa))
                    if r <= pqv:
                        x_current, f_current = x_visit, f_visit
        if (cfg.local_refine and improved_in_chain
                and tracker.remaining(cfg.max_evals) > 0):
            # a refine iteration costs at most 2*dim + BACKTRACK_MAX + 1
            # evals; cap iterations so the budget is never exceeded
            per_iter = 2 * dim + BACKTRACK_MAX + 1
            iters = min(REFINE_MAX_ITERS,
                        tracker.remaining(cfg.max_evals) // per_iter)
            if iters >= 1:
                refined = local_refine(tracker, tracker.x_best, space,
                                       max_iters=iters)
                if refined.f_best < f_current:
                    x_current, f_current = refined.x_best, refined.f_best
        anneal_step += 1

    return AnnealResult(x_best=np.array(tracker.x_best),
                        f_best=float(tracker.f_best),
                        evals_used=tracker.evals,
                        history=tuple(tracker.history))

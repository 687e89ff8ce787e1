"""Differential-evolution baseline over concatenated (lambda, rho) coefficients.

A member is ``[lambda_2..lambda_max | rho_2..rho_max]``; its fitness is

    |eps_sh - eps_bp| + |R - rate| + |1 - sum(lambda)| + |1 - sum(rho)|

with ``eps_bp`` and ``rate`` taken on the clamped, normalized candidate.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .de_engine import ThresholdConfig, _bisect
from .degree_dist import CodeParams, DegreeDistribution, InvalidDistributionError
from .training.model import InvalidConfigError

__all__ = ["DiffEConfig", "DePopulation", "DiffEResult", "diffe_loss", "diffe_optimize",
           "split_dimension", "time_to_loss", "write_history"]

# fitness of a candidate whose clamped coefficients are all zero
DEGENERATE_PENALTY = 2.0


@dataclass(frozen=True)
class DiffEConfig:
    F: float = 0.8
    CR: float = 0.9
    pop_size: int | None = None  # None: 10 x dimension
    literal_rate: bool = False
    # coarser than the reporting threshold: fitness is evaluated pop_size times per epoch
    grid_points: int = 1000
    depth: int = 20


@njit(cache=True)
def _fitness(v, n_lam, eps_sh, rate, literal, grid_points, depth):
    n_rho = v.shape[0] - n_lam
    lam = np.zeros(n_lam + 1)
    rho = np.zeros(n_rho + 1)
    sl = 0.0
    sr = 0.0
    for j in range(n_lam):
        sl += v[j]
        lam[j + 1] = min(max(v[j], 0.0), 1.0)
    for j in range(n_rho):
        sr += v[n_lam + j]
        rho[j + 1] = min(max(v[n_lam + j], 0.0), 1.0)
    validity = abs(1.0 - sl) + abs(1.0 - sr)
    tl = lam.sum()
    tr = rho.sum()
    if tl <= 0.0 or tr <= 0.0:
        return DEGENERATE_PENALTY + validity
    lam /= tl
    rho /= tr
    al = 0.0
    ar = 0.0
    for j in range(lam.shape[0]):
        al += lam[j] / (j + 1)
    for j in range(rho.shape[0]):
        ar += rho[j] / (j + 1)
    if literal:
        rate_term = abs(rate - (1.0 - 1.0 / al - 1.0 / ar))
    else:
        rate_term = abs(rate - (1.0 - ar / al))
    eps_bp = _bisect(lam, rho, 0, depth, grid_points, False, 1, 1e-8)
    return abs(eps_sh - eps_bp) + rate_term + validity


def diffe_loss(lam: DegreeDistribution, rho: DegreeDistribution, code: CodeParams,
               literal_rate: bool = False,
               threshold_config: ThresholdConfig = ThresholdConfig()) -> float:
    """Baseline loss of a (possibly invalid) pair.

    ``literal_rate`` switches the rate term to ``|R - (1 - lam_bar - rho_bar)|``
    with node-average degrees ``lam_bar``, ``rho_bar``.
    """
    if lam.max_degree < 2 or rho.max_degree < 2:
        raise InvalidDistributionError("need maximum degrees >= 2")
    v = np.concatenate([lam.as_array()[1:], rho.as_array()[1:]])
    return float(_fitness(v, lam.max_degree - 1, 1.0 - code.rate, code.rate, literal_rate,
                          threshold_config.grid_points, threshold_config.depth))


@dataclass
class DePopulation:
    members: np.ndarray  # (pop_size, dimension)
    fitness: np.ndarray
    generation: int = 0

    def __post_init__(self):
        if self.members.shape[0] < 4:
            raise InvalidConfigError("pop_size must be >= 4")

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.fitness))


@dataclass
class DiffEResult:
    lam: DegreeDistribution
    rho: DegreeDistribution
    best_loss: float
    history: list[tuple[int, float, float]] = field(default_factory=list)  # epoch, loss, seconds
    wall_time: float = 0.0

    def __iter__(self):
        return iter((self.lam, self.rho, self.history, self.wall_time))


def split_dimension(dimension: int) -> tuple[int, int]:
    """``(lambda_max, rho_max)`` with ``dimension`` free coefficients, in the 14:11 proportion of (15, 12)."""
    if dimension < 2:
        raise InvalidConfigError("dimension must be >= 2")
    n_lam = max(1, min(dimension - 1, round(dimension * 14 / 25)))
    return n_lam + 1, dimension - n_lam + 1


def _unpack(v: np.ndarray, n_lam: int):
    lam = DegreeDistribution.from_array(np.concatenate([[0.0], v[:n_lam]]))
    rho = DegreeDistribution.from_array(np.concatenate([[0.0], v[n_lam:]]))
    return lam, rho


def diffe_optimize(code: CodeParams, lambda_max: int, rho_max: int, budget_epochs: int,
                   seed: int = 0, config: DiffEConfig = DiffEConfig(),
                   target_loss: float | None = None) -> DiffEResult:
    """DE/rand/1/bin with greedy selection; one epoch is one generation.

    Stops early once the best loss drops to ``target_loss`` (when given).
    The returned pair holds the raw coefficients of the best member.
    """
    if budget_epochs < 1:
        raise InvalidConfigError("budget_epochs must be >= 1")
    if lambda_max < 2 or rho_max < 2:
        raise InvalidConfigError("maximum degrees must be >= 2")
    n_lam = lambda_max - 1
    dim = n_lam + rho_max - 1
    pop_size = config.pop_size or 10 * dim
    if pop_size < 4:
        raise InvalidConfigError("pop_size must be >= 4")
    rng = np.random.default_rng(seed)
    eps_sh = 1.0 - code.rate

    def fit(v):
        return _fitness(v, n_lam, eps_sh, code.rate, config.literal_rate,
                        config.grid_points, config.depth)

    t0 = time.perf_counter()
    members = rng.uniform(0.0, 1.0, (pop_size, dim))
    members[:, :n_lam] /= members[:, :n_lam].sum(axis=1, keepdims=True)
    members[:, n_lam:] /= members[:, n_lam:].sum(axis=1, keepdims=True)
    pop = DePopulation(members, np.array([fit(m) for m in members]))
    history = []
    for epoch in range(budget_epochs):
        for i in range(pop_size):
            others = rng.choice(pop_size - 1, 3, replace=False)
            a, b, c = pop.members[others + (others >= i)]
            mutant = a + config.F * (b - c)
            cross = rng.random(dim) < config.CR
            cross[rng.integers(dim)] = True
            trial = np.where(cross, mutant, pop.members[i])
            f = fit(trial)
            if f <= pop.fitness[i]:
                pop.members[i] = trial
                pop.fitness[i] = f
        pop.generation += 1
        best = float(pop.fitness.min())
        history.append((epoch, best, time.perf_counter() - t0))
        if target_loss is not None and best <= target_loss:
            break
    lam, rho = _unpack(pop.members[pop.best_index], n_lam)
    return DiffEResult(lam, rho, float(pop.fitness.min()), history, time.perf_counter() - t0)


def time_to_loss(history, target: float) -> float:
    """Seconds until the best loss first reaches ``target`` (``inf`` if never)."""
    for _, loss, seconds in history:
        if loss <= target:
            return seconds
    return math.inf


def write_history(path, history) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("epoch", "best_loss", "wall_seconds"))
        for epoch, loss, seconds in history:
            w.writerow((epoch, repr(float(loss)), repr(float(seconds))))

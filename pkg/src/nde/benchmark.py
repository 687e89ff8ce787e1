"""Wall-clock comparisons: unroll-depth scaling and NDE versus differential evolution."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .de_engine import threshold
from .degree_dist import CodeParams, project_to_valid
from .diffevo import DiffEConfig, diffe_loss, diffe_optimize, split_dimension, time_to_loss
from .training import kernels as K
from .training.model import TrainConfig, pack_params
from .training.trainer import train

__all__ = ["time_unroll", "linear_r2", "MethodRun", "compare_at_dimension"]


def time_unroll(depths: Sequence[int], n_lambda: int = 15, n_rho: int = 12,
                batch: int = 256, repeats: int = 5, seed: int = 0) -> list[float]:
    """Median seconds of one forward+backward pass over ``batch`` samples per depth."""
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.0, 1.0, n_lambda + n_rho)
    w[:n_lambda] /= w[:n_lambda].sum()
    w[n_lambda:] /= w[n_lambda:].sum()
    mask = np.ones(w.shape[0], bool)
    eps = rng.uniform(0.3, 1.0, batch)  # mostly unclamped, so every layer is traversed
    label = eps.copy()
    idx = np.arange(batch)
    grad = np.zeros_like(w)
    comps = np.zeros(K.N_COMPONENTS)
    out = []
    for depth in depths:
        params = pack_params(TrainConfig(o_low=0.0), depth)
        K.loss_grad(w, mask, n_lambda, params, eps, eps, label, idx, grad, comps, True)
        samples = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            K.loss_grad(w, mask, n_lambda, params, eps, eps, label, idx, grad, comps, True)
            samples.append(time.perf_counter() - t0)
        out.append(float(np.median(samples)))
    return out


def linear_r2(x: Sequence[float], y: Sequence[float]) -> float:
    """Coefficient of determination of the least-squares line through ``(x, y)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0


@dataclass
class MethodRun:
    method: str
    dimension: int
    wall_seconds: float  # time to first reach the matched loss
    final_delta: float
    final_loss: float
    total_seconds: float

    def row(self):
        return (self.method, self.dimension, self.wall_seconds, self.final_delta)


def _nde_loss_curve(history, code: CodeParams, seconds: Sequence[float]):
    """``(epoch, baseline loss, cumulative seconds)`` per epoch of an NDE run."""
    eps_sh = 1.0 - code.rate
    t = np.cumsum(seconds)
    return [(r.epoch, abs(eps_sh - r.eps_bp) + abs(code.rate - r.rate), float(t[i]))
            for i, r in enumerate(history) if math.isfinite(r.delta)]


def compare_at_dimension(code: CodeParams, dimension: int, train_config: TrainConfig,
                         diffe_budget: int = 250, seed: int = 0,
                         diffe_config: DiffEConfig = DiffEConfig()) -> tuple[MethodRun, MethodRun]:
    """One NDE run and one DiffE run with ``dimension`` free coefficients.

    Both are scored by the baseline loss; the matched level is the worse of the
    two final losses and each method is timed until it first reaches it.
    """
    lambda_max, rho_max = split_dimension(dimension)
    cfg = TrainConfig(**{**train_config.to_dict(), "lambda_max": lambda_max,
                         "rho_max": rho_max, "seed": seed})
    res = train(cfg, code)
    nde_curve = _nde_loss_curve(res.history, code, res.epoch_seconds)
    lam, rho = res.model.projected_pair()
    nde_loss = diffe_loss(lam, rho, code, diffe_config.literal_rate)
    nde_delta = threshold(lam, rho).gap_delta

    de = diffe_optimize(code, lambda_max, rho_max, diffe_budget, seed, diffe_config)
    try:
        de_delta = threshold(project_to_valid(de.lam), project_to_valid(de.rho)).gap_delta
    except ValueError:
        de_delta = math.nan
    matched = max(nde_loss, de.best_loss)
    nde = MethodRun("nde", dimension, time_to_loss(nde_curve, matched), nde_delta, nde_loss,
                    float(sum(res.epoch_seconds)))
    diffe = MethodRun("diffe", dimension, time_to_loss(de.history, matched), de_delta,
                      de.best_loss, de.wall_time)
    return nde, diffe

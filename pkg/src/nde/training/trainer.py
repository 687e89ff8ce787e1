"""Training loop: initialization, masking, curriculum, per-epoch evaluation."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..de_engine import ThresholdConfig, threshold
from ..degree_dist import CodeParams, InvalidDistributionError
from . import kernels as K
from .dataset import Dataset, below_capacity_cap, generate_dataset
from .model import (COMPONENT_NAMES, OPTIMIZERS, NdeModel, TrainConfig, degree_targets,
                    pack_params)
from .optim import OptState

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "total_loss") + COMPONENT_NAMES + ("delta",)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class EpochRecord:
    epoch: int
    total_loss: float
    mse: float
    omega_lambda: float
    omega_rho: float
    omega_avg_lambda: float
    omega_avg_rho: float
    stab: float
    delta: float
    eps_bp: float = math.nan
    rate: float = math.nan

    def row(self):
        return [getattr(self, c) for c in HISTORY_COLUMNS]


@dataclass
class TrainResult:
    model: NdeModel
    history: list[EpochRecord]
    best_epoch: int
    best_delta: float
    epoch_seconds: list[float] = field(default_factory=list)

    def __iter__(self):
        # allows ``model, history = train(...)``
        return iter((self.model, self.history))


def init_model(config: TrainConfig, rng: np.random.Generator) -> NdeModel:
    """Uniform [0, 1] weights on the trainable support, masked, normalized per layer."""
    parts = []
    for size, first_ok in ((config.lambda_max, config.allow_degree_one),
                           (config.rho_max, False)):
        mask = np.ones(size, bool)
        mask[0] = first_ok
        allowed = np.flatnonzero(mask)
        n_off = int(round(config.mask_fraction * allowed.size))
        n_off = min(n_off, allowed.size - 1)
        if n_off > 0:
            mask[rng.choice(allowed, n_off, replace=False)] = False
        w = rng.uniform(0.0, 1.0, size) * mask
        parts.append((w / w.sum(), mask))
    (lw, ml), (rw, mr) = parts
    return NdeModel(lw, rw, ml, mr, config.layers)


def evaluate_delta(model: NdeModel, grid_points: int = 10000):
    """Gap, threshold and design rate of the projected weights (``nan``s if degenerate)."""
    try:
        lam, rho = model.projected_pair()
        res = threshold(lam, rho, ThresholdConfig(grid_points=grid_points))
    except InvalidDistributionError:
        return math.inf, math.nan, math.nan
    return res.gap_delta, res.eps_bp, 1.0 - res.eps_sh


def train(config: TrainConfig, code: CodeParams) -> TrainResult:
    """Train one model from ``config.seed``; returns the best-gap snapshot."""
    config.validate()
    rng = np.random.default_rng([config.seed, 0])
    model = init_model(config, rng)
    w = model.flat_weights()
    mask = model.flat_mask()
    n_lam = model.n_lambda
    _, rho_bar = degree_targets(config, code)
    # stability hinge referenced to the hardest channel the design must decode
    params = pack_params(config, config.layers, code, below_capacity_cap(code, rho_bar, 1.0))
    state = OptState.zeros(w.shape[0])
    opt = OPTIMIZERS[config.optimizer]
    test = generate_dataset(code, rho_bar, config.d_test, 1.0, [config.seed, 1],
                            config.above_fraction, config.above_label)
    test_idx = np.arange(len(test))
    ramp = min(config.curriculum_epochs or config.epochs, config.epochs)

    history: list[EpochRecord] = []
    seconds: list[float] = []
    best = (math.inf, -1, model.copy())
    best_any = (math.inf, -1, model.copy())
    stale = 0
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        phase = 1.0 if ramp <= 1 else min(1.0, epoch / (ramp - 1))
        data = generate_dataset(code, rho_bar, config.d_train, phase, [config.seed, 2, epoch],
                                config.above_fraction, config.above_label)
        order = rng.permutation(len(data))
        mean_loss, state.step = K.run_epoch(
            w, mask, n_lam, params, data.eps, data.x0, data.label, order,
            config.batch_size, opt, config.learning_rate, state.s1, state.s2, state.step)
        if not math.isfinite(mean_loss) or not np.all(np.isfinite(w)):
            raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
        model.set_flat(w)
        rec = _record(epoch, model, test, test_idx, params, config)
        seconds.append(time.perf_counter() - t0)
        history.append(rec)

        snapshot = (rec.delta, epoch, model.copy())
        if rec.delta < best_any[0]:
            best_any = snapshot
        eligible = (config.rate_tolerance is None
                    or abs(rec.rate - code.rate) <= config.rate_tolerance)
        if eligible and rec.delta < best[0]:
            best = snapshot
            stale = 0
        elif phase >= 1.0:
            # patience only runs once the full eps range is being trained on
            stale += 1
        log.debug("epoch %d loss %.4g delta %.4f rate %.4f", epoch, rec.total_loss,
                  rec.delta, rec.rate)
        if stale >= config.early_stop_patience:
            break
    if best[1] < 0:
        best = best_any
    return TrainResult(best[2], history, best[1], best[0], seconds)


def _record(epoch, model, test: Dataset, idx, params, config) -> EpochRecord:
    grad = np.zeros(model.flat_weights().shape[0])
    comps = np.zeros(K.N_COMPONENTS)
    total = K.loss_grad(model.flat_weights(), model.flat_mask(), model.n_lambda, params,
                        test.eps, test.x0, test.label, idx, grad, comps, False)
    delta, eps_bp, rate = evaluate_delta(model, config.threshold_grid_points)
    return EpochRecord(epoch, float(total), *map(float, comps), delta=delta,
                       eps_bp=eps_bp, rate=rate)


def train_restarts(config: TrainConfig, code: CodeParams, restarts: int) -> tuple[TrainResult, list[TrainResult]]:
    """Independent runs with seeds ``config.seed + r``; returns (best, all)."""
    runs = []
    for r in range(restarts):
        cfg = TrainConfig(**{**config.to_dict(), "seed": config.seed + r})
        runs.append(train(cfg, code))
    best = min(runs, key=lambda res: res.best_delta)
    return best, runs


def write_history(path, history: list[EpochRecord]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(HISTORY_COLUMNS)
        for rec in history:
            w.writerow([v if isinstance(v, int) else repr(float(v)) for v in rec.row()])

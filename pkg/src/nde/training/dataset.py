from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..de_engine import bp_noise_bound
from ..degree_dist import CodeParams
from .model import InvalidConfigError, TrainingSample


@dataclass
class Dataset:
    """Column-oriented training samples."""
    eps: np.ndarray
    x0: np.ndarray
    label: np.ndarray

    def __len__(self) -> int:
        return self.eps.shape[0]

    def __iter__(self):
        for e, x, y in zip(self.eps, self.x0, self.label):
            yield TrainingSample(float(e), float(x), float(y))

    def __getitem__(self, i) -> TrainingSample:
        return TrainingSample(float(self.eps[i]), float(self.x0[i]), float(self.label[i]))


def below_capacity_cap(code: CodeParams, rho_bar_target: float, curriculum_phase: float) -> float:
    """Largest eps of the label-0 samples at the given curriculum phase."""
    _, eps_bp_max = bp_noise_bound(code.rate, rho_bar_target)
    return eps_bp_max * (0.5 + 0.5 * float(np.clip(curriculum_phase, 0.0, 1.0)))


def generate_dataset(code: CodeParams, rho_bar_target: float, size: int,
                     curriculum_phase: float = 1.0, seed=0,
                     above_fraction: float = 0.2,
                     above_label: float | None = None) -> Dataset:
    """Sample ``(eps, x0 = eps, label)`` triples.

    Below-capacity samples draw eps uniformly on ``[0, eps_hi]`` where
    ``eps_hi = eps_bp_max * (0.5 + 0.5 * curriculum_phase)`` and get label 0.
    A fraction ``above_fraction`` is drawn on ``(1 - R, 1)`` and labeled with
    ``above_label``, or with eps itself when that is None.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    _, eps_bp_max = bp_noise_bound(code.rate, rho_bar_target)
    if not eps_bp_max > 0:
        raise InvalidConfigError(f"achievable noise {eps_bp_max:.4g} is not positive")
    rng = np.random.default_rng(seed)
    n_above = int(round(above_fraction * size))
    n_below = size - n_above
    eps_hi = below_capacity_cap(code, rho_bar_target, curriculum_phase)
    below = rng.uniform(0.0, eps_hi, n_below)
    eps_sh = 1.0 - code.rate
    above = rng.uniform(eps_sh, 1.0, n_above)
    eps = np.concatenate([below, above])
    if above_label is None:
        label = np.concatenate([np.zeros(n_below), above])
    else:
        label = np.concatenate([np.zeros(n_below), np.full(n_above, float(above_label))])
    perm = rng.permutation(size)
    return Dataset(eps[perm], eps[perm].copy(), label[perm])

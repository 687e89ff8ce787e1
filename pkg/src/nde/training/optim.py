"""Gradient-descent variants over flat weight vectors.

Each ``*_step`` returns the new state and new weights and leaves its inputs
untouched; the training loop uses the in-place kernels directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K


@dataclass
class OptState:
    s1: np.ndarray  # rmsprop accumulator / adam first moment
    s2: np.ndarray  # adam second moment
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "OptState":
        return cls(np.zeros(n), np.zeros(n), 0)

    def copy(self) -> "OptState":
        return OptState(self.s1.copy(), self.s2.copy(), self.step)


def sgd_step(state: OptState, weights, gradient, lr: float):
    w = np.array(weights, dtype=float)
    K.sgd_update(w, np.asarray(gradient, dtype=float), lr)
    new = state.copy()
    new.step += 1
    return new, w


def rmsprop_step(state: OptState, weights, gradient, lr: float):
    w = np.array(weights, dtype=float)
    new = state.copy()
    K.rmsprop_update(w, np.asarray(gradient, dtype=float), new.s1, lr)
    new.step += 1
    return new, w


def adam_step(state: OptState, weights, gradient, lr: float):
    w = np.array(weights, dtype=float)
    new = state.copy()
    new.step += 1
    K.adam_update(w, np.asarray(gradient, dtype=float), new.s1, new.s2, new.step, lr)
    return new, w


STEPS = {"sgd": sgd_step, "rmsprop": rmsprop_step, "adam": adam_step}

"""Trainable model, configuration and the loss/gradient entry points."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Iterable, Literal, Sequence

import numpy as np

from ..de_engine import DeTrace
from ..degree_dist import DegreeDistribution, project_to_valid
from . import kernels as K

AVG_MODES = {"edge": K.AVG_EDGE, "node": K.AVG_NODE, "shifted": K.AVG_SHIFTED}
OPTIMIZERS = {"sgd": K.OPT_SGD, "rmsprop": K.OPT_RMSPROP, "adam": K.OPT_ADAM}
COMPONENT_NAMES = ("mse", "omega_lambda", "omega_rho", "omega_avg_lambda",
                   "omega_avg_rho", "stab")


class InvalidConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingSample:
    epsilon: float
    x0: float
    label: float


@dataclass
class TrainConfig:
    epochs: int = 200
    d_train: int = 11220
    d_test: int = 2783
    learning_rate: float = 1e-4
    batch_size: int = 4
    layers: int = 10
    o_low: float = 0.0009
    c_mse: float = 100.0
    c_lambda: float = 6.0
    c_rho: float = 6.0
    c_avg_lambda: float = 1.0
    c_avg_rho: float = 1.0
    c_stab: float = 100.0
    optimizer: Literal["sgd", "rmsprop", "adam"] = "rmsprop"
    mask_fraction: float = 0.0
    early_stop_patience: int = 10
    seed: int = 0
    lambda_max: int = 15
    rho_max: int = 12
    target_avg_lambda: float = 3.55
    target_avg_rho: float = 7.10
    avg_degree_mode: Literal["node", "edge", "shifted"] = "node"
    density_targets: bool = False
    above_fraction: float = 0.2
    above_label: float | None = None  # None: label each above-capacity sample with its own eps
    curriculum_epochs: int | None = 50  # None: ramp over all epochs
    allow_degree_one: bool = False
    rate_tolerance: float | None = 0.01
    threshold_grid_points: int = 10000

    def validate(self) -> None:
        for name in ("c_mse", "c_lambda", "c_rho", "c_avg_lambda", "c_avg_rho", "c_stab"):
            if getattr(self, name) < 0:
                raise InvalidConfigError(f"{name} must be >= 0")
        if not self.learning_rate > 0:
            raise InvalidConfigError("learning_rate must be > 0")
        if not 0 <= self.o_low < 1:
            raise InvalidConfigError("o_low must lie in [0, 1)")
        if not 0 <= self.mask_fraction < 1:
            raise InvalidConfigError("mask_fraction must lie in [0, 1)")
        if self.optimizer not in OPTIMIZERS:
            raise InvalidConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.avg_degree_mode not in AVG_MODES:
            raise InvalidConfigError(f"unknown avg_degree_mode {self.avg_degree_mode!r}")
        if self.epochs < 1 or self.layers < 1 or self.batch_size < 1:
            raise InvalidConfigError("epochs, layers and batch_size must be >= 1")
        if self.d_train < 1 or self.d_test < 1:
            raise InvalidConfigError("dataset sizes must be >= 1")
        if self.lambda_max < 2 or self.rho_max < 2:
            raise InvalidConfigError("maximum degrees must be >= 2")
        if not 0 <= self.above_fraction < 1:
            raise InvalidConfigError("above_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidConfigError(f"unknown train keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class NdeModel:
    """Raw (unprojected) weights; entry ``j`` is the coefficient of degree ``j + 1``."""
    lambda_weights: np.ndarray
    rho_weights: np.ndarray
    mask_lambda: np.ndarray
    mask_rho: np.ndarray
    unroll_depth: int = 10

    def __post_init__(self):
        self.lambda_weights = np.asarray(self.lambda_weights, dtype=float)
        self.rho_weights = np.asarray(self.rho_weights, dtype=float)
        self.mask_lambda = np.asarray(self.mask_lambda, dtype=bool)
        self.mask_rho = np.asarray(self.mask_rho, dtype=bool)
        if self.unroll_depth < 1:
            raise ValueError("unroll_depth must be >= 1")
        if self.lambda_weights.shape != self.mask_lambda.shape:
            raise ValueError("lambda mask shape mismatch")
        if self.rho_weights.shape != self.mask_rho.shape:
            raise ValueError("rho mask shape mismatch")
        self.lambda_weights[~self.mask_lambda] = 0.0
        self.rho_weights[~self.mask_rho] = 0.0

    @classmethod
    def from_pair(cls, lam: DegreeDistribution, rho: DegreeDistribution,
                  lambda_max: int | None = None, rho_max: int | None = None,
                  unroll_depth: int = 10) -> "NdeModel":
        """Model holding the given coefficients with every degree >= 2 trainable."""
        lw = lam.as_array(lambda_max or lam.max_degree)
        rw = rho.as_array(rho_max or rho.max_degree)
        ml = np.ones(lw.shape, bool)
        mr = np.ones(rw.shape, bool)
        ml[0] = lw[0] != 0.0
        mr[0] = False
        return cls(lw, rw, ml, mr, unroll_depth)

    @property
    def n_lambda(self) -> int:
        return self.lambda_weights.shape[0]

    def flat_weights(self) -> np.ndarray:
        return np.concatenate([self.lambda_weights, self.rho_weights])

    def flat_mask(self) -> np.ndarray:
        return np.concatenate([self.mask_lambda, self.mask_rho])

    def set_flat(self, w: np.ndarray) -> None:
        self.lambda_weights = w[:self.n_lambda].copy()
        self.rho_weights = w[self.n_lambda:].copy()

    def copy(self) -> "NdeModel":
        return NdeModel(self.lambda_weights.copy(), self.rho_weights.copy(),
                        self.mask_lambda.copy(), self.mask_rho.copy(), self.unroll_depth)

    def raw_pair(self) -> tuple[DegreeDistribution, DegreeDistribution]:
        return (DegreeDistribution.from_array(self.lambda_weights),
                DegreeDistribution.from_array(self.rho_weights))

    def projected_pair(self) -> tuple[DegreeDistribution, DegreeDistribution]:
        lam, rho = self.raw_pair()
        return project_to_valid(lam), project_to_valid(rho)

    def to_json(self) -> dict:
        return {"lambda_weights": self.lambda_weights.tolist(),
                "rho_weights": self.rho_weights.tolist(),
                "mask_lambda": self.mask_lambda.tolist(),
                "mask_rho": self.mask_rho.tolist(),
                "unroll_depth": self.unroll_depth}

    @classmethod
    def from_json(cls, obj: dict) -> "NdeModel":
        return cls(obj["lambda_weights"], obj["rho_weights"], obj["mask_lambda"],
                   obj["mask_rho"], obj["unroll_depth"])


@dataclass
class GradientVector:
    d_lambda: np.ndarray
    d_rho: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.d_lambda, self.d_rho])


def degree_targets(config: TrainConfig, code=None) -> tuple[float, float]:
    """Average-degree targets; the density rule needs code parameters."""
    if config.density_targets:
        if code is None:
            raise InvalidConfigError("density targets need code parameters")
        return code.density * (code.n - code.k), code.density * code.n
    return config.target_avg_lambda, config.target_avg_rho


def pack_params(config: TrainConfig, layers: int, code=None, eps_ref: float = 0.0) -> np.ndarray:
    p = np.zeros(K.N_PARAMS)
    p[K.P_C_MSE] = config.c_mse
    p[K.P_C_LAM] = config.c_lambda
    p[K.P_C_RHO] = config.c_rho
    p[K.P_C_AVG_LAM] = config.c_avg_lambda
    p[K.P_C_AVG_RHO] = config.c_avg_rho
    p[K.P_C_STAB] = config.c_stab
    p[K.P_O_LOW] = config.o_low
    p[K.P_TARGET_LAM], p[K.P_TARGET_RHO] = degree_targets(config, code)
    p[K.P_AVG_MODE] = AVG_MODES[config.avg_degree_mode]
    p[K.P_LAYERS] = layers
    p[K.P_EPS_REF] = eps_ref
    return p


def batch_arrays(batch: Iterable[TrainingSample]):
    batch = list(batch)
    if not batch:
        raise ValueError("batch must be nonempty")
    eps = np.array([s.epsilon for s in batch], dtype=float)
    x0 = np.array([s.x0 for s in batch], dtype=float)
    label = np.array([s.label for s in batch], dtype=float)
    return eps, x0, label


def forward(model: NdeModel, sample: TrainingSample, o_low: float = 0.0009):
    """Unrolled prediction for one sample; returns ``(prediction, trace)``."""
    w = model.flat_weights()
    xs = np.empty(model.unroll_depth + 1)
    xn = K.unroll(w, model.n_lambda, float(sample.epsilon), float(sample.x0),
                  model.unroll_depth, xs)
    trace = DeTrace(float(sample.epsilon), xs, bool(xn < o_low), model.unroll_depth)
    return (xn if xn >= o_low else 0.0), trace


def _evaluate(model, batch, config, code, eps_ref, with_grad):
    eps, x0, label = batch_arrays(batch)
    w = model.flat_weights()
    grad = np.zeros_like(w)
    comps = np.zeros(K.N_COMPONENTS)
    params = pack_params(config, model.unroll_depth, code, eps_ref or 0.0)
    idx = np.arange(eps.shape[0])
    total = K.loss_grad(w, model.flat_mask(), model.n_lambda, params, eps, x0, label,
                        idx, grad, comps, with_grad)
    return total, comps, grad


def loss(model: NdeModel, batch: Sequence[TrainingSample], config: TrainConfig, code=None,
         eps_ref: float | None = None):
    """Composite training loss; returns ``(total, components)``.

    The stability hinge compares ``lambda'(0) rho'(1)`` with ``1 / eps_ref``;
    by default ``eps_ref`` is the largest eps among label-0 samples in the batch.
    """
    total, comps, _ = _evaluate(model, batch, config, code, eps_ref, False)
    return float(total), dict(zip(COMPONENT_NAMES, map(float, comps)))


def backward(model: NdeModel, batch: Sequence[TrainingSample], config: TrainConfig,
             code=None, eps_ref: float | None = None) -> GradientVector:
    _, _, grad = _evaluate(model, batch, config, code, eps_ref, True)
    return GradientVector(grad[:model.n_lambda].copy(), grad[model.n_lambda:].copy())


def weighted_total(components: dict, config: TrainConfig) -> float:
    return (config.c_mse * components["mse"]
            + config.c_lambda * components["omega_lambda"]
            + config.c_rho * components["omega_rho"]
            + config.c_avg_lambda * abs(components["omega_avg_lambda"])
            + config.c_avg_rho * abs(components["omega_avg_rho"])
            + config.c_stab * components["stab"])

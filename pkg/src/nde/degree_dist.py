"""Edge-perspective degree distributions and code parameters.

A distribution stores ``coeffs[d]``: the fraction of edges attached to a node
of degree ``d``. The polynomial is ``sum_d coeffs[d] * x**(d - 1)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

VALID_SUM_TOL = 1e-9


class InvalidDistributionError(ValueError):
    """Raised when an operation needs a valid (or non-degenerate) distribution."""


@dataclass(frozen=True)
class DegreeDistribution:
    coeffs: Mapping[int, float]
    max_degree: int = 0

    def __post_init__(self):
        clean = {}
        for d, c in self.coeffs.items():
            d = int(d)
            if d < 1:
                raise InvalidDistributionError(f"degree must be >= 1, got {d}")
            clean[d] = float(c)
        max_degree = self.max_degree or (max(clean) if clean else 1)
        if clean and max(clean) > max_degree:
            raise InvalidDistributionError(
                f"degree {max(clean)} exceeds max_degree {max_degree}")
        object.__setattr__(self, "coeffs", MappingProxyType(dict(sorted(clean.items()))))
        object.__setattr__(self, "max_degree", int(max_degree))

    @classmethod
    def regular(cls, degree: int, max_degree: int | None = None) -> "DegreeDistribution":
        return cls({degree: 1.0}, max_degree or degree)

    @classmethod
    def from_array(cls, arr, drop_zeros: bool = True) -> "DegreeDistribution":
        """Build from a dense vector where ``arr[j]`` is the coefficient of degree ``j + 1``."""
        arr = np.asarray(arr, dtype=float)
        coeffs = {j + 1: float(c) for j, c in enumerate(arr) if not (drop_zeros and c == 0.0)}
        return cls(coeffs, len(arr))

    def as_array(self, length: int | None = None) -> np.ndarray:
        """Dense vector indexed by exponent: ``out[d - 1] = coeffs[d]``."""
        out = np.zeros(length or self.max_degree)
        for d, c in self.coeffs.items():
            out[d - 1] = c
        return out

    @property
    def total(self) -> float:
        return math.fsum(self.coeffs.values())

    def is_valid(self) -> bool:
        if not self.coeffs:
            return False
        if any(c < 0.0 or c > 1.0 for c in self.coeffs.values()):
            return False
        return abs(self.total - 1.0) <= VALID_SUM_TOL

    def __call__(self, x):
        return eval_poly(self, x)

    def to_json(self) -> dict:
        return {"coeffs": {str(d): c for d, c in self.coeffs.items()},
                "max_degree": self.max_degree}

    @classmethod
    def from_json(cls, obj: dict) -> "DegreeDistribution":
        return cls({int(d): float(c) for d, c in obj["coeffs"].items()},
                   int(obj.get("max_degree", 0)))


@dataclass(frozen=True)
class CodeParams:
    """Block code size. ``density`` is the target fraction of ones in H."""
    k: int
    n: int
    density: float = 0.01
    rate: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.k < self.n:
            raise ValueError(f"need 0 < k < n, got k={self.k}, n={self.n}")
        object.__setattr__(self, "rate", self.k / self.n)

    @classmethod
    def from_rate(cls, k: int, rate: float, density: float = 0.01) -> "CodeParams":
        return cls(k=k, n=int(round(k / rate)), density=density)


def eval_poly(dist: DegreeDistribution, x):
    """Evaluate ``sum_d coeffs[d] x^(d-1)``; works on scalars and arrays."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for d, c in dist.coeffs.items():
        out = out + c * x ** (d - 1)
    return float(out) if out.ndim == 0 else out


def eval_derivative(dist: DegreeDistribution, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for d, c in dist.coeffs.items():
        if d >= 2:
            out = out + c * (d - 1) * x ** (d - 2)
    return float(out) if out.ndim == 0 else out


def avg_node_degree(dist: DegreeDistribution) -> float:
    """Average node degree implied by edge fractions, ``1 / sum_d coeffs[d]/d``."""
    if any(c < 0 for c in dist.coeffs.values()):
        raise InvalidDistributionError("negative coefficient")
    inv = math.fsum(c / d for d, c in dist.coeffs.items())
    if inv == 0.0:
        raise InvalidDistributionError("distribution has no mass")
    return 1.0 / inv


def avg_edge_degree(dist: DegreeDistribution) -> float:
    """Edge-weighted average degree ``sum_d d * coeffs[d]``."""
    return math.fsum(d * c for d, c in dist.coeffs.items())


def design_rate(lam: DegreeDistribution, rho: DegreeDistribution) -> float:
    for name, dist in (("lambda", lam), ("rho", rho)):
        if not dist.is_valid():
            raise InvalidDistributionError(f"{name} is not a valid distribution")
    return 1.0 - avg_node_degree(lam) / avg_node_degree(rho)


def project_to_valid(dist: DegreeDistribution) -> DegreeDistribution:
    """Clamp coefficients to [0, 1] and renormalize to unit sum."""
    clamped = {d: min(max(c, 0.0), 1.0) for d, c in dist.coeffs.items()}
    s = math.fsum(clamped.values())
    if s == 0.0:
        raise InvalidDistributionError("all coefficients clamp to zero")
    return DegreeDistribution({d: c / s for d, c in clamped.items() if c > 0.0},
                              dist.max_degree)


def stability_lhs(lam: DegreeDistribution, rho: DegreeDistribution) -> float:
    """``lambda'(0) * rho'(1)``; the zero fixed point is stable at eps iff this is < 1/eps."""
    return lam.coeffs.get(2, 0.0) * eval_derivative(rho, 1.0)


def save_pair(path, lam: DegreeDistribution, rho: DegreeDistribution, **extra) -> None:
    obj = {"lambda": lam.to_json(), "rho": rho.to_json(), **extra}
    with open(path, "w") as f:
        json.dump(obj, f, indent=2)


def load_pair(path) -> tuple[DegreeDistribution, DegreeDistribution]:
    """Read a ``{"lambda": {...}, "rho": {...}}`` JSON document."""
    with open(path) as f:
        obj = json.load(f)
    return DegreeDistribution.from_json(obj["lambda"]), DegreeDistribution.from_json(obj["rho"])

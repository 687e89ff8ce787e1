"""Density evolution on the binary erasure channel.

The recursion is ``x_{t+1} = eps * lambda(1 - rho(1 - x_t))``. Hot loops run on
dense coefficient vectors (``c[j]`` multiplies ``x**j``) through numba kernels so
the same code serves threshold search, training-time evaluation and the
differential-evolution baseline.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from numba import njit

from .degree_dist import (
    DegreeDistribution,
    design_rate,
    stability_lhs,
)

__all__ = [
    "DeTrace", "ThresholdConfig", "ThresholdResult", "de_step", "de_run",
    "threshold", "threshold_arrays", "bp_noise_bound", "stability_lhs",
    "graphical_threshold_data", "bifurcation_data", "write_csv",
]


@njit(cache=True)
def _poly(c, x):
    acc = 0.0
    for j in range(c.shape[0] - 1, -1, -1):
        acc = acc * x + c[j]
    return acc


@njit(cache=True)
def _one_minus_rho(rho, x):
    """``1 - rho(1 - x)`` as ``sum_j rho_j (1 - (1-x)^j)``.

    Assumes unit coefficient sum. Each ``1 - (1-x)^j`` is built by nonnegative
    increments, so the result is exactly 0 at x = 0 and has no cancellation
    for small x.
    """
    u = 1.0 - x
    pw = 1.0  # u^j
    comp = 0.0  # 1 - u^j
    acc = 0.0
    for j in range(1, rho.shape[0]):
        comp += pw * x
        pw *= u
        acc += rho[j] * comp
    return acc


@njit(cache=True)
def _step(lam, rho, eps, x):
    return eps * _poly(lam, _one_minus_rho(rho, x))


@njit(cache=True)
def _run(lam, rho, eps, x0, max_iters, tol, out):
    """Iterate into ``out`` (length max_iters + 1); return number of steps taken."""
    out[0] = x0
    x = x0
    for t in range(1, max_iters + 1):
        xn = _step(lam, rho, eps, x)
        out[t] = xn
        if abs(xn - x) < tol or xn < tol:
            return t
        x = xn
    return max_iters


@njit(cache=True)
def _grid_ok(lam, rho, eps, grid_points, upper):
    # strict decrease eps*f(x) < x on the uniform grid over (0, upper]
    for i in range(1, grid_points + 1):
        x = upper * i / grid_points
        if _step(lam, rho, eps, x) - x >= 0.0:
            return False
    return True


@njit(cache=True)
def _iterate_ok(lam, rho, eps, max_iters, tol):
    x = eps
    for _ in range(max_iters):
        x = _step(lam, rho, eps, x)
        if x < tol:
            return True
    return False


@njit(cache=True)
def _bisect(lam, rho, method, depth, grid_points, full_domain, max_iters, tol):
    lo = 0.0
    hi = 1.0
    if method == 0:
        ok_hi = _grid_ok(lam, rho, hi, grid_points, 1.0)
    else:
        ok_hi = _iterate_ok(lam, rho, hi, max_iters, tol)
    if ok_hi:
        return 1.0
    for _ in range(depth):
        mid = 0.5 * (lo + hi)
        if method == 0:
            upper = 1.0 if full_domain else mid
            ok = _grid_ok(lam, rho, mid, grid_points, upper)
        else:
            ok = _iterate_ok(lam, rho, mid, max_iters, tol)
        if ok:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class DeTrace:
    epsilon: float
    x: np.ndarray
    converged: bool
    iterations_used: int

    @property
    def final(self) -> float:
        return float(self.x[-1])


@dataclass(frozen=True)
class ThresholdConfig:
    method: Literal["grid", "iterate"] = "grid"
    depth: int = 40
    grid_points: int = 10000
    full_domain: bool = False  # grid over (0, 1] instead of (0, eps]
    max_iters: int = 2000
    tol: float = 1e-8


@dataclass(frozen=True)
class ThresholdResult:
    eps_bp: float
    eps_sh: float
    method: str
    gap_delta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "gap_delta", self.eps_sh - self.eps_bp)

    def summary(self) -> str:
        return (f"eps_sh={self.eps_sh:.4f} eps_bp={self.eps_bp:.4f} "
                f"delta={self.gap_delta:.4f}")


def _arrays(lam: DegreeDistribution, rho: DegreeDistribution):
    return lam.as_array(), rho.as_array()


def de_step(lam: DegreeDistribution, rho: DegreeDistribution, epsilon: float, x: float) -> float:
    la, ra = _arrays(lam, rho)
    return float(_step(la, ra, float(epsilon), float(x)))


def de_run(lam: DegreeDistribution, rho: DegreeDistribution, epsilon: float,
           x0: float | None = None, max_iters: int = 100, tol: float = 1e-10) -> DeTrace:
    """Run density evolution from ``x0`` (default ``epsilon``).

    Stops once successive iterates differ by less than ``tol`` or the iterate
    itself drops below ``tol``.
    """
    if max_iters < 1 or tol <= 0:
        raise ValueError("need max_iters >= 1 and tol > 0")
    la, ra = _arrays(lam, rho)
    x0 = float(epsilon if x0 is None else x0)
    buf = np.empty(max_iters + 1)
    used = _run(la, ra, float(epsilon), x0, max_iters, tol, buf)
    xs = buf[:used + 1].copy()
    converged = bool(abs(xs[-1] - xs[-2]) < tol or xs[-1] < tol)
    return DeTrace(float(epsilon), xs, converged, int(used))


def threshold_arrays(lam_arr: np.ndarray, rho_arr: np.ndarray,
                     config: ThresholdConfig = ThresholdConfig()) -> float:
    """BP threshold for dense coefficient vectors; no validity checks."""
    method = 0 if config.method == "grid" else 1
    return float(_bisect(np.ascontiguousarray(lam_arr, dtype=np.float64),
                         np.ascontiguousarray(rho_arr, dtype=np.float64),
                         method, config.depth, config.grid_points,
                         config.full_domain, config.max_iters, config.tol))


def threshold(lam: DegreeDistribution, rho: DegreeDistribution,
              config: ThresholdConfig = ThresholdConfig()) -> ThresholdResult:
    """Largest eps for which density evolution drives the erasure probability to 0."""
    if config.method not in ("grid", "iterate"):
        raise ValueError(f"unknown threshold method {config.method!r}")
    rate = design_rate(lam, rho)  # raises on invalid input
    eps_bp = threshold_arrays(*_arrays(lam, rho), config)
    return ThresholdResult(eps_bp=eps_bp, eps_sh=1.0 - rate, method=config.method)


def bp_noise_bound(rate: float, rho_bar: float) -> tuple[float, float]:
    """Minimum gap to capacity for average check degree ``rho_bar``.

    Returns ``(delta_min, eps_bp_max)``.
    """
    a = rate ** (rho_bar - 1.0) * (1.0 - rate)
    delta_min = a / (1.0 + a)
    return delta_min, (1.0 - delta_min - rate) / (1.0 - delta_min)


def graphical_threshold_data(lam: DegreeDistribution, rho: DegreeDistribution,
                             eps_list: Sequence[float], grid_points: int = 1000) -> np.ndarray:
    """Rows ``(eps, x, eps*lambda(1-rho(1-x)) - x)`` on a uniform x-grid over (0, 1]."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    x = np.arange(1, grid_points + 1) / grid_points
    f = lam(1.0 - rho(1.0 - x))
    rows = [np.column_stack([np.full_like(x, e), x, e * f - x]) for e in eps_list]
    return np.vstack(rows) if rows else np.empty((0, 3))


def bifurcation_data(lam: DegreeDistribution, rho: DegreeDistribution,
                     eps_grid: Sequence[float], iters: int = 1000,
                     tol: float = 1e-12) -> np.ndarray:
    """Rows ``(eps, x_final)`` from density evolution started at ``x0 = eps``."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    out = np.empty((len(eps_grid), 2))
    for i, e in enumerate(eps_grid):
        out[i] = e, de_run(lam, rho, e, max_iters=iters, tol=tol).final
    return out


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v

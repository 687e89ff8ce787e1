"""Channel models, BP decoders and the Monte Carlo BER harness.

All simulations transmit the all-zero codeword, so decoding errors are the
nonzero (or still-erased) positions of the decoder output.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from numba import njit

from .code_builder import TannerGraph

__all__ = ["ChannelSpec", "BerPoint", "DecoderGraph", "bec_transmit", "bec_decode",
           "awgn_llr", "awgn_decode", "ber_sweep", "write_ber_csv", "noise_variance"]

LLR_CLAMP = 25.0
DEFAULT_MIN_BIT_ERRORS = 100


@dataclass(frozen=True)
class ChannelSpec:
    kind: Literal["bec", "awgn"]
    epsilon: float | None = None
    ebn0_db: float | None = None
    rate: float | None = None  # AWGN only; defaults to the graph's design rate

    def __post_init__(self):
        if self.kind == "bec":
            if self.epsilon is None or not 0.0 <= self.epsilon <= 1.0:
                raise ValueError("BEC needs 0 <= epsilon <= 1")
        elif self.kind == "awgn":
            if self.ebn0_db is None:
                raise ValueError("AWGN needs ebn0_db")
        else:
            raise ValueError(f"unknown channel kind {self.kind!r}")

    @property
    def param(self) -> float:
        return self.epsilon if self.kind == "bec" else self.ebn0_db


@dataclass(frozen=True)
class BerPoint:
    channel: ChannelSpec
    trials: int
    bit_errors: int
    frame_errors: int
    n: int

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.trials * self.n)

    @property
    def fer(self) -> float:
        return self.frame_errors / self.trials

    def std_error(self) -> float:
        """Binomial standard error of ``ber`` treating bits as independent."""
        p = self.ber
        return math.sqrt(max(p * (1.0 - p), 0.0) / (self.trials * self.n))


@dataclass(frozen=True)
class DecoderGraph:
    """Flat edge arrays: edges are grouped by check, ``var_edges`` groups them by variable."""
    n: int
    m: int
    check_ptr: np.ndarray
    edge_var: np.ndarray
    var_ptr: np.ndarray
    var_edges: np.ndarray

    @classmethod
    def from_tanner(cls, graph: TannerGraph) -> "DecoderGraph":
        e = graph.edges()
        check_ptr = np.concatenate([[0], np.cumsum(graph.check_degrees)]).astype(np.int64)
        edge_var = e[:, 1].astype(np.int64)
        var_edges = np.argsort(edge_var, kind="stable").astype(np.int64)
        var_ptr = np.concatenate([[0], np.cumsum(graph.var_degrees)]).astype(np.int64)
        return cls(graph.n, graph.m, check_ptr, edge_var, var_ptr, var_edges)


def _as_decoder(graph) -> DecoderGraph:
    return graph if isinstance(graph, DecoderGraph) else DecoderGraph.from_tanner(graph)


def bec_transmit(n: int, epsilon: float, seed=0) -> np.ndarray:
    """Erasure mask with each position erased independently with probability ``epsilon``."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    return np.random.default_rng(seed).random(n) < epsilon


@njit(cache=True)
def _peel(check_ptr, edge_var, var_ptr, var_edges, erased, max_iters):
    m = check_ptr.shape[0] - 1
    edge_check = np.empty(edge_var.shape[0], np.int64)
    count = np.zeros(m, np.int64)
    for c in range(m):
        for e in range(check_ptr[c], check_ptr[c + 1]):
            edge_check[e] = c
            if erased[edge_var[e]]:
                count[c] += 1
    frontier = np.empty(m, np.int64)
    nf = 0
    for c in range(m):
        if count[c] == 1:
            frontier[nf] = c
            nf += 1
    nxt = np.empty(m, np.int64)
    sweeps = 0
    while nf > 0 and sweeps < max_iters:
        sweeps += 1
        nn = 0
        for i in range(nf):
            c = frontier[i]
            if count[c] != 1:
                continue
            v = -1
            for e in range(check_ptr[c], check_ptr[c + 1]):
                if erased[edge_var[e]]:
                    v = edge_var[e]
                    break
            erased[v] = False  # forced to the parity of the known neighbors, i.e. 0
            for k in range(var_ptr[v], var_ptr[v + 1]):
                c2 = edge_check[var_edges[k]]
                count[c2] -= 1
                if count[c2] == 1:
                    nxt[nn] = c2
                    nn += 1
        frontier, nxt = nxt, frontier
        nf = nn
    return sweeps


def bec_decode(graph, erasures: np.ndarray, max_iters: int = 1000):
    """Peeling decoder; returns ``(residual erasure mask, success, sweeps)``.

    Known positions are never modified; a sweep resolves every check that had
    exactly one erased neighbor at its start.
    """
    g = _as_decoder(graph)
    erased = np.array(erasures, dtype=np.bool_, copy=True)
    sweeps = _peel(g.check_ptr, g.edge_var, g.var_ptr, g.var_edges, erased, max_iters)
    return erased, not erased.any(), int(sweeps)


def noise_variance(ebn0_db: float, rate: float) -> float:
    return 1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))


def awgn_llr(n: int, ebn0_db: float, rate: float, seed=0) -> np.ndarray:
    """Channel LLRs of the all-zero codeword sent as BPSK (0 -> +1)."""
    var = noise_variance(ebn0_db, rate)
    y = 1.0 + math.sqrt(var) * np.random.default_rng(seed).standard_normal(n)
    return 2.0 * y / var


@njit(cache=True)
def _syndrome_ok(check_ptr, edge_var, hard):
    for c in range(check_ptr.shape[0] - 1):
        s = 0
        for e in range(check_ptr[c], check_ptr[c + 1]):
            s ^= hard[edge_var[e]]
        if s:
            return False
    return True


@njit(cache=True)
def _sum_product(check_ptr, edge_var, var_ptr, var_edges, llr, max_iters, clamp, hard):
    n = llr.shape[0]
    n_edges = edge_var.shape[0]
    c2v = np.zeros(n_edges)
    v2c = np.empty(n_edges)
    total = np.empty(n)
    for v in range(n):
        hard[v] = 1 if llr[v] < 0.0 else 0
    if _syndrome_ok(check_ptr, edge_var, hard):
        return 0, True
    t_lim = math.tanh(0.5 * clamp)
    for it in range(1, max_iters + 1):
        for v in range(n):
            s = llr[v]
            for k in range(var_ptr[v], var_ptr[v + 1]):
                s += c2v[var_edges[k]]
            total[v] = s
            for k in range(var_ptr[v], var_ptr[v + 1]):
                e = var_edges[k]
                v2c[e] = min(max(s - c2v[e], -clamp), clamp)
        for c in range(check_ptr.shape[0] - 1):
            lo = check_ptr[c]
            hi = check_ptr[c + 1]
            # leave-one-out products by forward/backward passes (no division by tanh ~ 0)
            prod = 1.0
            for e in range(lo, hi):
                c2v[e] = prod
                prod *= math.tanh(0.5 * v2c[e])
            prod = 1.0
            for e in range(hi - 1, lo - 1, -1):
                p = min(max(c2v[e] * prod, -t_lim), t_lim)
                prod *= math.tanh(0.5 * v2c[e])
                c2v[e] = 2.0 * math.atanh(p)
        for v in range(n):
            s = llr[v]
            for k in range(var_ptr[v], var_ptr[v + 1]):
                s += c2v[var_edges[k]]
            hard[v] = 1 if s < 0.0 else 0
        if _syndrome_ok(check_ptr, edge_var, hard):
            return it, True
    return max_iters, False


def awgn_decode(graph, llr: np.ndarray, max_iters: int = 50, clamp: float = LLR_CLAMP):
    """Flooding sum-product decoder; returns ``(hard decisions, success, iterations)``."""
    g = _as_decoder(graph)
    llr = np.clip(np.asarray(llr, dtype=np.float64), -clamp, clamp)
    hard = np.empty(g.n, np.int64)
    iters, ok = _sum_product(g.check_ptr, g.edge_var, g.var_ptr, g.var_edges, llr,
                             max_iters, clamp, hard)
    return hard.astype(np.uint8), bool(ok), int(iters)


def ber_sweep(graph: TannerGraph, channels: Sequence[ChannelSpec], frames: int,
              max_iters: int | None = None, seed=0,
              min_bit_errors: int | None = DEFAULT_MIN_BIT_ERRORS) -> list[BerPoint]:
    """Monte Carlo bit/frame error counts per channel point.

    Point ``i`` draws from its own substream of ``seed``, so results do not
    depend on which other points are simulated. A point stops early once
    ``min_bit_errors`` bit errors are collected (``None`` runs all frames).
    Residual erasures on the BEC count as bit errors.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    g = DecoderGraph.from_tanner(graph)
    streams = np.random.SeedSequence(seed).spawn(len(channels))
    points = []
    for ch, ss in zip(channels, streams):
        rng = np.random.default_rng(ss)
        bit_errors = frame_errors = trials = 0
        for _ in range(frames):
            trials += 1
            if ch.kind == "bec":
                out, _, _ = bec_decode(g, rng.random(g.n) < ch.epsilon, max_iters or 1000)
                errs = int(out.sum())
            else:
                rate = graph.rate if ch.rate is None else ch.rate
                llr = awgn_llr(g.n, ch.ebn0_db, rate, rng)
                hard, _, _ = awgn_decode(g, llr, max_iters or 50)
                errs = int(hard.sum())
            bit_errors += errs
            frame_errors += errs > 0
            if min_bit_errors is not None and bit_errors >= min_bit_errors:
                break
        points.append(BerPoint(ch, trials, bit_errors, frame_errors, g.n))
    return points


def write_ber_csv(path, points: Sequence[BerPoint]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("kind", "param", "frames", "bit_errors", "frame_errors", "ber"))
        for p in points:
            w.writerow((p.channel.kind, f"{p.channel.param:.4f}", p.trials, p.bit_errors,
                        p.frame_errors, repr(p.ber)))

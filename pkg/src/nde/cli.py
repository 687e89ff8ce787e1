"""Command-line entry point: ``nde {train,threshold,bifurcation,graphical,ber,build,compare}``.

Configuration is a JSON file with sections ``code``, ``train``, ``channel``,
``output`` plus per-command sections. Every run writes ``manifest.json`` with
the fully resolved configuration, from which the run can be repeated
(``--config manifest.json``).
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import compare_at_dimension, linear_r2, time_unroll
from .code_builder import (ConstructionFailedError, build_graph, read_alist, write_alist,
                           write_edge_list)
from .de_engine import (ThresholdConfig, bifurcation_data, de_run, graphical_threshold_data,
                        threshold)
from .decoder_sim import ChannelSpec, ber_sweep
from .degree_dist import (CodeParams, DegreeDistribution, avg_edge_degree, avg_node_degree,
                          load_pair, save_pair, stability_lhs)
from .diffevo import DiffEConfig
from .training.model import InvalidConfigError, TrainConfig
from .training.trainer import TrainingDivergedError, train_restarts

log = logging.getLogger("nde.cli")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

DEFAULTS = {
    "code": {"k": 1024, "rate": 0.5, "density": 0.01},
    "train": {**TrainConfig().to_dict(), "restarts": 1},
    "channel": {"kind": "bec", "epsilon": [0.0, 0.1, 0.2, 0.3, 0.35, 0.4, 0.45, 0.5],
                "ebn0_db": [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0], "frames": 1000,
                "max_iters": None, "min_bit_errors": 100},
    "output": {"dir": "out", "format": "csv"},
    "input": {"distribution": None, "alist": None},
    "threshold": {"method": "grid", "depth": 40, "grid_points": 10000, "full_domain": False},
    "bifurcation": {"eps_min": 0.0, "eps_max": 1.0, "points": 200, "iters": 1000,
                    "trace_eps": [0.3, 0.47, 0.7], "trace_iters": 1000},
    "graphical": {"eps": [0.3, 0.4, 0.45, 0.49], "grid_points": 1000},
    "build": {"swap_budget_factor": 100},
    "compare": {"dimensions": [25, 50, 70], "diffe_epochs": 250, "depths": [5, 10, 20, 40],
                "F": 0.8, "CR": 0.9, "pop_size": None},
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path: str | None, args: argparse.Namespace) -> dict:
    user = {}
    if path:
        try:
            with open(path) as f:
                user = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if "manifest" in user:  # re-running from a manifest
            user = user["config"]
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(user) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = _merge(DEFAULTS, user)
    if args.seed is not None:
        cfg["train"]["seed"] = args.seed
    if args.out is not None:
        cfg["output"]["dir"] = args.out
    if args.format is not None:
        cfg["output"]["format"] = args.format
    if getattr(args, "dist", None):
        cfg["input"]["distribution"] = args.dist
    if getattr(args, "alist", None):
        cfg["input"]["alist"] = args.alist
    if cfg["output"]["format"] not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    return cfg


def code_params(cfg: dict) -> CodeParams:
    c = cfg["code"]
    try:
        if c.get("n") is not None:
            return CodeParams(int(c["k"]), int(c["n"]), float(c.get("density", 0.01)))
        return CodeParams.from_rate(int(c["k"]), float(c["rate"]), float(c.get("density", 0.01)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid code section: {exc}") from exc


def train_config(cfg: dict) -> tuple[TrainConfig, int]:
    t = dict(cfg["train"])
    restarts = int(t.pop("restarts", 1))
    if restarts < 1:
        raise ConfigError("train.restarts must be >= 1")
    try:
        tc = TrainConfig.from_dict(t)
        tc.validate()
    except (InvalidConfigError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return tc, restarts


def _version() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


class Writer:
    """Writes tables as CSV or JSON into the output directory and tracks them for the manifest."""

    def __init__(self, cfg: dict):
        self.dir = Path(cfg["output"]["dir"])
        self.dir.mkdir(parents=True, exist_ok=True)
        self.fmt = cfg["output"]["format"]
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def table(self, stem: str, header, rows) -> Path:
        rows = [[_cell(v) for v in row] for row in rows]
        if self.fmt == "json":
            p = self.path(f"{stem}.json")
            p.write_text(json.dumps([dict(zip(header, r)) for r in rows], indent=1))
        else:
            p = self.path(f"{stem}.csv")
            with open(p, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(header)
                w.writerows([[_csv(v) for v in r] for r in rows])
        return p

    def manifest(self, command: str, cfg: dict, summary: dict) -> None:
        doc = {"manifest": 1, "command": command, "version": _version(),
               "argv": sys.argv[1:], "config": cfg, "outputs": self.files, "summary": summary}
        (self.dir / "manifest.json").write_text(json.dumps(doc, indent=2, default=_cell))


def _cell(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def _csv(v):
    return repr(float(v)) if isinstance(v, float) else v


def _load_pair(cfg: dict):
    path = cfg["input"]["distribution"]
    if not path:
        raise ConfigError("a distribution JSON is required (--dist or input.distribution)")
    try:
        return load_pair(path)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read distribution {path}: {exc}") from exc


def _report(res) -> None:
    if res.eps_sh >= 1.0:
        print("warning: design rate is not positive; the pair carries no information",
              file=sys.stderr)
    print(res.summary())


def _pair_report(lam: DegreeDistribution, rho: DegreeDistribution) -> dict:
    return {"lambda_bar_node": avg_node_degree(lam), "rho_bar_node": avg_node_degree(rho),
            "lambda_bar_edge": avg_edge_degree(lam), "rho_bar_edge": avg_edge_degree(rho),
            "stability_lhs": stability_lhs(lam, rho)}


def cmd_train(cfg: dict, out: Writer) -> dict:
    code = code_params(cfg)
    tc, restarts = train_config(cfg)
    t0 = time.perf_counter()
    best, runs = train_restarts(tc, code, restarts)
    lam, rho = best.model.projected_pair()
    res = threshold(lam, rho)
    summary = {"delta": res.gap_delta, "eps_bp": res.eps_bp, "eps_sh": res.eps_sh,
               "best_seed": tc.seed + runs.index(best), "best_epoch": best.best_epoch,
               "seconds": time.perf_counter() - t0, **_pair_report(lam, rho)}
    save_pair(out.path("best_pair.json"), lam, rho, **summary)
    out.path("best_model_raw.json").write_text(json.dumps(best.model.to_json()))
    header = ("epoch", "total_loss", "mse", "omega_lambda", "omega_rho", "omega_avg_lambda",
              "omega_avg_rho", "stab", "delta")
    out.table("history", header, [r.row() for r in best.history])
    out.table("restarts", ("seed", "best_epoch", "best_delta"),
              [(tc.seed + i, r.best_epoch, r.best_delta) for i, r in enumerate(runs)])
    _report(res)
    return summary


def cmd_threshold(cfg: dict, out: Writer) -> dict:
    lam, rho = _load_pair(cfg)
    t = cfg["threshold"]
    res = threshold(lam, rho, ThresholdConfig(method=t["method"], depth=int(t["depth"]),
                                              grid_points=int(t["grid_points"]),
                                              full_domain=bool(t["full_domain"])))
    _report(res)
    summary = {"eps_sh": res.eps_sh, "eps_bp": res.eps_bp, "delta": res.gap_delta,
               "method": res.method, **_pair_report(lam, rho)}
    out.table("threshold", ("eps_sh", "eps_bp", "delta"),
              [(res.eps_sh, res.eps_bp, res.gap_delta)])
    return summary


def cmd_bifurcation(cfg: dict, out: Writer) -> dict:
    lam, rho = _load_pair(cfg)
    b = cfg["bifurcation"]
    grid = np.linspace(float(b["eps_min"]), float(b["eps_max"]), int(b["points"]))
    data = bifurcation_data(lam, rho, grid, iters=int(b["iters"]))
    out.table("bifurcation", ("epsilon", "x_final"), data.tolist())
    for e in b.get("trace_eps") or []:
        tr = de_run(lam, rho, float(e), max_iters=int(b["trace_iters"]), tol=1e-12)
        out.table(f"trace_eps{float(e):.4f}", ("t", "x_t"), list(enumerate(tr.x.tolist())))
    return {"points": len(grid)}


def cmd_graphical(cfg: dict, out: Writer) -> dict:
    lam, rho = _load_pair(cfg)
    g = cfg["graphical"]
    data = graphical_threshold_data(lam, rho, [float(e) for e in g["eps"]], int(g["grid_points"]))
    out.table("graphical", ("epsilon", "x", "delta"), data.tolist())
    return {"rows": int(data.shape[0])}


def _graph(cfg: dict, seed: int):
    if cfg["input"]["alist"]:
        try:
            return read_alist(cfg["input"]["alist"]), None
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read alist: {exc}") from exc
    lam, rho = _load_pair(cfg)
    graph = build_graph(lam, rho, code_params(cfg), seed,
                        int(cfg["build"]["swap_budget_factor"]))
    return graph, lam


def cmd_build(cfg: dict, out: Writer) -> dict:
    graph, lam = _graph(cfg, cfg["train"]["seed"])
    write_alist(out.path("H.alist"), graph)
    write_edge_list(out.path("edges.csv"), graph)
    summary = {"n": graph.n, "m": graph.m, "edges": graph.num_edges,
               "avg_var_degree": graph.avg_var_degree(),
               "avg_check_degree": graph.avg_check_degree(),
               "four_cycle_free": graph.is_four_cycle_free()}
    if lam is not None:
        summary["design_avg_var_degree"] = avg_node_degree(lam)
    print(json.dumps(summary))
    return summary


def cmd_ber(cfg: dict, out: Writer) -> dict:
    seed = cfg["train"]["seed"]
    graph, _ = _graph(cfg, seed)
    ch = cfg["channel"]
    try:
        if ch["kind"] == "bec":
            channels = [ChannelSpec("bec", epsilon=float(e)) for e in ch["epsilon"]]
        else:
            channels = [ChannelSpec("awgn", ebn0_db=float(d), rate=ch.get("rate"))
                        for d in ch["ebn0_db"]]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    points = ber_sweep(graph, channels, int(ch["frames"]), ch["max_iters"], seed,
                       ch["min_bit_errors"])
    out.table("ber", ("kind", "param", "frames", "bit_errors", "frame_errors", "ber"),
              [(p.channel.kind, f"{p.channel.param:.4f}", p.trials, p.bit_errors,
                p.frame_errors, p.ber) for p in points])
    for p in points:
        print(f"{p.channel.kind} {p.channel.param:.4f} frames={p.trials} ber={p.ber:.3e} "
              f"fer={p.fer:.3e}")
    return {"n": graph.n, "points": len(points)}


def cmd_compare(cfg: dict, out: Writer) -> dict:
    code = code_params(cfg)
    tc, _ = train_config(cfg)
    c = cfg["compare"]
    dcfg = DiffEConfig(F=float(c["F"]), CR=float(c["CR"]), pop_size=c["pop_size"])
    rows, detail = [], []
    for dim in c["dimensions"]:
        nde, diffe = compare_at_dimension(code, int(dim), tc, int(c["diffe_epochs"]),
                                          tc.seed, dcfg)
        for run in (nde, diffe):
            rows.append(run.row())
            detail.append({"method": run.method, "dimension": run.dimension,
                           "final_loss": run.final_loss, "total_seconds": run.total_seconds})
        log.info("dim %d: nde %.2fs diffe %.2fs", dim, nde.wall_seconds, diffe.wall_seconds)
    out.table("compare", ("method", "dimension", "wall_seconds", "final_delta"), rows)
    depths = [int(d) for d in c["depths"]]
    secs = time_unroll(depths, tc.lambda_max, tc.rho_max)
    out.table("unroll_timing", ("layers", "seconds"), list(zip(depths, secs)))
    return {"runs": detail, "unroll_r2": linear_r2(depths, secs)}


COMMANDS = {"train": cmd_train, "threshold": cmd_threshold, "bifurcation": cmd_bifurcation,
            "graphical": cmd_graphical, "ber": cmd_ber, "build": cmd_build,
            "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nde", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config or a previous manifest")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"))
        if name in ("threshold", "bifurcation", "graphical", "ber", "build"):
            p.add_argument("--dist", help="degree-distribution pair JSON")
        if name in ("ber", "build"):
            p.add_argument("--alist", help="parity-check matrix in alist format")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("nde").setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        cfg = load_config(args.config, args)
        out = Writer(cfg)
        summary = COMMANDS[args.command](cfg, out)
        out.manifest(args.command, cfg, summary)
    except (ConfigError, ValueError) as exc:  # includes invalid distributions and configs
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConstructionFailedError, TrainingDivergedError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Helpers shared by the experiment scripts: write a config and invoke the CLI."""
from __future__ import annotations

import json
import sys
from pathlib import Path

from nde.cli import main

RESULTS = Path(__file__).resolve().parent.parent / "results"

# per-rate average-degree targets with 1 - lambda_bar / rho_bar equal to the rate
RATES = {
    "r050": {"code": {"k": 1024, "rate": 0.5}, "train": {}},
    "r033": {"code": {"k": 1024, "rate": 1 / 3},
             "train": {"target_avg_lambda": 4.0, "target_avg_rho": 6.0}},
    "r080": {"code": {"k": 1024, "rate": 0.8},
             "train": {"target_avg_lambda": 3.0, "target_avg_rho": 15.0, "rho_max": 18}},
}


def run(command: str, out: Path, config: dict, *extra: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(config, indent=1))
    code = main([command, "--config", str(cfg_path), "--out", str(out), *extra])
    if code != 0:
        sys.exit(code)

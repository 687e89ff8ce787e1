"""Thresholds and dynamics tables for the (3,6) and (4,8) regular ensembles."""
from nde.degree_dist import DegreeDistribution, save_pair

from _common import RESULTS, run


def main() -> None:
    for lam, rho in ((3, 6), (4, 8)):
        out = RESULTS / "regular" / f"r{lam}{rho}"
        out.mkdir(parents=True, exist_ok=True)
        pair = out / "pair.json"
        save_pair(pair, DegreeDistribution.regular(lam), DegreeDistribution.regular(rho))
        for command in ("threshold", "bifurcation", "graphical"):
            run(command, out / command, {}, "--dist", str(pair))


if __name__ == "__main__":
    main()

"""Train designs at R = 0.5, 1/3 and 0.8 and emit threshold and dynamics tables for each."""
from _common import RATES, RESULTS, run


def main(restarts: int = 10) -> None:
    for tag, base in RATES.items():
        out = RESULTS / "design" / tag
        run("train", out, {**base, "train": {**base["train"], "restarts": restarts}})
        pair = str(out / "best_pair.json")
        run("threshold", out / "threshold", {}, "--dist", pair)
        run("bifurcation", out / "bifurcation", {}, "--dist", pair)
        run("graphical", out / "graphical", {}, "--dist", pair)


if __name__ == "__main__":
    main()

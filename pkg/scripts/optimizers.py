"""Per-epoch gap under RMSprop, Adam and SGD with identical seeds; SGD over a learning-rate grid."""
from _common import RESULTS, run

SEEDS = range(5)
SGD_RATES = (1e-5, 3e-5, 1e-4, 3e-4, 1e-3)


def main() -> None:
    for seed in SEEDS:
        for opt in ("rmsprop", "adam"):
            run("train", RESULTS / "optimizers" / f"{opt}_seed{seed}",
                {"train": {"optimizer": opt, "seed": seed}})
        for lr in SGD_RATES:
            run("train", RESULTS / "optimizers" / f"sgd{lr:g}_seed{seed}",
                {"train": {"optimizer": "sgd", "learning_rate": lr, "seed": seed}})


if __name__ == "__main__":
    main()

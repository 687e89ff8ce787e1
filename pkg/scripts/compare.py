"""Wall-time comparison with differential evolution and unroll-depth timing."""
from _common import RESULTS, run


def main() -> None:
    run("compare", RESULTS / "compare", {})


if __name__ == "__main__":
    main()

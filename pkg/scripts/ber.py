"""Finite-length BEC and AWGN curves for k = 128 and k = 1024 codes from a trained design."""
import sys

from _common import RESULTS, run


def main(pair: str) -> None:
    for k in (128, 1024):
        code = {"k": k, "rate": 0.5}
        run("ber", RESULTS / "ber" / f"bec_k{k}", {"code": code}, "--dist", pair)
        run("ber", RESULTS / "ber" / f"awgn_k{k}",
            {"code": code, "channel": {"kind": "awgn", "frames": 2000}}, "--dist", pair)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else str(RESULTS / "design" / "r050" / "best_pair.json"))

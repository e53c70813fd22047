"""How often the truncated h2 denominator goes negative.

The exact h2 denominator is an integral of a square and cannot be negative,
but the tables require level 6M+1, far above what a batched signature can
hold for M = 3.  This reports, per payoff config, the fraction of paths where
the level-N truncation of <DG, h> is negative, together with the minority
sign fraction of the h1 denominator.

    python3 scripts/h2_truncation_diagnostic.py --paths 20000
"""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from sigmalliavin.cli import parse_config
from sigmalliavin.greeks import delta_estimators

ROOT = Path(__file__).parents[1]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("configs", nargs="*", default=["sv71.txt", "perfect_correlation.txt"])
    args = ap.parse_args()
    for name in args.configs:
        base = parse_config((ROOT / "configs" / name).read_text(), "greeks-convergence")
        cfg = replace(base, paths=args.paths)
        rep = delta_estimators(cfg.model(), cfg.mc(), ("digital",), ("h1", "h2"), K=cfg.strike, fd=False)
        for tag, den in rep.denominators.items():
            print(f"{name:26s} {tag}: <DG,h> < 0 on {np.mean(den < 0):.3%} of paths, "
                  f"> 0 on {np.mean(den > 0):.3%}, min {den.min():.3g}")


if __name__ == "__main__":
    main()

"""Asian deltas for increasing truncation order N on one fixed set of paths.

The Asian payoff coefficient is an infinite shuffle-exponential series, so its
level-N truncation is an approximation; this prints how the price and the
deltas move as N grows.

    python3 scripts/asian_truncation_order.py --paths 20000 --levels 5 6 7 8
"""

import argparse
from dataclasses import replace
from pathlib import Path

from sigmalliavin.cli import parse_config, write_csv
from sigmalliavin.greeks import delta_estimators


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", type=Path, default=Path(__file__).parents[1] / "configs" / "asian.txt")
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--levels", type=int, nargs="+", default=[5, 6, 7, 8])
    ap.add_argument("--out", type=Path, default=Path("results/asian_truncation_order.csv"))
    args = ap.parse_args()

    base = parse_config(args.config.read_text(), "asian-convergence")
    rows = []
    for N in args.levels:
        cfg = replace(base, N=N, paths=args.paths)
        rep = delta_estimators(cfg.model(), cfg.mc(), cfg.payoffs, ("h3", "h4"), K=cfg.strike, asian=True,
                               localization=cfg.localization, eps=cfg.eps)
        for (kind, tag), r in rep.results.items():
            rows.append([N, f"{kind}:{tag}", r.estimate, r.std_error])
            print(f"N={N}  {kind}:{tag:3s}  {r.estimate:.6f} +- {r.std_error:.2g}")
    write_csv(args.out, ["N", "estimator_tag", "estimate", "std_error"], rows)


if __name__ == "__main__":
    main()

"""Stability of the deltas under grid refinement (steps per unit of time).

The signature of a piecewise-linear Brownian path converges to the
Stratonovich signature as the grid is refined; this prints the h3/h4/FD
deltas of a config for several step counts with the same seed.

    python3 scripts/step_refinement.py --config configs/sv71.txt --paths 20000 --steps 50 100 200
"""

import argparse
from dataclasses import replace
from pathlib import Path

from sigmalliavin.cli import parse_config, write_csv
from sigmalliavin.greeks import delta_estimators


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", type=Path, default=Path(__file__).parents[1] / "configs" / "sv71.txt")
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--steps", type=int, nargs="+", default=[50, 100, 200])
    ap.add_argument("--weights", nargs="+", default=["h3", "h4"])
    ap.add_argument("--out", type=Path, default=Path("results/step_refinement.csv"))
    args = ap.parse_args()

    base = parse_config(args.config.read_text(), "greeks-convergence")
    rows = []
    for steps in args.steps:
        cfg = replace(base, steps=steps, paths=args.paths)
        rep = delta_estimators(cfg.model(), cfg.mc(), cfg.payoffs, tuple(args.weights), K=cfg.strike,
                               localization=cfg.localization, eps=cfg.eps)
        for (kind, tag), r in rep.results.items():
            rows.append([steps, f"{kind}:{tag}", r.estimate, r.std_error])
            print(f"steps={steps:4d}  {kind}:{tag:3s}  {r.estimate:.6f} +- {r.std_error:.2g}")
    write_csv(args.out, ["steps", "estimator_tag", "estimate", "std_error"], rows)


if __name__ == "__main__":
    main()

"""Command-line experiment runner writing deterministic CSV files.

    sigmalliavin <command> --config FILE [--out DIR] [--seed S] [--paths N] [--steps K] [--level N]

Config files are flat ``key value`` lines (``key = value`` also accepted);
volatility terms are repeated ``sigma <word> <coeff>`` lines with ``e`` for
the empty word.
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .brownian_engine import MCConfig
from .errors import ModelError
from .greeks import D, PAYOFFS, TAGS, ModelSpec, bs_delta, delta_estimators
from .tensor_algebra import TensorPoly, word
from .validation import (
    Check,
    algebra_checks,
    check_expected_signature,
    check_ou,
    malliavin_checks,
    worked_examples,
)

COMMANDS = (
    "validate-algebra",
    "validate-malliavin",
    "esig-check",
    "ou-check",
    "greeks-convergence",
    "asian-convergence",
    "instability-histogram",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    sigma: dict = field(default_factory=dict)
    rho: float = 0.0
    S0: float = 1.0
    T: float = 1.0
    N: int = 4
    paths: int = 100_000
    steps: int = 500
    seed: int = 2024
    payoffs: tuple = PAYOFFS
    strike: float | None = None
    weights: tuple = TAGS
    localization: float | None = 10.0
    eps: float = 0.01
    antithetic: bool = False
    allow_truncation: bool = True
    d: int = 2
    inner: int = 2000
    bins: int = 50
    out: Path = Path(".")

    def model(self) -> ModelSpec:
        return ModelSpec(TensorPoly(D, self.sigma), self.rho, self.S0, self.T)

    def mc(self, N: int | None = None) -> MCConfig:
        return MCConfig(n_paths=self.paths, n_steps=self.steps, T=self.T, N=self.N if N is None else N,
                        seed=self.seed, antithetic=self.antithetic)


def _bool(v: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _list(vals: list[str]) -> tuple:
    return tuple(x for v in vals for x in v.replace(",", " ").split())


def parse_config(text: str, command: str) -> ExperimentConfig:
    cfg = ExperimentConfig(command=command)
    seen_N = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line and not line.startswith("sigma"):
            key, _, rest = line.partition("=")
            parts = [key.strip()] + rest.split()
        else:
            parts = line.split()
        key, vals = parts[0].lower(), parts[1:]
        try:
            if key == "sigma":
                if len(vals) != 2:
                    raise ConfigError("expected 'sigma <word> <coeff>'")
                w = word(vals[0])
                cfg.sigma[w] = cfg.sigma.get(w, 0.0) + float(vals[1])
                continue
            if not vals:
                raise ConfigError(f"missing value for {key!r}")
            v = vals[0]
            if key == "rho":
                cfg.rho = float(v)
            elif key == "s0":
                cfg.S0 = float(v)
            elif key == "t":
                cfg.T = float(v)
            elif key in ("n", "level"):
                cfg.N = int(v)
                seen_N = True
            elif key == "paths":
                cfg.paths = int(float(v))
            elif key == "steps":
                cfg.steps = int(v)
            elif key == "seed":
                cfg.seed = int(v)
            elif key in ("payoff", "payoffs"):
                cfg.payoffs = _list(vals)
            elif key in ("strike", "k"):
                cfg.strike = float(v)
            elif key in ("weights", "weight"):
                cfg.weights = _list(vals)
            elif key in ("localization", "delta"):
                cfg.localization = None if v.lower() in ("none", "off", "0") else float(v)
            elif key == "eps":
                cfg.eps = float(v)
            elif key == "antithetic":
                cfg.antithetic = _bool(v)
            elif key == "allow_truncation":
                cfg.allow_truncation = _bool(v)
            elif key == "d":
                cfg.d = int(v)
            elif key == "inner":
                cfg.inner = int(float(v))
            elif key == "bins":
                cfg.bins = int(v)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    for p in cfg.payoffs:
        if p not in PAYOFFS:
            raise ConfigError(f"unknown payoff {p!r}")
    for w in cfg.weights:
        if w not in TAGS + ("universal",):
            raise ConfigError(f"unknown weight {w!r}")
    if command in ("esig-check", "ou-check") and not seen_N:
        cfg.N = 4
    return cfg


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _checks_out(cfg: ExperimentConfig, checks: list[Check]) -> int:
    write_csv(cfg.out / f"{cfg.command}.csv", ["check_name", "status", "max_error"],
              [[c.name, c.status, float(c.max_error)] for c in checks])
    for c in checks:
        print(f"{c.status.upper():4s}  {c.name}  max_error={float(c.max_error):.3g}")
    return 0 if all(c.passed for c in checks) else 1


def _flag(r) -> str:
    return "unstable" if r.unstable else "ok"


def run_greeks(cfg: ExperimentConfig, asian: bool) -> int:
    m = cfg.model()
    K = m.S0 if cfg.strike is None else cfg.strike
    rep = delta_estimators(m, cfg.mc(), payoffs=cfg.payoffs, tags=cfg.weights, K=K, asian=asian,
                           localization=cfg.localization, eps=cfg.eps, allow_truncation=cfg.allow_truncation)
    rows, summary = [], []
    ref = {}
    if m.sigma.degree == 0 and m.sigma.const > 0 and not asian:
        ref = {k: bs_delta(m.S0, K, m.sigma.const, m.T, k) for k in cfg.payoffs}
    for (kind, tag), r in rep.results.items():
        label = f"{kind}:{tag}"
        for n, est, se in r.running:
            rows.append([n, label, est, se, _flag(r)])
        summary.append([label, r.estimate, r.std_error, r.n_used, r.n_excluded, _flag(r),
                        ref.get(kind, "")])
    for tag, reason in rep.refused.items():
        summary.append([f"*:{tag}", "", "", 0, 0, "refused: " + reason.split(":")[0], ""])
    write_csv(cfg.out / f"{cfg.command}.csv", ["n", "estimator_tag", "estimate", "std_error", "flag"], rows)
    write_csv(cfg.out / f"{cfg.command}-summary.csv",
              ["estimator_tag", "estimate", "std_error", "n_used", "n_excluded", "flag", "reference"], summary)
    for s in summary:
        est = "" if s[1] == "" else f"{s[1]:.6g} +- {s[2]:.3g}"
        print(f"{s[0]:18s} {est:28s} {s[5]}" + (f"  ref={s[6]:.6g}" if s[6] != "" else ""))
    return 0


def run_instability(cfg: ExperimentConfig) -> int:
    m = cfg.model()
    rep = delta_estimators(m, cfg.mc(), payoffs=cfg.payoffs, tags=cfg.weights, K=cfg.strike, asian=False,
                           localization=cfg.localization, eps=cfg.eps, allow_truncation=cfg.allow_truncation)
    hist_rows = []
    for tag, den in rep.denominators.items():
        counts, edges = np.histogram(den, bins=cfg.bins)
        for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
            hist_rows.append([float(lo), float(hi), int(c), tag])
        pos, neg = float(np.mean(den > 0)), float(np.mean(den < 0))
        print(f"{tag}: <DG,h> > 0 on {pos:.2%} of paths, < 0 on {neg:.2%}")
    write_csv(cfg.out / f"{cfg.command}.csv", ["bin_left", "bin_right", "count", "tag"], hist_rows)
    rows = []
    for (kind, tag), r in rep.results.items():
        for n, est, se in r.running:
            rows.append([n, f"{kind}:{tag}", est, se, _flag(r)])
    write_csv(cfg.out / f"{cfg.command}-divergence.csv", ["n", "estimator_tag", "estimate", "std_error", "flag"], rows)
    return 0


def run(cfg: ExperimentConfig) -> int:
    c = cfg.command
    if c == "validate-algebra":
        return _checks_out(cfg, algebra_checks() + worked_examples())
    if c == "validate-malliavin":
        return _checks_out(cfg, malliavin_checks())
    if c == "esig-check":
        return _checks_out(cfg, [check_expected_signature(cfg.mc(), cfg.d)])
    if c == "ou-check":
        return _checks_out(cfg, check_ou(cfg.mc(N=3), n_inner=cfg.inner))
    if c == "greeks-convergence":
        return run_greeks(cfg, asian=False)
    if c == "asian-convergence":
        return run_greeks(cfg, asian=True)
    if c == "instability-histogram":
        return run_instability(cfg)
    raise ConfigError(f"unknown command {c!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sigmalliavin", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="key-value config file (optional for validate-*)")
    ap.add_argument("--out", type=Path, default=Path("."), help="output directory for CSV files")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--paths", type=int)
    ap.add_argument("--steps", type=int, help="time steps per unit of time")
    ap.add_argument("--level", type=int, help="signature truncation level N")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config is not None:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
        elif not args.command.startswith("validate-"):
            raise ConfigError(f"{args.command} needs --config")
        cfg = parse_config(text, args.command)
        overrides = {"out": args.out}
        for k_arg, k_cfg in (("seed", "seed"), ("paths", "paths"), ("steps", "steps"), ("level", "N")):
            v = getattr(args, k_arg)
            if v is not None:
                overrides[k_cfg] = v
        cfg = replace(cfg, **overrides)
        if cfg.command in ("greeks-convergence", "asian-convergence", "instability-histogram"):
            with warnings.catch_warnings():
                warnings.simplefilter("always")
                cfg.model()
            cfg.mc()
        elif cfg.command in ("esig-check", "ou-check"):
            cfg.mc()
    except (ConfigError, ModelError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

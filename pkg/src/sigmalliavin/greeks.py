"""Greeks under signature volatility models via closed-form Malliavin weights.

Model: dS/S = sigma_t dB, sigma_t = <sigma, sig_t(W_hat)>, B = rho W^1 + rhobar W^2,
with W_hat = (t, W^1, W^2).  The log-price is a linear functional of the
Brownian signature, so deltas become Monte Carlo means of f(G) * pi_T where
pi_T is a ratio of signature functionals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .brownian_engine import EstimatorResult, MCConfig, batch_pairings, summarize
from .errors import DegenerateWeight, ModelError, RhoAtBoundary, TruncationTooLow, ZeroDenominator
from .sig_operators import CoeffVector, SwitchSpec, coeff_vector, diamond_cdc, diamond_vec, lambda_op, psi
from .tensor_algebra import (
    GroupTensor,
    TensorPoly,
    concat,
    pair,
    right_projection,
    shuffle,
    shuffle_exp,
    word,
)

D = 2  # (t, W^1, W^2)
TAGS = ("h1", "h2", "h3", "h4")
PAYOFFS = ("vanilla", "digital")


class MartingaleWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class ModelSpec:
    sigma: TensorPoly
    rho: float
    S0: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if self.sigma.d != D:
            raise ModelError(f"sigma must live over the alphabet {{0,1,2}}, got d={self.sigma.d}")
        if any(2 in w for w, _ in self.sigma):
            raise ModelError("sigma may not contain the letter 2")
        if not -1.0 <= self.rho <= 1.0:
            raise ModelError(f"rho must lie in [-1, 1], got {self.rho}")
        if not self.S0 > 0:
            raise ModelError("S0 must be positive")
        if not self.T > 0:
            raise ModelError("T must be positive")
        msg = martingale_issue(self)
        if msg:
            warnings.warn(msg, MartingaleWarning, stacklevel=3)

    @property
    def rhobar(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.rho**2))

    @property
    def M(self) -> int:
        return self.sigma.degree

    def with_S0(self, S0: float) -> "ModelSpec":
        return ModelSpec(self.sigma, self.rho, S0, self.T)


def martingale_issue(m: ModelSpec) -> str | None:
    """Reason the price may fail to be a true martingale, or None."""
    sig = m.sigma
    if sig.degree == 0 or not any(1 in w for w, _ in sig):
        return None
    if all(sum(1 for c in w if c == 1) <= 1 for w, _ in sig):
        return None  # affine in W
    M = sig.degree
    top = sig[(1,) * M]
    if M % 2 == 1 and m.rho * top < 0:
        return None
    return (f"sigma has degree {M} and is not affine in W; the martingale condition needs odd M "
            f"and rho * sigma^(1..1) < 0 (got rho={m.rho}, sigma^(1..1)={top})")


def _letter(i: int, c: float = 1.0) -> TensorPoly:
    return TensorPoly.letter(D, i, c)


def log_price_coeff(m: ModelSpec) -> TensorPoly:
    """Coefficient of log S_T: log S0 - 1/2 (sigma^sh2) 0 + rho (sigma 1 - 1/2 sigma|1 0) + rhobar sigma 2."""
    s = m.sigma
    zero, one, two = _letter(0), _letter(1), _letter(2)
    out = TensorPoly.unit(D, math.log(m.S0))
    out = out - 0.5 * concat(shuffle(s, s), zero)
    out = out + m.rho * (concat(s, one) - 0.5 * concat(right_projection(s, 1), zero))
    if m.rhobar:
        out = out + m.rhobar * concat(s, two)
    return out


def payoff_coeff_european(m: ModelSpec) -> TensorPoly:
    return log_price_coeff(m)


def payoff_coeff_asian(m: ModelSpec, N: int) -> TensorPoly:
    """(1/T) exp_sh(l^X) (x) 0, truncated at level N (an infinite series in general)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    lx = log_price_coeff(m)
    out = concat(shuffle_exp(lx, N - 1), _letter(0)) / m.T
    out.exact_to = None if m.sigma.is_zero() else N
    return out


def sensitivity_coeff(m: ModelSpec, param: str | tuple) -> TensorPoly:
    """Coefficient of d/dtheta <l^X, sig_T> for theta in {S0, rho, sigma^v}.

    ``param`` is ``"S0"``, ``"rho"`` or ``("sigma", v)``.
    """
    s = m.sigma
    zero, one, two = _letter(0), _letter(1), _letter(2)
    if param == "S0":
        return TensorPoly.unit(D, 1.0 / m.S0)
    if param == "rho":
        if m.rhobar == 0.0:
            raise RhoAtBoundary("rho-sensitivity is undefined at |rho| = 1")
        return concat(s, one) - 0.5 * concat(right_projection(s, 1), zero) - (m.rho / m.rhobar) * concat(s, two)
    if isinstance(param, tuple) and param[0] == "sigma":
        v = TensorPoly(D, {word(param[1]): 1.0})
        out = -1.0 * concat(shuffle(v, s), zero)
        out = out + m.rho * (concat(v, one) - 0.5 * concat(right_projection(v, 1), zero))
        out = out + m.rhobar * (concat(v, two) - 0.5 * concat(right_projection(v, 2), zero))
        return out
    raise ValueError(f"unknown parameter {param!r}")


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True, eq=False)
class RationalFunctional:
    num: TensorPoly
    den: TensorPoly

    def __post_init__(self):
        if self.den.is_zero():
            raise DegenerateWeight("denominator functional is identically zero")

    def evaluate(self, x: GroupTensor, path_index: int | None = None) -> tuple[float, float]:
        """(value, denominator value) on one signature."""
        dv = pair(self.den, x)
        if dv == 0.0:
            raise ZeroDenominator("denominator vanished", path_index)
        return pair(self.num, x) / dv, dv


@dataclass(frozen=True, eq=False)
class WeightChoice:
    tag: str
    hvec: CoeffVector | None = None

    def __post_init__(self):
        if self.tag not in TAGS + ("universal",):
            raise ValueError(f"unknown weight tag {self.tag!r}")
        if self.tag == "universal" and self.hvec is None:
            raise ValueError("the universal weight needs an h-vector")


INGREDIENTS = ("F1", "F2", "dh", "F1h", "F2h", "Gh", "Ghh")


@dataclass(frozen=True, eq=False)
class MalliavinWeight:
    """pi_T assembled from seven functionals.

    pi = F1 dh / (F2 Gh) - F1h / (F2 Gh) + F1 F2h / (F2^2 Gh) + F1 Ghh / (F2 Gh^2),
    where each name stands for the pairing of the functional with sig_T and Gh
    is <DG, h>.
    """

    tag: str
    F1: TensorPoly
    F2: TensorPoly
    dh: TensorPoly
    F1h: TensorPoly
    F2h: TensorPoly
    Gh: TensorPoly
    Ghh: TensorPoly
    required_N: int
    truncated: bool = False

    def polys(self) -> list[TensorPoly]:
        return [getattr(self, k) for k in INGREDIENTS]

    @property
    def degree(self) -> int:
        return max(p.degree for p in self.polys())

    def evaluate_values(self, vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """pi_T and <DG, h> from pairings; vals[..., j] matches ``INGREDIENTS[j]``."""
        F1, F2, dh, F1h, F2h, Gh, Ghh = (vals[..., j] for j in range(len(INGREDIENTS)))
        with np.errstate(divide="ignore", invalid="ignore"):
            pi = (F1 * dh - F1h) / (F2 * Gh) + F1 * F2h / (F2**2 * Gh) + F1 * Ghh / (F2 * Gh**2)
        return pi, Gh

    def evaluate(self, x: GroupTensor, path_index: int | None = None) -> float:
        vals = np.array([pair(p, x) for p in self.polys()])
        if vals[1] == 0.0 or vals[5] == 0.0:
            raise ZeroDenominator("weight denominator vanished", path_index)
        return float(self.evaluate_values(vals)[0])

    def as_rational(self) -> RationalFunctional:
        """Single ratio of functionals (much higher degree than the split form)."""
        F1, F2, dh, F1h, F2h, Gh, Ghh = self.polys()
        num = (shuffle(shuffle(shuffle(dh, F1), F2), Gh) - shuffle(shuffle(F1h, F2), Gh)
               + shuffle(shuffle(F1, F2h), Gh) + shuffle(shuffle(F1, F2), Ghh))
        den = shuffle(shuffle(F2, F2), shuffle(Gh, Gh))
        return RationalFunctional(num, den)


def _diamond_degree(a: TensorPoly, b: TensorPoly) -> int:
    if a.is_zero() or b.is_zero() or a.degree == 0 or b.degree == 0:
        return 0
    return a.degree + b.degree - 1


def weight_universal(lG: TensorPoly, lF1: TensorPoly, lF2: TensorPoly, h: CoeffVector, N: int,
                     allow_truncation: bool = False, tag: str = "universal") -> MalliavinWeight:
    """Weight for E[f'(G) F] = E[f(G) pi_T] with F = <lF1>/<lF2> and a linear h.

    Strict mode refuses when some ingredient is longer than N; with
    ``allow_truncation`` every ingredient is cut at level N and the weight is
    flagged as truncated.
    """
    if lF2.is_zero():
        raise ModelError("lF2 must be non-zero")
    d = lG.d
    h = tuple(h)
    hdeg = max((hi.degree for hi in h if not hi.is_zero()), default=0)
    hmax = TensorPoly.unit(d) if hdeg == 0 else TensorPoly(d, {(1,) * hdeg: 1.0})
    gh_deg = _diamond_degree(lG, hmax)
    need = max(lF1.degree, lF2.degree, hdeg, _diamond_degree(lF1, hmax), _diamond_degree(lF2, hmax),
               gh_deg, gh_deg + hdeg - 1 if gh_deg and hdeg else 0)
    if need > N and not allow_truncation:
        raise TruncationTooLow(need, N, tag)
    cut = N if allow_truncation else None
    dh = TensorPoly.zero(d)
    for i, hi in enumerate(h, start=1):
        dh = dh + lambda_op(hi, i) - psi(hi, SwitchSpec(((i, i),), ((0,),)))
    Gh = diamond_vec(lG, h, max_level=cut)
    if Gh.is_zero():
        raise DegenerateWeight(f"{tag}: <DG, h> is identically zero")
    Ghh = diamond_vec(Gh, h, max_level=cut)
    parts = dict(
        F1=lF1, F2=lF2, dh=dh,
        F1h=diamond_vec(lF1, h, max_level=cut),
        F2h=diamond_vec(lF2, h, max_level=cut),
        Gh=Gh, Ghh=Ghh,
    )
    if cut is not None:
        parts = {k: v.truncate(cut) for k, v in parts.items()}
    truncated = need > N or any(p.exact_to is not None for p in (lG, lF1, lF2) + h)
    return MalliavinWeight(tag=tag, required_N=need, truncated=truncated, **parts)


def table_h(m: ModelSpec, tag: str) -> CoeffVector:
    """The four h-vectors of the comparison table, with D^1 X_T and D^2 X_T coded by l^X."""
    lx = log_price_coeff(m)
    return {
        "h1": coeff_vector(D, _letter(1), None),
        "h2": coeff_vector(D, lx, None),
        "h3": coeff_vector(D, None, _letter(2)),
        "h4": coeff_vector(D, None, lx),
    }[tag]


TABLE_ORDER = {"h1": lambda M: 2 * M + 1, "h2": lambda M: 6 * M + 1, "h3": lambda M: M + 1, "h4": lambda M: 2 * M + 1}


def weight_table1(m: ModelSpec, choice: WeightChoice | str, N: int, allow_truncation: bool = False) -> MalliavinWeight:
    """Delta weight of a European payoff in the simplified per-row form."""
    tag = choice.tag if isinstance(choice, WeightChoice) else choice
    if tag == "universal":
        if not isinstance(choice, WeightChoice):
            raise ValueError("universal weight needs a WeightChoice with hvec")
        return weight_universal(log_price_coeff(m), TensorPoly.unit(D), TensorPoly.unit(D, m.S0), choice.hvec, N,
                                allow_truncation=allow_truncation)
    if tag in ("h3", "h4") and m.rhobar == 0.0:
        raise RhoAtBoundary(f"{tag} weight diverges at |rho| = 1")
    required = TABLE_ORDER[tag](m.M)
    if required > N and not allow_truncation:
        raise TruncationTooLow(required, N, tag)
    lx = log_price_coeff(m)
    s = m.sigma
    zero = TensorPoly.zero(D)
    p1 = SwitchSpec(((1,),), ((0,),))
    cut = N if allow_truncation else None
    if tag == "h1":
        Gh = psi(lx, p1)
        Ghh = psi(Gh, p1)
        dh = _letter(1)
    elif tag == "h2":
        Gh = diamond_cdc(lx, lx, 1, 0, max_level=cut)
        Ghh = diamond_cdc(Gh, lx, 1, 0, max_level=cut)
        dh = lambda_op(lx, 1) - psi(lx, SwitchSpec(((1, 1),), ((0,),)))
    elif tag == "h3":
        Gh = m.rhobar * concat(s, _letter(0))
        Ghh = zero
        dh = _letter(2)
    else:
        Gh = m.rhobar**2 * concat(shuffle(s, s), _letter(0))
        Ghh = zero
        dh = m.rhobar * concat(s, _letter(2))
    if Gh.is_zero():
        raise DegenerateWeight(f"{tag}: <DG, h> is identically zero for this model")
    parts = dict(F1=TensorPoly.unit(D), F2=TensorPoly.unit(D, m.S0), dh=dh, F1h=zero, F2h=zero, Gh=Gh, Ghh=Ghh)
    if cut is not None:
        parts = {k: v.truncate(cut) for k, v in parts.items()}
    return MalliavinWeight(tag=tag, required_N=required, truncated=required > N, **parts)


# ---------------------------------------------------------------------------
# payoffs, localization, oracles


@dataclass(frozen=True)
class Localization:
    """Call payoff (s - K)^+ split as smooth(s) + singular(s) in the price variable.

    smooth is 0 below K - delta, (s - K + delta)^2 / (4 delta) on the collar and
    s - K above K + delta; it is C^1 and singular vanishes off the collar.
    """

    K: float
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    def smooth(self, s):
        s = np.asarray(s, dtype=np.float64)
        lo, hi = self.K - self.delta, self.K + self.delta
        mid = (s - lo) ** 2 / (4 * self.delta)
        return np.where(s <= lo, 0.0, np.where(s >= hi, s - self.K, mid))

    def smooth_prime(self, s):
        s = np.asarray(s, dtype=np.float64)
        lo, hi = self.K - self.delta, self.K + self.delta
        return np.where(s <= lo, 0.0, np.where(s >= hi, 1.0, (s - lo) / (2 * self.delta)))

    def singular(self, s):
        return np.maximum(np.asarray(s, dtype=np.float64) - self.K, 0.0) - self.smooth(s)


def localize_call(K: float, delta: float) -> Localization:
    return Localization(K, delta)


def payoff_values(kind: str, price: np.ndarray, K: float) -> np.ndarray:
    if kind == "vanilla":
        return np.maximum(price - K, 0.0)
    if kind == "digital":
        return (price >= K).astype(np.float64)
    raise ValueError(f"unknown payoff {kind!r}")


def bs_delta(S0: float, K: float, sigma0: float, T: float, kind: str = "vanilla") -> float:
    if not (sigma0 > 0 and T > 0):
        raise ValueError("sigma0 and T must be positive")
    vol = sigma0 * math.sqrt(T)
    d1 = (math.log(S0 / K) + 0.5 * vol**2) / vol
    if kind == "vanilla":
        return float(norm.cdf(d1))
    if kind == "digital":
        return float(norm.pdf(d1 - vol) / (S0 * vol))
    raise ValueError(f"unknown payoff {kind!r}")


# ---------------------------------------------------------------------------
# Monte Carlo deltas


@dataclass
class DeltaReport:
    """Estimates for one model and one simulation, keyed by (payoff, tag)."""

    results: dict = field(default_factory=dict)
    denominators: dict = field(default_factory=dict)  # tag -> <DG, h> per path
    refused: dict = field(default_factory=dict)  # tag -> reason
    weights: dict = field(default_factory=dict)


def build_weights(m: ModelSpec, tags: Sequence[str], N: int, asian: bool, lG: TensorPoly,
                  allow_truncation: bool, universal_h: CoeffVector | None = None) -> tuple[dict, dict]:
    weights, refused = {}, {}
    for tag in tags:
        try:
            if tag == "universal" or asian:
                if tag == "universal":
                    h = universal_h if universal_h is not None else coeff_vector(D, log_price_coeff(m), log_price_coeff(m))
                else:
                    if tag in ("h3", "h4") and m.rhobar == 0.0:
                        raise RhoAtBoundary(f"{tag} weight diverges at |rho| = 1")
                    h = table_h(m, tag)
                lF1 = lG if asian else TensorPoly.unit(D)
                weights[tag] = weight_universal(lG, lF1, TensorPoly.unit(D, m.S0), h, N,
                                                allow_truncation=allow_truncation, tag=tag)
            else:
                weights[tag] = weight_table1(m, tag, N, allow_truncation=allow_truncation)
        except (RhoAtBoundary, DegenerateWeight) as exc:
            refused[tag] = f"{type(exc).__name__}: {exc}"
    return weights, refused


def delta_estimators(m: ModelSpec, cfg: MCConfig, payoffs: Sequence[str] = PAYOFFS, tags: Sequence[str] = TAGS,
                     K: float | None = None, asian: bool = False, localization: float | None = 10.0,
                     eps: float = 0.01, allow_truncation: bool = True, universal_h: CoeffVector | None = None,
                     fd: bool = True, checkpoints: Sequence[int] | None = None,
                     unstable_fraction: float = 1e-3) -> DeltaReport:
    """All requested delta estimators from one shared set of simulated paths.

    Finite differences reuse the same paths (common random numbers): the
    European log-price shifts by log(1 +- eps) and the Asian average scales
    by (1 +- eps), so no extra signatures are needed.
    """
    K = m.S0 if K is None else K
    N = cfg.N
    lG = payoff_coeff_asian(m, N) if asian else payoff_coeff_european(m)
    if lG.degree > N:
        raise TruncationTooLow(lG.degree, N, "payoff coefficient")
    weights, refused = build_weights(m, tags, N, asian, lG, allow_truncation, universal_h)
    polys = [lG]
    for w in weights.values():
        polys.extend(w.polys())
    for p in polys:
        if p.degree > N:
            raise TruncationTooLow(p.degree, N, "weight ingredient")
    vals = batch_pairings(polys, cfg, D, N)
    G = vals[:, 0]
    price = G if asian else np.exp(G)
    rep = DeltaReport(refused=refused, weights=weights)
    n = cfg.n_paths

    for kind in payoffs:
        loc = localize_call(K, localization) if (kind == "vanilla" and localization) else None
        if loc is not None:
            path_part = loc.smooth_prime(price) * price / m.S0
            sing = loc.singular(price)
        else:
            path_part = np.zeros(n)
            sing = payoff_values(kind, price, K)
        col = 1
        for tag, w in weights.items():
            k = len(INGREDIENTS)
            pi, den = w.evaluate_values(vals[:, col:col + k])
            col += k
            rep.denominators[tag] = den
            bad = (den == 0.0) | (vals[:, col - k + 1] == 0.0) | ~np.isfinite(pi)
            sample = path_part + sing * np.where(bad, 0.0, pi)
            n_bad = int(bad.sum())
            # a denominator taking both signs means it passes through zero: pi_T is heavy-tailed
            minority = min(int((den > 0).sum()), int((den < 0).sum()))
            unstable = n_bad > unstable_fraction * n or minority > unstable_fraction * n
            rep.results[(kind, tag)] = summarize(sample[~bad], checkpoints, cfg.antithetic and n_bad == 0,
                                                 n_excluded=n_bad, unstable=unstable)
        if fd:
            if asian:
                up, dn = price * (1 + eps), price * (1 - eps)
            else:
                up, dn = np.exp(G + math.log1p(eps)), np.exp(G + math.log1p(-eps))
            sample = (payoff_values(kind, up, K) - payoff_values(kind, dn, K)) / (2 * eps * m.S0)
            rep.results[(kind, "fd")] = summarize(sample, checkpoints, cfg.antithetic)
    return rep


def delta_malliavin(m: ModelSpec, payoff: str, K: float, choice: WeightChoice | str, cfg: MCConfig,
                    localization: float | None = None, allow_truncation: bool = True) -> EstimatorResult:
    """Delta of a vanilla/digital (optionally ``asian_``-prefixed) payoff with one weight."""
    asian = payoff.startswith("asian_")
    kind = payoff.removeprefix("asian_")
    tag = choice.tag if isinstance(choice, WeightChoice) else choice
    uh = choice.hvec if isinstance(choice, WeightChoice) else None
    rep = delta_estimators(m, cfg, [kind], [tag], K, asian, localization, allow_truncation=allow_truncation,
                           universal_h=uh, fd=False)
    if tag in rep.refused:
        raise ModelError(rep.refused[tag])
    return rep.results[(kind, tag)]


def delta_finite_difference(m: ModelSpec, payoff: str, K: float, cfg: MCConfig, eps: float = 0.01) -> EstimatorResult:
    if not eps > 0:
        raise ValueError("eps must be positive")
    asian = payoff.startswith("asian_")
    kind = payoff.removeprefix("asian_")
    rep = delta_estimators(m, cfg, [kind], [], K, asian, None, eps=eps)
    return rep.results[(kind, "fd")]

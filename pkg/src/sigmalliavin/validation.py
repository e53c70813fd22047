"""Named numerical checks shared by the CLI validators and the test-suite."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .brownian_engine import MCConfig, expected_signature_mc, ou_split_expectation
from .malliavin import PiercedChain, chaos_kernel, clark_ocone_integrand, pierced_pair, verify_iterated_integral
from .path_signature import SampledPath, batch_signature, expected_brownian_sig, signature_of_path
from .sig_operators import (
    KappaVector,
    SwitchSpec,
    diamond_cdc,
    diamond_direct,
    ou_generator_adjoint,
    ou_semigroup_adjoint,
    psi,
    psi_on_tensor,
    skorokhod_coeff,
)
from .tensor_algebra import (
    GroupTensor,
    TensorPoly,
    chen_product,
    group_inverse,
    pair,
    poly,
    shuffle,
    words_of_length,
)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    max_error: float

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"


def random_poly(rng: np.random.Generator, d: int, max_len: int, n_terms: int = 6, min_len: int = 0) -> TensorPoly:
    terms = {}
    for _ in range(n_terms):
        n = int(rng.integers(min_len, max_len + 1))
        w = tuple(int(c) for c in rng.integers(0, d + 1, size=n))
        terms[w] = float(rng.normal())
    return TensorPoly(d, terms)


def random_path(rng: np.random.Generator, m: int = 2, n: int = 8, T: float = 1.0) -> SampledPath:
    times = np.linspace(0.0, T, n)
    vals = np.vstack([np.zeros((1, m)), np.cumsum(rng.normal(scale=math.sqrt(T / n), size=(n - 1, m)), axis=0)])
    return SampledPath(times, vals)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


# ---------------------------------------------------------------------------
# algebraic identities


def check_shuffle_property(seed: int = 1, trials: int = 20, N: int = 6, tol: float = 1e-10) -> Check:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(trials):
        x = signature_of_path(random_path(rng), N)
        a = int(rng.integers(1, N))
        l, p = random_poly(rng, 2, a), random_poly(rng, 2, N - a)
        err = max(err, _rel(pair(l, x) * pair(p, x), pair(shuffle(l, p), x)))
    return Check("shuffle_property", err <= tol, err)


def check_chen_identity(seed: int = 2, trials: int = 10, N: int = 5, tol: float = 1e-12) -> Check:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(trials):
        path = random_path(rng, n=12)
        k = int(rng.integers(1, 11))
        full = signature_of_path(path, N)
        split = chen_product(signature_of_path(path.sub_path(0, k), N), signature_of_path(path.sub_path(k, 11), N))
        scale = max(np.max(np.abs(lv)) for lv in full.levels)
        err = max(err, full.max_abs_diff(split) / max(1.0, scale))
    return Check("chen_identity", err <= tol, err)


def check_group_inverse(seed: int = 3, trials: int = 10, N: int = 5, tol: float = 1e-12) -> Check:
    """x (x) x^{-1} = 1, and x^{-1} is the signature of the reversed path."""
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(trials):
        path = random_path(rng)
        x = signature_of_path(path, N)
        inv = group_inverse(x)
        err = max(err, chen_product(x, inv).max_abs_diff(GroupTensor.unit(2, N)))
        # the reversed path (time coordinate included) runs the increments backwards
        back = batch_signature(-path.increments()[None, ::-1], N)[0]
        err = max(err, inv.max_abs_diff(GroupTensor.from_flat(2, N, back)))
    return Check("group_inverse", err <= tol, err)


def check_psi_adjointness(seed: int = 4, trials: int = 6, N: int = 5, tol: float = 1e-12) -> Check:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(trials):
        x = signature_of_path(random_path(rng), N)
        for u, w in itertools.product(range(3), repeat=2):
            if u == w:
                continue
            spec = SwitchSpec(((u,),), ((w,),))
            l = random_poly(rng, 2, N)
            lhs = pair(l, psi_on_tensor(x, spec))
            rhs = pair(psi(l, spec.reversed()), x)
            err = max(err, _rel(lhs, rhs))
        # a length-changing switch: (11) -> (0) on functionals
        spec = SwitchSpec(((0,),), ((1, 1),))
        y = psi_on_tensor(x, spec)
        l = random_poly(rng, 2, y.N)
        err = max(err, _rel(pair(l, y), pair(psi(l, spec.reversed()), x)))
    return Check("psi_adjointness", err <= tol, err)


def check_diamond_exhaustive(max_len: int = 4, tol: float = 0.0) -> Check:
    """Carre-du-champ form against the defining sum on every pair of basis words."""
    words = [w for n in range(max_len + 1) for w in words_of_length(n, 2)]
    err = 0.0
    for v, vp in itertools.product(words, repeat=2):
        l, lp = TensorPoly(2, {v: 1.0}), TensorPoly(2, {vp: 1.0})
        for i in (1, 2):
            a = diamond_cdc(l, lp, i, 0)
            b = diamond_direct(l, lp, (i,), (i,), (0,))
            if a != b:
                keys = set(a.terms) | set(b.terms)
                err = max(err, max(abs(a[k] - b[k]) for k in keys))
    return Check(f"diamond_cdc_vs_direct_len{max_len}", err <= tol, err)


def check_zero_mean(seed: int = 5, trials: int = 10, T: float = 1.3, tol: float = 1e-12) -> Check:
    rng = np.random.default_rng(seed)
    E = expected_brownian_sig(T, 2, 7)
    err = 0.0
    for _ in range(trials):
        l = random_poly(rng, 2, 6)
        for i in (1, 2):
            err = max(err, abs(pair(skorokhod_coeff(l, i), E)))
        err = max(err, abs(pair(ou_generator_adjoint(l, (0.7, 1.9)), E)))
    return Check("zero_mean_skorokhod_generator", err <= tol, err)


def check_ou_semigroup_law(seed: int = 6, trials: int = 10, tol: float = 1e-12) -> Check:
    rng = np.random.default_rng(seed)
    kappa = (0.8, 1.7)
    err = 0.0
    for _ in range(trials):
        l = random_poly(rng, 2, 6)
        t1, t2 = float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.05, 1.0))
        a = ou_semigroup_adjoint(ou_semigroup_adjoint(l, KappaVector(kappa, t2)), KappaVector(kappa, t1))
        b = ou_semigroup_adjoint(l, KappaVector(kappa, t1 + t2))
        keys = set(a.terms) | set(b.terms)
        scale = max(1.0, max((abs(c) for _, c in l), default=1.0))
        err = max(err, max((abs(a[k] - b[k]) for k in keys), default=0.0) / scale)
    return Check("ou_semigroup_law", err <= tol, err)


def check_generator_limit(seed: int = 7, trials: int = 10, theta: float = 1e-5, tol: float = 1e-6) -> Check:
    """Richardson-extrapolated difference quotient of the semigroup against the generator."""
    rng = np.random.default_rng(seed)
    kappa = (0.8, 1.7)
    err = 0.0
    for _ in range(trials):
        l = random_poly(rng, 2, 6)
        q1 = (ou_semigroup_adjoint(l, KappaVector(kappa, theta)) - l) / theta
        q2 = (ou_semigroup_adjoint(l, KappaVector(kappa, theta / 2)) - l) / (theta / 2)
        rich = 2.0 * q2 - q1
        gen = ou_generator_adjoint(l, kappa)
        keys = set(rich.terms) | set(gen.terms)
        err = max(err, max((abs(rich[k] - gen[k]) for k in keys), default=0.0))
    return Check("generator_limit", err <= tol, err)


def algebra_checks() -> list[Check]:
    return [
        check_shuffle_property(),
        check_chen_identity(),
        check_group_inverse(),
        check_psi_adjointness(),
        check_diamond_exhaustive(),
        check_zero_mean(),
        check_ou_semigroup_law(),
        check_generator_limit(),
    ]


# ---------------------------------------------------------------------------
# worked examples (exact)


def _exact(name: str, got: TensorPoly, want: TensorPoly) -> Check:
    keys = set(got.terms) | set(want.terms)
    err = max((abs(got[k] - want[k]) for k in keys), default=0.0)
    return Check(name, got == want, err)


def worked_examples(theta: float = 0.37) -> list[Check]:
    one = SwitchSpec(((1,),), ((0,),))
    e2 = math.exp(-2.0 * theta)
    return [
        _exact("psi_example_01101", psi(poly(1, "01101"), one), poly(1, {"00101": 1, "01001": 1, "01100": 1})),
        _exact("generator_adjoint_11", ou_generator_adjoint(poly(1, "11"), (1.0,)), poly(1, {"0": 1, "11": -2})),
        _exact("ou_semigroup_11", ou_semigroup_adjoint(poly(1, "11"), KappaVector((1.0,), theta)),
               poly(1, {"11": e2, "0": (1.0 - e2) / 2.0})),
        _exact("skorokhod_1", skorokhod_coeff(poly(1, "1"), 1), poly(1, {"11": 2, "0": -1})),
    ]


# ---------------------------------------------------------------------------
# Malliavin-side checks


def smooth_path(K: int, T: float = 1.0) -> SampledPath:
    t = np.linspace(0.0, T, K + 1)
    return SampledPath(t, np.column_stack([np.sin(2 * t), t**2 - 0.5 * np.cos(3 * t)]))


def check_iterated_integrals(steps=(250, 500, 1000, 2000), tol: float = 1e-3) -> list[Check]:
    l = TensorPoly(2, {"1101": 1.0, "121": 0.7, "0112": -0.4, "2211": 0.3, "11": 1.0, "1": 0.5})
    out = []
    for name, ins, outs in (("n1", (1,), (0,)), ("n1_space", (2,), (1,)), ("n2", (1, 2), (0, 1))):
        errs = []
        for K in steps:
            lhs, rhs = verify_iterated_integral(l, smooth_path(K), ins, outs)
            errs.append(abs(lhs - rhs))
        decreasing = all(b < a for a, b in zip(errs, errs[1:]))
        out.append(Check(f"iterated_integral_{name}", errs[-1] < tol and decreasing, errs[-1]))
    return out


def check_pierced_examples() -> list[Check]:
    rng = np.random.default_rng(8)
    path = random_path(rng, m=1, n=30)
    s_idx = 11
    N = 3
    pre = signature_of_path(path.sub_path(0, s_idx), N)
    post = signature_of_path(path.sub_path(s_idx, 29), N)
    W_T = path.values[-1, 0] - path.values[0, 0]
    chain = PiercedChain(pre, (1,), (post,))
    errs = [
        abs(pierced_pair(poly(1, "11"), chain) - W_T),
        abs(pierced_pair(poly(1, "0"), chain)),
        abs(pierced_pair(poly(1, "1"), chain) - 1.0),
    ]
    W_s = path.values[s_idx, 0]
    errs.append(abs(clark_ocone_integrand(poly(1, "11"), pre, 1, 0.5) - W_s))
    errs.append(abs(chaos_kernel(poly(1, "1"), [1], [0.3], 1.0) - 1.0))
    errs.append(abs(chaos_kernel(poly(1, "11"), [1], [0.3], 1.0)))
    errs.append(abs(chaos_kernel(poly(1, "11"), [1, 1], [0.3, 0.6], 1.0) - 0.5))
    errs.append(abs(chaos_kernel(poly(1, {"11": 1.0, "1": 2.0}), [1, 1, 1], [0.2, 0.3, 0.6], 1.0)))
    err = max(errs)
    return [Check("pierced_and_chaos_examples", err <= 1e-12, err)]


def malliavin_checks() -> list[Check]:
    return check_pierced_examples() + check_iterated_integrals()


# ---------------------------------------------------------------------------
# Monte Carlo checks


def check_expected_signature(cfg: MCConfig, d: int = 2) -> Check:
    mean, se = expected_signature_mc(cfg, d)
    exact = expected_brownian_sig(cfg.T, d, cfg.N)
    diff = np.abs(mean.flat() - exact.flat())
    ok = diff <= 3.0 * se.flat() + 1e-12
    z = np.where(se.flat() > 0, diff / np.where(se.flat() > 0, se.flat(), 1.0), 0.0)
    return Check(f"expected_signature_level{cfg.N}_d{d}", bool(ok.all()), float(z.max()))


def ou_functionals(seed: int = 9) -> list[tuple[str, TensorPoly, KappaVector]]:
    rng = np.random.default_rng(seed)
    out = [("l_11", poly(1, "11"), KappaVector((1.0,), 0.5))]
    for j in range(2):
        l = random_poly(rng, 2, 3, n_terms=6, min_len=1)
        out.append((f"random_{j}", l, KappaVector((1.0, 0.6), 0.4)))
    return out


def check_ou(cfg: MCConfig, n_inner: int = 2000, seed: int = 9) -> list[Check]:
    """Per outer path: |inner mean - operator value| <= 3 inner SE."""
    out = []
    for name, l, kv in ou_functionals(seed):
        r = ou_split_expectation(l, kv, cfg, n_inner=n_inner)
        z = np.abs(r.inner_mean - r.operator_value) / r.inner_se
        out.append(Check(f"ou_split_{name}", bool(np.all(z <= 3.0)), float(z.max())))
    return out

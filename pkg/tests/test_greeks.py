import math
import warnings

import numpy as np
import pytest

from sigmalliavin.brownian_engine import MCConfig, batch_pairings
from sigmalliavin.errors import DegenerateWeight, ModelError, RhoAtBoundary, TruncationTooLow
from sigmalliavin.greeks import (
    D,
    INGREDIENTS,
    MartingaleWarning,
    ModelSpec,
    RationalFunctional,
    WeightChoice,
    bs_delta,
    delta_estimators,
    delta_finite_difference,
    delta_malliavin,
    localize_call,
    log_price_coeff,
    payoff_coeff_asian,
    payoff_values,
    table_h,
    weight_table1,
    weight_universal,
)
from sigmalliavin.path_signature import batch_signature
from sigmalliavin.tensor_algebra import GroupTensor, TensorPoly, pair, poly


def model(spec, rho, S0=1.0, T=1.0):
    return ModelSpec(poly(D, spec), rho, S0, T)


def test_bs_oracle_values():
    assert math.isclose(bs_delta(1, 1, 0.2, 1), 0.539828, abs_tol=1e-6)
    assert math.isclose(bs_delta(1, 1, 0.2, 1, "digital"), 1.98476, abs_tol=1e-5)
    assert bs_delta(1, 0.01, 0.2, 1) > 0.999


def test_model_validation():
    with pytest.raises(ModelError):
        model({"2": 0.1, "e": 0.2}, 0.0)
    with pytest.raises(ModelError):
        model({"e": 0.2}, 1.5)
    with pytest.warns(MartingaleWarning):
        model({"e": 0.2, "11": 0.1}, -0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        model({"e": 0.25, "1": 0.04, "01": 0.04, "110": 0.04, "111": 0.04}, -0.9)


def _ito_log_price(m, dW, dt):
    # sigma_t = s0 + s1 W^1_t, Euler-Maruyama for log S with dB = rho dW1 + rhobar dW2
    s0, s1 = m.sigma[()], m.sigma[(1,)]
    W1 = np.concatenate([[0.0], np.cumsum(dW[:, 0])])[:-1]
    vol = s0 + s1 * W1
    dB = m.rho * dW[:, 0] + m.rhobar * dW[:, 1]
    return math.log(m.S0) + np.sum(vol * dB) - 0.5 * np.sum(vol**2) * dt


def test_log_price_coefficient_matches_euler():
    m = model({"e": 0.2, "1": 0.1}, -0.6, S0=2.0)
    rng = np.random.default_rng(0)
    K = 20000
    dt = 1.0 / K
    dW = rng.normal(scale=math.sqrt(dt), size=(K, 2))
    inc = np.concatenate([np.full((K, 1), dt), dW], axis=1)
    sig = GroupTensor.from_flat(D, 3, batch_signature(inc[None], 3)[0])
    assert abs(pair(log_price_coeff(m), sig) - _ito_log_price(m, dW, dt)) < 5e-3


def test_weight_refusals():
    const = model({"e": 0.2}, 0.0)
    with pytest.raises(DegenerateWeight):
        weight_table1(const, "h1", 4)
    with pytest.raises(RhoAtBoundary):
        weight_table1(model({"e": 0.2, "1": 0.1}, -1.0), "h3", 4)
    with pytest.raises(TruncationTooLow) as info:
        weight_table1(model({"e": 0.2, "1": 0.1}, -0.5), "h2", 5)
    assert info.value.required == 7
    w = weight_table1(model({"e": 0.2, "1": 0.1}, -0.5), "h2", 5, allow_truncation=True)
    assert w.truncated and w.degree <= 5


def _sigs(n, N, seed=0):
    cfg = MCConfig(n_paths=n, n_steps=20, N=N, seed=seed)
    from sigmalliavin.brownian_engine import signature_batches
    return np.vstack([s for _, s in signature_batches(cfg, D, N)])


def test_table_rows_match_universal_formula():
    m = model({"e": 0.2, "1": 0.1}, -0.5, S0=1.5)
    N = 7
    flats = _sigs(20, N)
    lx = log_price_coeff(m)
    for tag in ("h1", "h2", "h3", "h4"):
        a = weight_table1(m, tag, N)
        b = weight_universal(lx, TensorPoly.unit(D), TensorPoly.unit(D, m.S0), table_h(m, tag), N, tag=tag)
        for f in flats[:5]:
            x = GroupTensor.from_flat(D, N, f)
            assert math.isclose(a.evaluate(x), b.evaluate(x), rel_tol=1e-9), tag


def test_rational_form_agrees_and_is_closed():
    m = model({"e": 0.2, "1": 0.1}, -0.5)
    w = weight_table1(m, "h1", 3)
    r = w.as_rational()
    assert isinstance(r, RationalFunctional)
    N = max(r.num.degree, r.den.degree)
    for f in _sigs(5, N):
        x = GroupTensor.from_flat(D, N, f)
        assert math.isclose(r.evaluate(x)[0], w.evaluate(x.truncate(3)), rel_tol=1e-8)


def test_h2_denominator_nonnegative():
    m = model({"e": 0.2, "1": 0.1}, -0.5)
    w = weight_table1(m, "h2", 7)
    vals = batch_pairings([w.Gh], MCConfig(n_paths=300, n_steps=20, N=7, seed=1), D, 7)[:, 0]
    assert np.all(vals > 0)


def test_localization_split():
    loc = localize_call(100.0, 10.0)
    s = np.linspace(80, 120, 401)
    assert np.allclose(loc.smooth(s) + loc.singular(s), payoff_values("vanilla", s, 100.0))
    assert np.all(loc.singular(s[(s < 90) | (s > 110)]) == 0.0)
    h = 1e-6
    assert np.allclose((loc.smooth(s + h) - loc.smooth(s - h)) / (2 * h), loc.smooth_prime(s), atol=1e-5)


def test_asian_coefficient_is_truncated_series():
    m = model({"e": 0.2}, 0.0)
    lG = payoff_coeff_asian(m, 4)
    assert lG.exact_to == 4
    assert lG.degree == 4


def test_weight_choice_validation():
    with pytest.raises(ValueError):
        WeightChoice("h9")
    with pytest.raises(ValueError):
        WeightChoice("universal")


def test_small_black_scholes_run():
    m = model({"e": 0.2}, 0.0)
    cfg = MCConfig(n_paths=4000, n_steps=20, N=2, seed=11)
    r = delta_malliavin(m, "vanilla", 1.0, "h3", cfg)
    assert r.within(bs_delta(1, 1, 0.2, 1), k=4.0)
    fd = delta_finite_difference(m, "digital", 1.0, cfg)
    assert fd.within(bs_delta(1, 1, 0.2, 1, "digital"), k=4.0, floor=0.02)
    with pytest.raises(ModelError):
        delta_malliavin(m, "vanilla", 1.0, "h1", cfg)


def test_unstable_flag_for_sign_changing_denominator():
    m = model({"e": 0.02, "1": 0.05}, -0.95, S0=100.0)
    rep = delta_estimators(m, MCConfig(n_paths=2000, n_steps=20, N=7, seed=2), ["digital"], ["h1", "h4"])
    assert rep.results[("digital", "h1")].unstable
    assert not rep.results[("digital", "h4")].unstable
    assert set(INGREDIENTS) == {"F1", "F2", "dh", "F1h", "F2h", "Gh", "Ghh"}

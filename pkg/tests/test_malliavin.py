import math

import numpy as np
import pytest

from sigmalliavin.errors import DimensionMismatch, NonIncreasingTimes
from sigmalliavin.malliavin import (
    PiercedChain,
    chaos_kernel,
    clark_ocone_integrand,
    pierced_pair,
    verify_iterated_integral,
)
from sigmalliavin.path_signature import SampledPath, expected_brownian_sig, signature_of_path
from sigmalliavin.sig_operators import diamond_cdc
from sigmalliavin.tensor_algebra import GroupTensor, TensorPoly, pair, poly
from sigmalliavin.validation import check_iterated_integrals, check_pierced_examples, smooth_path


def test_pierced_examples():
    (c,) = check_pierced_examples()
    assert c.passed, c


def test_iterated_integrals_converge():
    for c in check_iterated_integrals():
        assert c.passed, c


def test_iterated_integral_second_order():
    l = TensorPoly(2, {"1101": 1.0, "121": 0.7})
    e = [abs(np.subtract(*verify_iterated_integral(l, smooth_path(K), (1,), (0,)))) for K in (200, 400)]
    assert 3.0 < e[0] / e[1] < 5.0


def test_pierced_chain_validation():
    x = GroupTensor.unit(1, 2)
    with pytest.raises(ValueError):
        PiercedChain(x, (1,), ())
    with pytest.raises(DimensionMismatch):
        PiercedChain(x, (1,), (GroupTensor.unit(1, 3),))
    with pytest.raises(DimensionMismatch):
        PiercedChain(x, (2,), (x,))


def _derivative(l, p, k, i, N):
    pre = signature_of_path(p.sub_path(0, k), N) if k > 0 else GroupTensor.unit(p.m, N)
    post = signature_of_path(p.sub_path(k, len(p.times) - 1), N) if k < len(p.times) - 1 else GroupTensor.unit(p.m, N)
    return pierced_pair(l, PiercedChain(pre, (i,), (post,)))


def test_diamond_linearizes_scalar_product():
    l = TensorPoly(2, {"11": 1.0, "012": 0.5, "1": -0.3})
    lp = TensorPoly(2, {"21": 0.8, "1": 1.0})
    N = 3
    errs = []
    for K in (40, 80):
        p = smooth_path(K)
        sig = signature_of_path(p, N + 2)
        for i in (1, 2):
            vals = np.array([_derivative(l, p, k, i, N) * _derivative(lp, p, k, i, N) for k in range(K + 1)])
            riemann = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(p.times)))
            errs.append(abs(riemann - pair(diamond_cdc(l, lp, i), sig)))
    assert max(errs[2:]) < max(errs[:2])
    assert max(errs[2:]) < 1e-3


def test_clark_ocone_of_w_squared():
    # E[D_t W_T^2 | F_t] = 2 W_t, and W_T^2 = 2 <(11), sig>
    p = SampledPath([0.0, 0.2, 0.5], [[0.0], [0.3], [-0.1]])
    sig = signature_of_path(p, 2)
    assert math.isclose(clark_ocone_integrand(poly(1, {"11": 2.0}), sig, 1, 0.5), -0.2, abs_tol=1e-14)


def test_chaos_kernels():
    T = 1.0
    # <(11), sig_T> = W_T^2 / 2 = T/2 + I_2(1)/2 ... the n = 2 kernel is 1/2 after the 1/n! normalisation
    assert math.isclose(chaos_kernel(poly(1, "11"), [1, 1], [0.2, 0.7], T), 0.5)
    assert math.isclose(chaos_kernel(poly(1, "11"), [], [], T), 0.5)
    # (10) = int W dt; its first kernel is T - s
    assert math.isclose(chaos_kernel(poly(1, "10"), [1], [0.25], T), 0.75)
    assert chaos_kernel(poly(1, "10"), [1], [0.25], T, trailing=False) == 0.0
    with pytest.raises(NonIncreasingTimes):
        chaos_kernel(poly(1, "11"), [1, 1], [0.5, 0.5], T)

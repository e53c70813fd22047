"""Signatures of sampled (piecewise-linear) paths and the expected Brownian signature."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import NonMonotoneTimes, TooFewSamples
from .tensor_algebra import (
    GroupTensor,
    TensorPoly,
    chen_product,
    group_inverse,
    level_offsets,
    tensor_dim,
    tensor_exp,
)


@dataclass(frozen=True, eq=False)
class SampledPath:
    """Samples of an m-dimensional path; ``values`` has shape (len(times), m)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64).reshape(-1)
        x = np.asarray(self.values, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if len(t) < 2:
            raise TooFewSamples(f"need at least 2 samples, got {len(t)}")
        if x.shape[0] != len(t):
            raise ValueError("values and times have different lengths")
        if t[0] < 0 or np.any(np.diff(t) <= 0):
            raise NonMonotoneTimes("sample times must be non-negative and strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", x)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def increments(self, augment_time: bool = True) -> np.ndarray:
        dx = np.diff(self.values, axis=0)
        if augment_time:
            dx = np.hstack([np.diff(self.times)[:, None], dx])
        return dx

    def sub_path(self, i0: int, i1: int) -> "SampledPath":
        """Samples i0..i1 inclusive."""
        return SampledPath(self.times[i0:i1 + 1], self.values[i0:i1 + 1])


def segment_exp(delta: np.ndarray, N: int) -> GroupTensor:
    """exp of a level-1 increment via the closed form delta^{(x)n} / n!."""
    delta = np.asarray(delta, dtype=np.float64)
    levels = [np.ones(1)]
    for n in range(1, N + 1):
        levels.append(np.multiply.outer(levels[-1], delta).reshape(-1) / n)
    return GroupTensor(len(delta) - 1, N, tuple(levels))


def signature_of_path(p: SampledPath, N: int, augment_time: bool = True) -> GroupTensor:
    """Signature of the piecewise-linear interpolant, exact at level N."""
    inc = p.increments(augment_time)
    d = inc.shape[1] - 1
    flat = batch_signature(inc[None, :, :], N)[0]
    return GroupTensor.from_flat(d, N, flat)


def signature_of_path_chen(p: SampledPath, N: int, augment_time: bool = True) -> GroupTensor:
    """Same as ``signature_of_path`` but through explicit Chen products (slower reference)."""
    inc = p.increments(augment_time)
    d = inc.shape[1] - 1
    out = GroupTensor.unit(d, N)
    for delta in inc:
        out = chen_product(out, segment_exp(delta, N))
    return out


@numba.njit(cache=True)
def _sig_kernel(incs, N, offsets, out):
    P, K, A = incs.shape
    top = A**N
    acc = np.empty(top)
    tmp = np.empty(top)
    for p in range(P):
        S = out[p]
        S[:] = 0.0
        S[0] = 1.0
        for k in range(K):
            dx = incs[p, k]
            # S <- S (x) exp(dx), highest level first so lower levels are still old
            for n in range(N, 0, -1):
                for a in range(A):
                    acc[a] = dx[a] / n
                size = A
                for j in range(1, n):
                    base = offsets[j]
                    scale = 1.0 / (n - j)
                    for b in range(size):
                        s = (acc[b] + S[base + b]) * scale
                        for a in range(A):
                            tmp[b * A + a] = s * dx[a]
                    size *= A
                    for q in range(size):
                        acc[q] = tmp[q]
                base = offsets[n]
                for q in range(size):
                    S[base + q] += acc[q]


def batch_signature(incs: np.ndarray, N: int, out: np.ndarray | None = None) -> np.ndarray:
    """Flat signatures of many piecewise-linear paths.

    ``incs`` has shape (paths, steps, d + 1); the result has shape
    (paths, tensor_dim(d, N)) in level-then-lexicographic order.
    """
    incs = np.ascontiguousarray(incs, dtype=np.float64)
    P, _, A = incs.shape
    dim = tensor_dim(A - 1, N)
    if out is None:
        out = np.empty((P, dim))
    _sig_kernel(incs, N, level_offsets(A - 1, N), out)
    return out


def expected_brownian_sig(t: float, d: int, N: int) -> GroupTensor:
    """exp(t*(0) + t/2 * sum_i (ii)), the expected signature of time-augmented BM."""
    if t < 0:
        raise ValueError("t must be non-negative")
    terms = {(0,): t}
    for i in range(1, d + 1):
        terms[(i, i)] = t / 2.0
    return tensor_exp(TensorPoly(d, terms), N)


def interval_signature(x_full: GroupTensor, x_prefix: GroupTensor) -> GroupTensor:
    """sig_{s,t} = sig_s^{-1} (x) sig_t."""
    return chen_product(group_inverse(x_prefix), x_full)

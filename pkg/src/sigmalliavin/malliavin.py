"""Malliavin derivatives of Brownian signature functionals, evaluated algebraically.

The n-th derivative D^{i_1}_{s_1} ... D^{i_n}_{s_n} <l, sig_t> (s_1 < ... < s_n)
is the pairing of l with the pierced signature

    sig_{s_1} (x) i_1 (x) sig_{s_1, s_2} (x) ... (x) i_n (x) sig_{s_n, t}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegreeExceedsTruncation, DimensionMismatch, NonIncreasingTimes
from .path_signature import SampledPath, expected_brownian_sig, segment_exp, signature_of_path
from .sig_operators import SwitchSpec, psi
from .tensor_algebra import GroupTensor, TensorPoly, Word, _mul_levels, pair, word_index


@dataclass(frozen=True, eq=False)
class PiercedChain:
    prefix: GroupTensor
    insertions: tuple[int, ...]
    gaps: tuple[GroupTensor, ...]

    def __post_init__(self):
        ins = tuple(int(i) for i in self.insertions)
        gaps = tuple(self.gaps)
        if len(ins) != len(gaps):
            raise ValueError("need one gap tensor per insertion")
        for g in gaps:
            if g.d != self.prefix.d or g.N != self.prefix.N:
                raise DimensionMismatch("all chain tensors must share d and N")
        for i in ins:
            if not 0 <= i <= self.prefix.d:
                raise DimensionMismatch(f"letter {i} outside alphabet")
        object.__setattr__(self, "insertions", ins)
        object.__setattr__(self, "gaps", gaps)

    @property
    def tensors(self) -> tuple[GroupTensor, ...]:
        return (self.prefix,) + self.gaps


def _pierced_word(v: Word, letters: tuple[int, ...], tensors: tuple[GroupTensor, ...]) -> float:
    d = tensors[0].d

    def coef(t: GroupTensor, w: Word) -> float:
        return t.levels[len(w)][word_index(w, d)]

    def rec(pos: int, k: int) -> float:
        if k == len(letters):
            return coef(tensors[k], v[pos:])
        total = 0.0
        for p in range(pos, len(v)):
            if v[p] == letters[k]:
                head = coef(tensors[k], v[pos:p])
                if head != 0.0:
                    total += head * rec(p + 1, k + 1)
        return total

    return rec(0, 0)


def pierced_pair(l: TensorPoly, chain: PiercedChain) -> float:
    """<l, prefix (x) i_1 (x) gap_1 (x) ... (x) i_n (x) gap_n>."""
    N = chain.prefix.N
    n = len(chain.insertions)
    if l.d != chain.prefix.d:
        raise DimensionMismatch("alphabet mismatch")
    if l.degree - n > N:
        raise DegreeExceedsTruncation(f"pieces of length up to {l.degree - n} exceed chain truncation {N}")
    total = 0.0
    for v, c in l:
        if len(v) >= n:
            total += c * _pierced_word(v, chain.insertions, chain.tensors)
    return total


def _append_letter(level: np.ndarray, i: int, A: int) -> np.ndarray:
    out = np.zeros(level.size * A)
    out[i::A] = level
    return out


def _shift_with_letter(x: list[np.ndarray], i: int, A: int, N: int) -> list[np.ndarray]:
    """x (x) i, truncated at N."""
    out = [np.zeros(1)]
    for n in range(1, N + 1):
        out.append(_append_letter(x[n - 1], i, A))
    return out


def verify_iterated_integral(l: TensorPoly, path: SampledPath, ins: Sequence[int], outs: Sequence[int],
                             N: int | None = None) -> tuple[float, float]:
    """Riemann-sum iterated integral of a pierced functional against its closed form.

    lhs integrates <l, sig_{s_1} (x) ins_1 (x) ... (x) ins_n (x) sig_{s_n,T}> over
    s_1 < ... < s_n against dX^{outs_1}_{s_1} ... dX^{outs_n}_{s_n} (letter 0 is
    time) with a trapezoidal rule; rhs is <psi(l, ins -> outs), sig_T>.
    """
    ins, outs = tuple(ins), tuple(outs)
    if len(ins) != len(outs):
        raise ValueError("ins and outs must have the same length")
    d = path.m
    A = d + 1
    N = max(l.degree, 1) if N is None else N
    inc = path.increments(augment_time=True)
    K = inc.shape[0]

    # I[m] at the current grid time, each a list of per-level arrays
    unit = GroupTensor.unit(d, N).levels
    I = [list(unit)] + [[np.zeros(A**n) for n in range(N + 1)] for _ in ins]
    for k in range(K):
        seg = segment_exp(inc[k], N).levels
        new = [_mul_levels(I[0], seg, N)]
        for m in range(1, len(ins) + 1):
            dX = inc[k][outs[m - 1]]
            left = _mul_levels(_shift_with_letter(I[m - 1], ins[m - 1], A, N), seg, N)
            right = _shift_with_letter(new[m - 1], ins[m - 1], A, N)
            carried = _mul_levels(I[m], seg, N)
            new.append([c + 0.5 * dX * (a + b) for c, a, b in zip(carried, left, right)])
        I = new
    lhs = pair(l, GroupTensor(d, N, tuple(I[-1])))
    rhs_poly = psi(l, SwitchSpec(tuple((i,) for i in ins), tuple((j,) for j in outs)))
    rhs = pair(rhs_poly, GroupTensor(d, N, tuple(I[0])))
    return lhs, rhs


def clark_ocone_integrand(l: TensorPoly, sig_t: GroupTensor, i: int, horizon: float) -> float:
    """E[D^i_t <l, sig_T> | F_t] = <l, sig_t (x) i (x) E_{T-t}>."""
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    chain = PiercedChain(sig_t, (i,), (expected_brownian_sig(horizon, sig_t.d, sig_t.N),))
    return pierced_pair(l, chain)


def chaos_kernel(l: TensorPoly, letters: Sequence[int], times: Sequence[float], T: float,
                 trailing: bool = True) -> float:
    """Kernel f_n(s_1..s_n; i_1..i_n) of the Wiener chaos expansion of <l, sig_T>.

    ``trailing=False`` drops the final expected-signature factor E_{T - s_n},
    which changes the value whenever l has words with letters after the last
    insertion; it exists to compare against that alternative form.
    """
    letters = tuple(letters)
    times = np.asarray(times, dtype=np.float64)
    n = len(letters)
    if len(times) != n:
        raise ValueError("one time per letter")
    if n and (times[0] < 0 or np.any(np.diff(times) <= 0) or times[-1] > T):
        raise NonIncreasingTimes("times must be strictly increasing inside [0, T]")
    N = max(l.degree, 1)
    if n == 0:
        return pair(l, expected_brownian_sig(T, l.d, N))
    starts = np.concatenate([times, [T]])
    prefix = expected_brownian_sig(times[0], l.d, N)
    gaps = [expected_brownian_sig(starts[k + 1] - starts[k], l.d, N) for k in range(n - 1)]
    gaps.append(expected_brownian_sig(T - times[-1], l.d, N) if trailing else GroupTensor.unit(l.d, N))
    return pierced_pair(l, PiercedChain(prefix, letters, tuple(gaps))) / math.factorial(n)

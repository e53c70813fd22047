"""Linear operators on coefficient functionals that encode Malliavin calculus.

Notation in names follows the switching operator convention ``psi(l, sources,
targets)``: every way of picking the source words, in order, as consecutive
non-overlapping sub-words of a word is replaced by the corresponding targets.
So ``psi(l, ["1"], ["0"])`` turns 01101 into 00101 + 01001 + 01100.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch
from .tensor_algebra import (
    GroupTensor,
    TensorPoly,
    Word,
    WordLike,
    _min_exact,
    shuffle,
    shuffle_words,
    word,
    word_index,
    words_of_length,
)

CoeffVector = tuple  # d-tuple of TensorPoly, slot i-1 holds h_i


@dataclass(frozen=True)
class SwitchSpec:
    sources: tuple[Word, ...]
    targets: tuple[Word, ...]

    def __post_init__(self):
        src = tuple(word(u) for u in self.sources)
        tgt = tuple(word(w) for w in self.targets)
        if len(src) != len(tgt) or not src:
            raise ValueError("SwitchSpec needs equally many (>= 1) source and target words")
        if any(len(u) == 0 for u in src):
            raise ValueError("source words must be non-empty")
        object.__setattr__(self, "sources", src)
        object.__setattr__(self, "targets", tgt)

    @classmethod
    def of(cls, sources: Sequence[WordLike] | WordLike, targets: Sequence[WordLike] | WordLike) -> "SwitchSpec":
        if isinstance(sources, str):
            sources = [sources]
        if isinstance(targets, str):
            targets = [targets]
        return cls(tuple(word(u) for u in sources), tuple(word(w) for w in targets))

    @property
    def shift(self) -> int:
        """Change in word length produced by the switch on functionals."""
        return sum(map(len, self.targets)) - sum(map(len, self.sources))

    def reversed(self) -> "SwitchSpec":
        return SwitchSpec(self.targets, self.sources)

    def max_letter(self) -> int:
        return max((c for w in self.sources + self.targets for c in w), default=0)


@dataclass(frozen=True)
class KappaVector:
    kappa: tuple[float, ...]
    theta: float

    def __post_init__(self):
        k = tuple(float(x) for x in self.kappa)
        if any(x < 0 for x in k):
            raise ValueError("kappa entries must be non-negative")
        if self.theta < 0:
            raise ValueError("theta must be non-negative")
        object.__setattr__(self, "kappa", k)
        object.__setattr__(self, "theta", float(self.theta))


def _check_spec(l_d: int, spec: SwitchSpec) -> None:
    if spec.max_letter() > l_d:
        raise DimensionMismatch(f"switch uses letter {spec.max_letter()} outside alphabet 0..{l_d}")


@lru_cache(maxsize=1 << 18)
def psi_word(v: Word, sources: tuple[Word, ...], targets: tuple[Word, ...]) -> tuple[tuple[Word, int], ...]:
    """All switches of one word, as (word, multiplicity) pairs."""
    n = len(sources)
    memo: dict[tuple[int, int], dict[Word, int]] = {}

    def rec(pos: int, k: int) -> dict[Word, int]:
        key = (pos, k)
        if key in memo:
            return memo[key]
        if k == n:
            out = {v[pos:]: 1}
        else:
            out = defaultdict(int)
            u, w = sources[k], targets[k]
            L = len(u)
            for p in range(pos, len(v) - L + 1):
                if v[p:p + L] == u:
                    head = v[pos:p] + w
                    for tail, c in rec(p + L, k + 1).items():
                        out[head + tail] += c
        memo[key] = out
        return out

    return tuple(rec(0, 0).items())


def psi(l: TensorPoly, spec: SwitchSpec | None = None, *, sources=None, targets=None,
        max_level: int | None = None) -> TensorPoly:
    """Switching operator on a functional."""
    if spec is None:
        spec = SwitchSpec.of(sources, targets)
    _check_spec(l.d, spec)
    out: dict[Word, float] = defaultdict(float)
    for v, c in l:
        if max_level is not None and len(v) + spec.shift > max_level:
            continue
        for w, k in psi_word(v, spec.sources, spec.targets):
            out[w] += c * k
    exact = l.exact_to
    if exact is not None and spec.shift < 0:
        exact = exact + spec.shift
    return TensorPoly._raw(l.d, out, _min_exact(exact, max_level))


def psi_on_tensor(x: GroupTensor, spec: SwitchSpec) -> GroupTensor:
    """Switch applied to a truncated tensor, dual to ``psi``.

    Satisfies ``pair(l, psi_on_tensor(x, u->w)) == pair(psi(l, w->u), x)``.
    The output coefficient of v reads input coefficients at length
    ``|v| - spec.shift``, so when the switch lengthens words the output is only
    exact up to ``x.N + spec.shift`` and is truncated there.
    """
    _check_spec(x.d, spec)
    back = spec.reversed()
    N_out = x.N + min(0, spec.shift)
    if N_out < 0:
        raise ValueError("switch lengthens words beyond the stored truncation")
    A = x.d + 1
    levels = []
    for n in range(N_out + 1):
        arr = np.zeros(A**n)
        for v in words_of_length(n, x.d):
            acc = 0.0
            for w, k in psi_word(v, back.sources, back.targets):
                acc += k * x.levels[len(w)][word_index(w, x.d)]
            arr[word_index(v, x.d)] = acc
        levels.append(arr)
    return GroupTensor(x.d, N_out, tuple(levels))


def letter_count(v: Word, i: int) -> int:
    return sum(1 for c in v if c == i)


def lambda_op(l: TensorPoly, i: int) -> TensorPoly:
    return l.map_coefficients(lambda v: letter_count(v, i))


def j_op(l: TensorPoly, i: int, t: float) -> TensorPoly:
    if t < 0:
        raise ValueError("t must be non-negative")
    return l.map_coefficients(lambda v: math.exp(-letter_count(v, i) * t))


def _double(i: int) -> Word:
    return (i, i)


def ou_semigroup_adjoint(l: TensorPoly, kv: KappaVector) -> TensorPoly:
    """Adjoint of the OU semigroup acting on a functional.

    First the exponential of sum_i c_i * Psi^{ii}_0 with
    c_i = (1 - exp(-2 kappa_i theta)) / 2, then the diagonal damping
    exp(-sum_i kappa_i theta |v|_i).
    """
    d = l.d
    if len(kv.kappa) != d:
        raise DimensionMismatch(f"kappa has {len(kv.kappa)} entries, alphabet has d={d}")
    coeffs = [(1.0 - math.exp(-2.0 * k * kv.theta)) / 2.0 for k in kv.kappa]
    total = l
    term = l
    n = 0
    while True:
        n += 1
        nxt = TensorPoly.zero(d)
        for i, c in enumerate(coeffs, start=1):
            if c != 0.0:
                nxt = nxt + c * psi(term, SwitchSpec((_double(i),), ((0,),)))
        term = nxt / n
        if term.is_zero():
            break
        total = total + term
    rates = kv.kappa

    def damp(v: Word) -> float:
        return math.exp(-kv.theta * sum(rates[i - 1] * letter_count(v, i) for i in range(1, d + 1)))

    return total.map_coefficients(damp)


def ou_generator_adjoint(l: TensorPoly, kappa: Sequence[float]) -> TensorPoly:
    d = l.d
    if len(kappa) != d:
        raise DimensionMismatch(f"kappa has {len(kappa)} entries, alphabet has d={d}")
    out = TensorPoly.zero(d)
    for i, k in enumerate(kappa, start=1):
        if k:
            out = out + k * (psi(l, SwitchSpec((_double(i),), ((0,),))) - lambda_op(l, i))
    return out


def skorokhod_coeff(l: TensorPoly, i: int) -> TensorPoly:
    """Coefficient of the Skorokhod integral of <l, sig_t> in direction i."""
    if not 1 <= i <= l.d:
        raise ValueError(f"letter {i} is not a Brownian letter of alphabet 0..{l.d}")
    return shuffle(l, TensorPoly.letter(l.d, i)) - psi(l, SwitchSpec(((i,),), ((0,),)))


# ---------------------------------------------------------------------------
# diamond product


def diamond_direct(l: TensorPoly, lp: TensorPoly, u1: WordLike, u2: WordLike, k: WordLike,
                   max_level: int | None = None) -> TensorPoly:
    """Diamond product straight from its defining sum over decompositions.

    Kept as an independent reference; the production path is ``diamond_cdc``.
    """
    if l.d != lp.d:
        raise DimensionMismatch("alphabet mismatch")
    u1, u2, k = word(u1), word(u2), word(k)
    out: dict[Word, float] = defaultdict(float)
    L1, L2 = len(u1), len(u2)
    for v, a in l:
        cuts = [(v[:p], v[p + L1:]) for p in range(len(v) - L1 + 1) if v[p:p + L1] == u1]
        if not cuts:
            continue
        for vp, b in lp:
            if max_level is not None and len(v) + len(vp) - L1 - L2 + len(k) > max_level:
                continue
            ab = a * b
            for q in range(len(vp) - L2 + 1):
                if vp[q:q + L2] != u2:
                    continue
                w1, w2 = vp[:q], vp[q + L2:]
                for v1, v2 in cuts:
                    for s1, c1 in shuffle_words(v1, w1):
                        for s2, c2 in shuffle_words(v2, w2):
                            out[s1 + k + s2] += ab * c1 * c2
    return TensorPoly._raw(l.d, out, _min_exact(l.exact_to, lp.exact_to, max_level))


def diamond_cdc(l: TensorPoly, lp: TensorPoly, i: int, k: int = 0, max_level: int | None = None) -> TensorPoly:
    """Diamond product with u1 = u2 = (i) in carre-du-champ form."""
    if l.d != lp.d:
        raise DimensionMismatch("alphabet mismatch")
    if not 1 <= i <= l.d:
        raise ValueError(f"letter {i} is not a Brownian letter")
    spec = SwitchSpec(((i, i),), ((k,),))
    inner = None if max_level is None else max_level + 1
    a = psi(shuffle(l, lp, max_level=inner), spec)
    b = shuffle(psi(l, spec), lp, max_level=max_level)
    c = shuffle(l, psi(lp, spec), max_level=max_level)
    out = (a - b - c) * 0.5
    if max_level is not None:
        out = out.truncate(max_level)
        out.exact_to = _min_exact(l.exact_to, lp.exact_to, max_level)
    return out


def diamond(l: TensorPoly, lp: TensorPoly, u1: WordLike, u2: WordLike, k: WordLike,
            max_level: int | None = None) -> TensorPoly:
    u1, u2, k = word(u1), word(u2), word(k)
    if len(u1) == 1 and u1 == u2 and len(k) == 1 and u1[0] >= 1:
        return diamond_cdc(l, lp, u1[0], k[0], max_level=max_level)
    return diamond_direct(l, lp, u1, u2, k, max_level=max_level)


def diamond_vec(l: TensorPoly, h: CoeffVector, max_level: int | None = None) -> TensorPoly:
    """l diamond h = sum_i l diamond^{ii}_0 h_i."""
    if len(h) != l.d:
        raise DimensionMismatch(f"h has {len(h)} slots, alphabet has d={l.d}")
    out = TensorPoly.zero(l.d)
    for i, hi in enumerate(h, start=1):
        if hi.d != l.d:
            raise DimensionMismatch("alphabet mismatch in h")
        if not hi.is_zero():
            out = out + diamond_cdc(l, hi, i, 0, max_level=max_level)
    return out


def coeff_vector(d: int, *slots: TensorPoly | None) -> CoeffVector:
    """Build an h-vector; missing slots are zero functionals."""
    if len(slots) > d:
        raise DimensionMismatch(f"{len(slots)} slots for d={d}")
    full = list(slots) + [None] * (d - len(slots))
    return tuple(TensorPoly.zero(d) if s is None else s for s in full)

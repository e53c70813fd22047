"""Truncated free tensor algebra over the alphabet {0, 1, ..., d}.

Letter 0 is time, letters 1..d are the Brownian coordinates.  Words are plain
tuples of ints.  Linear functionals (finitely supported) are ``TensorPoly``;
signature-like elements of the extended tensor algebra, stored densely up to a
truncation level, are ``GroupTensor``.

Inside a level, the word ``(i_1, ..., i_n)`` sits at index
``i_1 * A**(n-1) + ... + i_n`` with ``A = d + 1``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import (
    DegreeExceedsTruncation,
    DimensionMismatch,
    NonzeroConstantTerm,
    NotGroupLike,
    TruncationMismatch,
)

Word = tuple[int, ...]
WordLike = Union[str, Sequence[int]]

EMPTY: Word = ()


def word(w: WordLike) -> Word:
    """Parse ``"0110"``, ``"e"`` (empty word) or a sequence of ints into a Word."""
    if isinstance(w, str):
        w = w.strip()
        if w in ("e", "", "∅"):
            return EMPTY
        return tuple(int(c) for c in w)
    return tuple(int(c) for c in w)


def word_str(w: Word) -> str:
    return "".join(str(c) for c in w) if w else "e"


def word_index(w: Word, d: int) -> int:
    idx = 0
    base = d + 1
    for c in w:
        idx = idx * base + c
    return idx


def words_of_length(n: int, d: int) -> Iterator[Word]:
    """All words of length n in lexicographic (= storage) order."""
    if n == 0:
        yield EMPTY
        return
    for head in words_of_length(n - 1, d):
        for c in range(d + 1):
            yield head + (c,)


def tensor_dim(d: int, N: int) -> int:
    """Number of words of length <= N over d + 1 letters."""
    A = d + 1
    return sum(A**n for n in range(N + 1))


def level_offsets(d: int, N: int) -> np.ndarray:
    A = d + 1
    return np.concatenate([[0], np.cumsum([A**n for n in range(N + 1)])]).astype(np.int64)


def _check_same_d(a, b) -> None:
    if a.d != b.d:
        raise DimensionMismatch(f"alphabet mismatch: d={a.d} vs d={b.d}")


def _min_exact(*levels: int | None) -> int | None:
    known = [lv for lv in levels if lv is not None]
    return min(known) if known else None


class TensorPoly:
    """Finitely supported coefficient functional on words over {0..d}.

    Zero coefficients are dropped eagerly (exact zero only).  ``exact_to`` is
    ``None`` for an exact functional; a level ``n`` means that only the words of
    length <= n are guaranteed to equal the intended (possibly infinite)
    series, e.g. after a ``max_level`` truncation.
    """

    __slots__ = ("d", "_terms", "degree", "exact_to")

    def __init__(self, d: int, terms: Mapping | Iterable | None = None, exact_to: int | None = None):
        if d < 0:
            raise ValueError("d must be non-negative")
        self.d = int(d)
        clean: dict[Word, float] = {}
        if terms is not None:
            items = terms.items() if isinstance(terms, Mapping) else terms
            for w, c in items:
                w = word(w)
                for letter in w:
                    if letter < 0 or letter > self.d:
                        raise DimensionMismatch(f"letter {letter} outside alphabet 0..{self.d}")
                c = float(c)
                if c != 0.0:
                    clean[w] = clean.get(w, 0.0) + c
            clean = {w: c for w, c in clean.items() if c != 0.0}
        self._terms = clean
        self.degree = max((len(w) for w in clean), default=0)
        self.exact_to = exact_to

    @classmethod
    def _raw(cls, d: int, terms: dict, exact_to: int | None = None) -> "TensorPoly":
        # trusted constructor: keys are valid Words, values may contain zeros
        out = cls.__new__(cls)
        out.d = d
        out._terms = {w: c for w, c in terms.items() if c != 0.0}
        out.degree = max((len(w) for w in out._terms), default=0)
        out.exact_to = exact_to
        return out

    @classmethod
    def zero(cls, d: int) -> "TensorPoly":
        return cls._raw(d, {})

    @classmethod
    def unit(cls, d: int, c: float = 1.0) -> "TensorPoly":
        return cls._raw(d, {EMPTY: float(c)})

    @classmethod
    def letter(cls, d: int, i: int, c: float = 1.0) -> "TensorPoly":
        return cls(d, {(i,): c})

    @classmethod
    def from_words(cls, d: int, **_: float) -> "TensorPoly":
        raise TypeError("use TensorPoly(d, {'01': 2.0, ...})")

    # -- mapping-ish access -------------------------------------------------
    @property
    def terms(self) -> Mapping[Word, float]:
        return MappingProxyType(self._terms)

    def __getitem__(self, w: WordLike) -> float:
        return self._terms.get(word(w), 0.0)

    def __iter__(self):
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    @property
    def const(self) -> float:
        return self._terms.get(EMPTY, 0.0)

    @property
    def min_length(self) -> int:
        return min((len(w) for w in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    # -- linear structure ---------------------------------------------------
    def __add__(self, other: "TensorPoly") -> "TensorPoly":
        if not isinstance(other, TensorPoly):
            return NotImplemented
        _check_same_d(self, other)
        out = dict(self._terms)
        for w, c in other._terms.items():
            out[w] = out.get(w, 0.0) + c
        return TensorPoly._raw(self.d, out, _min_exact(self.exact_to, other.exact_to))

    def __neg__(self) -> "TensorPoly":
        return TensorPoly._raw(self.d, {w: -c for w, c in self._terms.items()}, self.exact_to)

    def __sub__(self, other: "TensorPoly") -> "TensorPoly":
        if not isinstance(other, TensorPoly):
            return NotImplemented
        return self + (-other)

    def __mul__(self, s: float) -> "TensorPoly":
        if isinstance(s, TensorPoly):
            return NotImplemented
        s = float(s)
        return TensorPoly._raw(self.d, {w: c * s for w, c in self._terms.items()}, self.exact_to)

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> "TensorPoly":
        return self * (1.0 / float(s))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TensorPoly):
            return NotImplemented
        return self.d == other.d and self._terms == other._terms

    __hash__ = None  # type: ignore[assignment]

    def allclose(self, other: "TensorPoly", atol: float = 1e-12) -> bool:
        _check_same_d(self, other)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self[w] - other[w]) <= atol for w in keys)

    def truncate(self, N: int) -> "TensorPoly":
        kept = {w: c for w, c in self._terms.items() if len(w) <= N}
        exact = N if len(kept) < len(self._terms) else self.exact_to
        return TensorPoly._raw(self.d, kept, _min_exact(exact, self.exact_to))

    def map_coefficients(self, fn) -> "TensorPoly":
        """Diagonal operator: coefficient of v becomes fn(v) * coefficient."""
        return TensorPoly._raw(self.d, {w: fn(w) * c for w, c in self._terms.items()}, self.exact_to)

    # -- text form -----------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"{word_str(w)} {c!r}" for w, c in sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0]))]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, d: int) -> "TensorPoly":
        terms = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"expected 'word coefficient', got {raw!r}")
            terms.append((word(parts[0]), float(parts[1])))
        return cls(d, terms)

    def __repr__(self) -> str:
        if not self._terms:
            return f"TensorPoly(d={self.d}, 0)"
        body = " + ".join(f"{c:g}*{word_str(w)}" for w, c in sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0])))
        return f"TensorPoly(d={self.d}, {body})"


def poly(d: int, spec: Mapping[str, float] | str) -> TensorPoly:
    """Shorthand: ``poly(2, {"e": 0.25, "1": 0.04})`` or ``poly(1, "11")``."""
    if isinstance(spec, str):
        return TensorPoly(d, {word(spec): 1.0})
    return TensorPoly(d, {word(k): v for k, v in spec.items()})


# ---------------------------------------------------------------------------
# products on functionals


def concat(l: TensorPoly, p: TensorPoly, max_level: int | None = None) -> TensorPoly:
    """Bilinear concatenation of words."""
    _check_same_d(l, p)
    out: dict[Word, float] = defaultdict(float)
    for v, a in l._terms.items():
        for w, b in p._terms.items():
            if max_level is not None and len(v) + len(w) > max_level:
                continue
            out[v + w] += a * b
    return TensorPoly._raw(l.d, out, _min_exact(l.exact_to, p.exact_to, max_level))


@lru_cache(maxsize=1 << 18)
def shuffle_words(u: Word, v: Word) -> tuple[tuple[Word, int], ...]:
    """Shuffle of two words as (word, multiplicity) pairs."""
    if not u:
        return ((v, 1),)
    if not v:
        return ((u, 1),)
    acc: dict[Word, int] = defaultdict(int)
    a, b = u[-1], v[-1]
    for w, k in shuffle_words(u, v[:-1]):
        acc[w + (b,)] += k
    for w, k in shuffle_words(u[:-1], v):
        acc[w + (a,)] += k
    return tuple(acc.items())


def shuffle(l: TensorPoly, p: TensorPoly, max_level: int | None = None) -> TensorPoly:
    """Shuffle product, optionally keeping only words of length <= max_level."""
    _check_same_d(l, p)
    out: dict[Word, float] = defaultdict(float)
    for v, a in l._terms.items():
        for w, b in p._terms.items():
            if max_level is not None and len(v) + len(w) > max_level:
                continue
            ab = a * b
            for z, k in shuffle_words(v, w):
                out[z] += ab * k
    return TensorPoly._raw(l.d, out, _min_exact(l.exact_to, p.exact_to, max_level))


def shuffle_power(l: TensorPoly, n: int, max_level: int | None = None) -> TensorPoly:
    out = TensorPoly.unit(l.d)
    for _ in range(n):
        out = shuffle(out, l, max_level)
    return out


def shuffle_exp(l: TensorPoly, N: int) -> TensorPoly:
    """exp of the shuffle product truncated at level N.

    The constant term is factored out as a scalar exponential; the remaining
    series stops as soon as every word in the next shuffle power is longer
    than N.
    """
    c0 = l.const
    p = l - TensorPoly.unit(l.d, c0) if c0 else l
    total: dict[Word, float] = defaultdict(float)
    total[EMPTY] = 1.0
    if not p.is_zero():
        m = p.min_length
        term = TensorPoly.unit(l.d)
        n = 0
        while True:
            n += 1
            if m * n > N:
                break
            term = shuffle(term, p, max_level=N) / n
            if term.is_zero():
                break
            for w, c in term:
                total[w] += c
    scale = math.exp(c0)
    out = TensorPoly._raw(l.d, {w: scale * c for w, c in total.items()})
    # the result is an infinite series unless p is zero
    exact = None if p.is_zero() else N
    out.exact_to = _min_exact(exact, l.exact_to)
    return out


def right_projection(l: TensorPoly, i: int) -> TensorPoly:
    """Keep words ending in letter i and strip that letter: sum_v l^{vi} v."""
    out = {w[:-1]: c for w, c in l._terms.items() if w and w[-1] == i}
    exact = None if l.exact_to is None else l.exact_to - 1
    return TensorPoly._raw(l.d, out, exact)


# ---------------------------------------------------------------------------
# dense group-like tensors


@dataclass(frozen=True, eq=False)
class GroupTensor:
    """Element of the extended tensor algebra stored densely up to level N.

    ``levels[n]`` has (d+1)**n entries in lexicographic word order.  The level
    N is the maximal level at which the stored coefficients are exact.
    """

    d: int
    N: int
    levels: tuple

    def __post_init__(self):
        A = self.d + 1
        if len(self.levels) != self.N + 1:
            raise TruncationMismatch(f"expected {self.N + 1} levels, got {len(self.levels)}")
        frozen = []
        for n, arr in enumerate(self.levels):
            a = np.array(arr, dtype=np.float64).reshape(-1)
            if a.size != A**n:
                raise TruncationMismatch(f"level {n} must have {A**n} entries, got {a.size}")
            a.setflags(write=False)
            frozen.append(a)
        object.__setattr__(self, "levels", tuple(frozen))

    @classmethod
    def unit(cls, d: int, N: int) -> "GroupTensor":
        A = d + 1
        return cls(d, N, tuple([np.ones(1)] + [np.zeros(A**n) for n in range(1, N + 1)]))

    @classmethod
    def zeros(cls, d: int, N: int) -> "GroupTensor":
        A = d + 1
        return cls(d, N, tuple(np.zeros(A**n) for n in range(N + 1)))

    @classmethod
    def from_flat(cls, d: int, N: int, flat: np.ndarray) -> "GroupTensor":
        off = level_offsets(d, N)
        return cls(d, N, tuple(flat[off[n]:off[n + 1]] for n in range(N + 1)))

    @classmethod
    def from_poly(cls, l: TensorPoly, N: int) -> "GroupTensor":
        """Dense embedding of a functional; words longer than N are dropped."""
        A = l.d + 1
        levels = [np.zeros(A**n) for n in range(N + 1)]
        for w, c in l:
            if len(w) <= N:
                levels[len(w)][word_index(w, l.d)] += c
        return cls(l.d, N, tuple(levels))

    def flat(self) -> np.ndarray:
        return np.concatenate(self.levels)

    def __getitem__(self, w: WordLike) -> float:
        w = word(w)
        if len(w) > self.N:
            raise DegreeExceedsTruncation(f"word of length {len(w)} beyond truncation {self.N}")
        return float(self.levels[len(w)][word_index(w, self.d)])

    def truncate(self, N: int) -> "GroupTensor":
        if N > self.N:
            raise TruncationMismatch(f"cannot extend truncation from {self.N} to {N}")
        return GroupTensor(self.d, N, self.levels[: N + 1])

    def _check(self, other: "GroupTensor") -> None:
        _check_same_d(self, other)
        if self.N != other.N:
            raise TruncationMismatch(f"truncation mismatch: N={self.N} vs N={other.N}")

    def __add__(self, other: "GroupTensor") -> "GroupTensor":
        self._check(other)
        return GroupTensor(self.d, self.N, tuple(a + b for a, b in zip(self.levels, other.levels)))

    def __sub__(self, other: "GroupTensor") -> "GroupTensor":
        self._check(other)
        return GroupTensor(self.d, self.N, tuple(a - b for a, b in zip(self.levels, other.levels)))

    def __mul__(self, s: float) -> "GroupTensor":
        return GroupTensor(self.d, self.N, tuple(a * float(s) for a in self.levels))

    __rmul__ = __mul__

    def allclose(self, other: "GroupTensor", rtol: float = 1e-12, atol: float = 1e-12) -> bool:
        self._check(other)
        return all(np.allclose(a, b, rtol=rtol, atol=atol) for a, b in zip(self.levels, other.levels))

    def max_abs_diff(self, other: "GroupTensor") -> float:
        self._check(other)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.levels, other.levels))

    def __repr__(self) -> str:
        return f"GroupTensor(d={self.d}, N={self.N}, level1={self.levels[1] if self.N else []})"


def _mul_levels(x: Sequence[np.ndarray], y: Sequence[np.ndarray], N: int) -> list[np.ndarray]:
    out = []
    for n in range(N + 1):
        acc = np.multiply.outer(x[0], y[n]).reshape(-1)
        for k in range(1, n + 1):
            acc = acc + np.multiply.outer(x[k], y[n - k]).reshape(-1)
        out.append(acc)
    return out


def chen_product(x: GroupTensor, y: GroupTensor) -> GroupTensor:
    """Truncated tensor product; level n only uses levels <= n of the inputs."""
    x._check(y)
    return GroupTensor(x.d, x.N, tuple(_mul_levels(x.levels, y.levels, x.N)))


def group_inverse(x: GroupTensor) -> GroupTensor:
    if abs(x.levels[0][0] - 1.0) > 1e-12:
        raise NotGroupLike(f"level-0 coefficient is {x.levels[0][0]}, expected 1")
    y = [np.ones(1)]
    for n in range(1, x.N + 1):
        acc = -np.multiply.outer(x.levels[1], y[n - 1]).reshape(-1)
        for k in range(2, n + 1):
            acc = acc - np.multiply.outer(x.levels[k], y[n - k]).reshape(-1)
        y.append(acc)
    return GroupTensor(x.d, x.N, tuple(y))


def tensor_exp(l: TensorPoly, N: int) -> GroupTensor:
    """Tensor exponential sum_n l^{(x)n} / n! truncated at level N."""
    if l.const != 0.0:
        raise NonzeroConstantTerm(f"tensor exponential needs zero constant term, got {l.const}")
    x = GroupTensor.from_poly(l, N).levels
    unit = GroupTensor.unit(l.d, N).levels
    res = list(unit)
    # Horner: exp(x) = 1 + x(1 + x/2(1 + x/3(...)))
    for n in range(N, 0, -1):
        prod = _mul_levels(x, res, N)
        res = [u + p / n for u, p in zip(unit, prod)]
    return GroupTensor(l.d, N, tuple(res))


def pair(l: TensorPoly, x: GroupTensor) -> float:
    """Pairing <l, x> = sum_v l^v x^v."""
    _check_same_d(l, x)
    if l.degree > x.N:
        raise DegreeExceedsTruncation(
            f"functional of degree {l.degree} cannot be paired with a tensor truncated at N={x.N}"
        )
    total = 0.0
    for w, c in l:
        total += c * x.levels[len(w)][word_index(w, l.d)]
    return total

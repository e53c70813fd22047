"""Brownian path generation, batched signatures and Monte Carlo estimators.

Each path owns its random stream, seeded from ``SeedSequence(seed,
spawn_key=(index,))``, so any batch or ordering of paths reproduces the same
numbers.  With ``antithetic=True`` path 2k+1 is the mirror image of path 2k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import PathFunctionalError
from .path_signature import SampledPath, batch_signature
from .sig_operators import KappaVector, ou_semigroup_adjoint
from .tensor_algebra import GroupTensor, TensorPoly, level_offsets, tensor_dim, word_index


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 100_000
    n_steps: int = 500  # per unit of time
    T: float = 1.0
    N: int = 4
    seed: int = 2024
    antithetic: bool = False
    batch_size: int = 1000

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def steps(self) -> int:
        """Number of grid steps on [0, T]."""
        return max(2, math.ceil(self.n_steps * self.T - 1e-9))

    @property
    def dt(self) -> float:
        return self.T / self.steps


@dataclass(frozen=True)
class EstimatorResult:
    estimate: float
    std_error: float
    n_used: int
    running: tuple = ()  # (n, estimate, std_error) per checkpoint
    n_excluded: int = 0
    unstable: bool = False

    def within(self, target: float, k: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.estimate - target) <= k * self.std_error + floor


def default_checkpoints(n_max: int, count: int = 20, start: int = 100) -> list[int]:
    if n_max <= start:
        return [n_max]
    pts = np.unique(np.round(np.geomspace(start, n_max, count)).astype(np.int64))
    return [int(p) for p in pts]


def path_rng(seed: int, index: int, stream: int | None = None) -> np.random.Generator:
    key = (index,) if stream is None else (index, stream)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def brownian_increments(cfg: MCConfig, d: int, start: int, stop: int) -> np.ndarray:
    """dW for paths start..stop-1, shape (stop - start, steps, d)."""
    K = cfg.steps
    sq = math.sqrt(cfg.dt)
    out = np.empty((stop - start, K, d))
    for r, idx in enumerate(range(start, stop)):
        if cfg.antithetic:
            base = idx - (idx % 2)
            z = path_rng(cfg.seed, base).standard_normal((K, d))
            out[r] = -z * sq if idx % 2 else z * sq
        else:
            out[r] = path_rng(cfg.seed, idx).standard_normal((K, d)) * sq
    return out


def time_augment(dW: np.ndarray, dt: float) -> np.ndarray:
    P, K, _ = dW.shape
    return np.concatenate([np.full((P, K, 1), dt), dW], axis=2)


def simulate_brownian(cfg: MCConfig, d: int) -> Iterator[SampledPath]:
    """Stream of d-dimensional Brownian sample paths on the uniform grid."""
    times = np.linspace(0.0, cfg.T, cfg.steps + 1)
    for start in range(0, cfg.n_paths, cfg.batch_size):
        stop = min(cfg.n_paths, start + cfg.batch_size)
        dW = brownian_increments(cfg, d, start, stop)
        for inc in dW:
            vals = np.vstack([np.zeros((1, d)), np.cumsum(inc, axis=0)])
            yield SampledPath(times, vals)


def signature_batches(cfg: MCConfig, d: int, N: int | None = None) -> Iterator[tuple[int, np.ndarray]]:
    """(start index, flat signatures) for consecutive batches of paths."""
    N = cfg.N if N is None else N
    for start in range(0, cfg.n_paths, cfg.batch_size):
        stop = min(cfg.n_paths, start + cfg.batch_size)
        inc = time_augment(brownian_increments(cfg, d, start, stop), cfg.dt)
        yield start, batch_signature(inc, N)


def coefficient_matrix(polys: Sequence[TensorPoly], d: int, N: int) -> np.ndarray:
    """Dense (dim, len(polys)) matrix so that sigs @ M gives all pairings."""
    off = level_offsets(d, N)
    M = np.zeros((tensor_dim(d, N), len(polys)))
    for j, l in enumerate(polys):
        for w, c in l:
            if len(w) > N:
                raise ValueError(f"functional of degree {l.degree} exceeds level {N}")
            M[off[len(w)] + word_index(w, d), j] += c
    return M


def batch_pairings(polys: Sequence[TensorPoly], cfg: MCConfig, d: int, N: int | None = None) -> np.ndarray:
    """Matrix of <l_j, sig(path_p)>, shape (n_paths, len(polys))."""
    N = cfg.N if N is None else N
    M = coefficient_matrix(polys, d, N)
    out = np.empty((cfg.n_paths, len(polys)))
    for start, sigs in signature_batches(cfg, d, N):
        out[start:start + sigs.shape[0]] = sigs @ M
    return out


def summarize(values: np.ndarray, checkpoints: Sequence[int] | None = None, antithetic: bool = False,
              n_excluded: int = 0, unstable: bool = False) -> EstimatorResult:
    """Mean, standard error and running estimates of per-path samples.

    With antithetic sampling the error is computed from pair averages.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.size

    def stats(x: np.ndarray) -> tuple[float, float]:
        m = float(np.mean(x))
        if antithetic and x.size >= 4 and x.size % 2 == 0:
            pairs = 0.5 * (x[0::2] + x[1::2])
            se = float(np.std(pairs, ddof=1) / math.sqrt(pairs.size))
        elif x.size > 1:
            se = float(np.std(x, ddof=1) / math.sqrt(x.size))
        else:
            se = 0.0
        return m, se

    if n == 0:
        return EstimatorResult(float("nan"), float("nan"), 0, (), n_excluded, True)
    est, se = stats(values)
    if checkpoints is None:
        checkpoints = default_checkpoints(n)
    running = tuple((int(c),) + stats(values[:c]) for c in checkpoints if 0 < c <= n)
    return EstimatorResult(est, se, n, running, n_excluded, unstable)


def mc_expect(functional: Callable[[SampledPath], float], cfg: MCConfig, d: int = 1,
              checkpoints: Sequence[int] | None = None) -> EstimatorResult:
    """Plain Monte Carlo mean of a per-path functional."""
    vals = np.empty(cfg.n_paths)
    for idx, path in enumerate(simulate_brownian(cfg, d)):
        try:
            vals[idx] = functional(path)
        except Exception as exc:  # noqa: BLE001 - re-raised with the path index
            raise PathFunctionalError(idx, exc) from exc
    return summarize(vals, checkpoints, cfg.antithetic)


@dataclass(frozen=True)
class OUSplit:
    inner_mean: np.ndarray
    inner_se: np.ndarray
    operator_value: np.ndarray
    n_inner: int = field(default=0)


def ou_split_expectation(l: TensorPoly, kv: KappaVector, cfg: MCConfig, n_inner: int = 2000) -> OUSplit:
    """Inner Monte Carlo of E[<l, sig(B)> | W] next to <T*l, sig(W)>.

    B^i = exp(-kappa_i theta) W^i + sqrt(1 - exp(-2 kappa_i theta)) W_perp^i,
    with W_perp drawn from a per-outer-path stream independent of W.
    """
    d = l.d
    N = max(l.degree, 1)
    a = np.exp(-np.asarray(kv.kappa) * kv.theta)
    b = np.sqrt(1.0 - a**2)
    M_l = coefficient_matrix([l], d, N)[:, 0]
    M_op = coefficient_matrix([ou_semigroup_adjoint(l, kv)], d, N)[:, 0]
    K, dt = cfg.steps, cfg.dt
    sq = math.sqrt(dt)
    outer = brownian_increments(cfg, d, 0, cfg.n_paths)
    means = np.empty(cfg.n_paths)
    ses = np.empty(cfg.n_paths)
    ops = np.empty(cfg.n_paths)
    for p in range(cfg.n_paths):
        dW = outer[p]
        sigW = batch_signature(time_augment(dW[None], dt), N)[0]
        ops[p] = sigW @ M_op
        rng = path_rng(cfg.seed, p, stream=1)
        vals = np.empty(n_inner)
        for s in range(0, n_inner, cfg.batch_size):
            e = min(n_inner, s + cfg.batch_size)
            dperp = rng.standard_normal((e - s, K, d)) * sq
            dB = a * dW[None] + b * dperp
            vals[s:e] = batch_signature(time_augment(dB, dt), N) @ M_l
        means[p] = vals.mean()
        ses[p] = vals.std(ddof=1) / math.sqrt(n_inner)
    return OUSplit(means, ses, ops, n_inner)


def expected_signature_mc(cfg: MCConfig, d: int, N: int | None = None) -> tuple[GroupTensor, GroupTensor]:
    """Sample mean and standard error of every signature coefficient."""
    N = cfg.N if N is None else N
    dim = tensor_dim(d, N)
    s1 = np.zeros(dim)
    s2 = np.zeros(dim)
    for _, sigs in signature_batches(cfg, d, N):
        s1 += sigs.sum(axis=0)
        s2 += (sigs**2).sum(axis=0)
    n = cfg.n_paths
    mean = s1 / n
    var = np.maximum(s2 / n - mean**2, 0.0) * n / max(n - 1, 1)
    return GroupTensor.from_flat(d, N, mean), GroupTensor.from_flat(d, N, np.sqrt(var / n))

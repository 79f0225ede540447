"""Randomly weighted self-normalized sums ``psi = B^T A / ||A||``.

Sampling, empirical Kolmogorov/Wasserstein distances to the standard normal,
and the Berry-Esseen style bounds ``d_K <= 0.56 * xi3 * delta`` and
``d_W <= xi3 * delta`` with ``xi3 = E|B|^3`` and
``delta = sum_i E|A_i / ||A|| |^3``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr, ndtri

from .errors import DegenerateDenominator
from .preprocess import skew_adjust_matrix

DISTRIBUTIONS = ("gaussian", "bernoulli", "exponential", "exponential_log")
STANDARDIZATION = ("theoretical", "empirical")
BERRY_ESSEEN_K = 0.56
# replicates drawn from one child seed; fixed so output never depends on chunking
BLOCK = 1000


@dataclass
class RwsnsSampleSet:
    values: np.ndarray
    n: int
    b_dist: str
    a_dist: str
    seed: int
    standardization: str = "theoretical"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size < 1 or not np.all(np.isfinite(self.values)):
            raise ValueError("sample set needs at least one finite value")

    @property
    def m(self) -> int:
        return self.values.size


@dataclass
class DistanceReport:
    d_K: float | None = None
    d_W: float | None = None
    xi3: float | None = None
    delta: float | None = None
    bound_K: float | None = None
    bound_W: float | None = None
    m: int | None = None
    n: int | None = None

    def merged(self, other: "DistanceReport") -> "DistanceReport":
        vals = {k: v for k, v in vars(self).items()}
        for k, v in vars(other).items():
            if v is not None:
                vals[k] = v
        return DistanceReport(**vals)


def rwsns_statistic(B, A) -> float:
    B = np.asarray(B, dtype=float)
    A = np.asarray(A, dtype=float)
    norm = np.linalg.norm(A)
    if norm == 0:
        raise DegenerateDenominator("weight vector A is identically zero")
    return float(B @ A / norm)


@functools.lru_cache(maxsize=None)
def log_exponential_constants() -> tuple[float, float, float]:
    """(c, mean, sd) for ``log(E + c)`` with E ~ Exp(1) at zero skewness."""

    def moment(fn):
        return integrate.quad(lambda x: fn(x) * math.exp(-x), 0.0, math.inf, limit=200, epsabs=1e-13)[0]

    def stats(c):
        mu = moment(lambda x: math.log(x + c))
        m2 = moment(lambda x: (math.log(x + c) - mu) ** 2)
        m3 = moment(lambda x: (math.log(x + c) - mu) ** 3)
        return mu, m2, m3 / m2**1.5

    res = optimize.minimize_scalar(
        lambda lc: stats(math.exp(lc))[2] ** 2, bounds=(-8.0, 4.0), method="bounded",
        options={"xatol": 1e-10},
    )
    c = math.exp(res.x)
    mu, m2, _ = stats(c)
    return c, mu, math.sqrt(m2)


def draw(dist: str, rng: np.random.Generator, size, standardization: str = "theoretical") -> np.ndarray:
    """Draws with mean 0 and unit second moment.

    ``theoretical`` standardizes with the population moments; ``empirical``
    standardizes each row (the last axis) with its own sample moments, and
    for ``exponential_log`` also picks the log shift per row.
    """
    if dist not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {dist!r}; choose from {DISTRIBUTIONS}")
    if standardization not in STANDARDIZATION:
        raise ValueError(f"standardization must be one of {STANDARDIZATION}")
    if dist == "gaussian":
        x = rng.standard_normal(size)
    elif dist == "bernoulli":
        x = (rng.random(size) < 0.5).astype(float)
    else:
        x = rng.standard_exponential(size)

    if standardization == "theoretical":
        if dist == "bernoulli":
            return 2.0 * x - 1.0
        if dist == "exponential":
            return x - 1.0
        if dist == "exponential_log":
            c, mu, sd = log_exponential_constants()
            return (np.log(x + c) - mu) / sd
        return x

    x = np.atleast_2d(x)
    if dist == "exponential_log":
        x = skew_adjust_matrix(x.T)[0].T
    mu = x.mean(axis=-1, keepdims=True)
    sd = x.std(axis=-1, keepdims=True)
    sd = np.where(sd > 0, sd, 1.0)
    return ((x - mu) / sd).reshape(size)


def _block_rngs(seed: int, n_blocks: int):
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n_blocks)]


def sample_rwsns(b_dist, a_dist, n: int, m: int, seed: int, standardization="theoretical") -> RwsnsSampleSet:
    """``m`` independent draws of psi_n with fresh (B, A) per replicate."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    n_blocks = -(-m // BLOCK)
    out = np.empty(m)
    for b, rng in enumerate(_block_rngs(seed, n_blocks)):
        lo = b * BLOCK
        k = min(BLOCK, m - lo)
        B = draw(b_dist, rng, (k, n), standardization)
        A = draw(a_dist, rng, (k, n), standardization)
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            raise DegenerateDenominator("a weight vector A was identically zero")
        out[lo : lo + k] = np.einsum("ij,ij->i", B, A) / norms
    return RwsnsSampleSet(out, n, b_dist, a_dist, seed, standardization)


def _values(samples) -> np.ndarray:
    if isinstance(samples, RwsnsSampleSet):
        return samples.values
    return np.asarray(samples, dtype=float).ravel()


def empirical_distance(samples) -> DistanceReport:
    """Kolmogorov and quantile-matching Wasserstein distances to N(0, 1)."""
    x = np.sort(_values(samples))
    m = x.size
    if m < 1:
        raise ValueError("no samples")
    F = ndtr(x)
    i = np.arange(1, m + 1)
    d_k = float(np.max(np.maximum(np.abs(i / m - F), np.abs((i - 1) / m - F))))
    d_w = float(np.mean(np.abs(x - ndtri((i - 0.5) / m))))
    n = samples.n if isinstance(samples, RwsnsSampleSet) else None
    return DistanceReport(d_K=d_k, d_W=d_w, m=m, n=n)


def qq_pairs(samples) -> np.ndarray:
    """m x 2 array of (theoretical, empirical) quantiles."""
    x = np.sort(_values(samples))
    m = x.size
    return np.column_stack([ndtri((np.arange(1, m + 1) - 0.5) / m), x])


def tail_exceedance(samples, lam: float) -> tuple[float, float]:
    """Empirical P(|psi| > lam) and its binomial standard error."""
    x = _values(samples)
    prob = float(np.mean(np.abs(x) > lam))
    return prob, math.sqrt(max(prob * (1.0 - prob), 0.0) / x.size)


_XI3_EXACT = {
    "gaussian": 2.0 * math.sqrt(2.0 / math.pi),
    "bernoulli": 1.0,
    "exponential": 12.0 / math.e - 2.0,
}


def third_abs_moment(dist: str, mc_reps: int = 10**6, seed: int = 0) -> float:
    """E|B|^3 for the theoretically standardized distribution."""
    if dist in _XI3_EXACT:
        return _XI3_EXACT[dist]
    rng = np.random.default_rng(seed)
    return float(np.mean(np.abs(draw(dist, rng, mc_reps)) ** 3))


def lemma3_bounds(b_dist, a_dist, n: int, mc_reps: int = 10**6, seed: int = 0, delta_reps: int = 10**4) -> DistanceReport:
    """Assemble ``xi3``, ``delta`` and the two distance bounds.

    ``delta`` is averaged over ``delta_reps`` independent A vectors.
    """
    xi3 = third_abs_moment(b_dist, mc_reps, seed)
    rngs = _block_rngs(seed + 1, -(-delta_reps // BLOCK))
    total = 0.0
    for b, rng in enumerate(rngs):
        k = min(BLOCK, delta_reps - b * BLOCK)
        A = draw(a_dist, rng, (k, n))
        w = np.abs(A) / np.linalg.norm(A, axis=1, keepdims=True)
        total += float(np.sum(w**3))
    delta = total / delta_reps
    return DistanceReport(
        xi3=xi3,
        delta=delta,
        bound_K=BERRY_ESSEEN_K * xi3 * delta,
        bound_W=xi3 * delta,
        n=n,
    )

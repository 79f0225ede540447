"""Simulation campaigns for false/true positive counts.

Every replicate draws a fresh design and response from its own child seed,
``SeedSequence(seed, spawn_key=(r,))``, so results do not depend on how
replicates are scheduled.  Within a replicate the design is preprocessed once
and the FPC fit is repeated for each target.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CampaignFailure, FpcError, UnsupportedCorrelation
from .fpc import FpcSolution, FpcTarget, prepare, solve_fpc
from .glm import Dataset, Family
from .path import PathConfig

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.01


class ColumnDist(str, enum.Enum):
    GAUSSIAN = "gaussian"
    BINOMIAL = "binomial"
    EXPONENTIAL = "exponential"

    @classmethod
    def parse(cls, value) -> "ColumnDist":
        if isinstance(value, ColumnDist):
            return value
        key = str(value).lower()
        return cls({"bernoulli": "binomial"}.get(key, key))


@dataclass(frozen=True)
class DesignSpec:
    n: int
    p: int
    column_dist: ColumnDist = ColumnDist.GAUSSIAN
    noise_corr: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "column_dist", ColumnDist.parse(self.column_dist))
        if self.n < 2 or self.p < 1:
            raise ValueError("need n >= 2 and p >= 1")
        if not 0.0 <= self.noise_corr < 1.0:
            raise ValueError("noise_corr must lie in [0, 1)")
        if self.noise_corr > 0 and self.column_dist is not ColumnDist.GAUSSIAN:
            raise UnsupportedCorrelation(
                f"correlated null columns need gaussian columns, got {self.column_dist.value}"
            )


@dataclass(frozen=True)
class SignalSpec:
    k: int = 5
    beta_magnitude: float = 1.0

    def check(self, design: DesignSpec) -> None:
        if self.k < 0 or self.k > design.p or (self.k >= design.n and self.k > 0):
            raise ValueError(f"need 0 <= k <= p and k < n; got k={self.k}")

    def beta(self, p: int) -> np.ndarray:
        b = np.zeros(p)
        b[: self.k] = self.beta_magnitude
        return b


@dataclass(frozen=True)
class ResponseSpec:
    family: Family = Family.GAUSSIAN
    gaussian_sd: float = 1.0
    censor_fraction_target: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if self.family is Family.POISSON:
            raise ValueError("poisson responses are not simulated")
        if not 0.0 <= self.censor_fraction_target < 1.0:
            raise ValueError("censor_fraction_target must lie in [0, 1)")
        if self.gaussian_sd <= 0:
            raise ValueError("gaussian_sd must be positive")

    @property
    def censor_rate(self) -> float:
        # competing unit-rate exponentials: P(censor) = r / (1 + r)
        f = self.censor_fraction_target
        return f / (1.0 - f)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _draw_columns(dist: ColumnDist, rng, shape) -> np.ndarray:
    if dist is ColumnDist.GAUSSIAN:
        return rng.standard_normal(shape)
    if dist is ColumnDist.BINOMIAL:
        return (rng.random(shape) < 0.5).astype(float)
    return rng.standard_exponential(shape)


def gen_design(spec: DesignSpec, k: int = 0, seed=None) -> np.ndarray:
    """Raw n x p design; the first ``k`` columns form the signal block.

    The null block is equicorrelated at ``spec.noise_corr`` through one shared
    Gaussian factor and is independent of the signal block.
    """
    rng = _rng(spec.seed if seed is None else seed)
    n, p = spec.n, spec.p
    X = _draw_columns(spec.column_dist, rng, (n, p))
    rho = spec.noise_corr
    if rho > 0 and p > k:
        z0 = rng.standard_normal(n)
        X[:, k:] = math.sqrt(rho) * z0[:, None] + math.sqrt(1.0 - rho) * X[:, k:]
    return X


def gen_response(X, signal: SignalSpec, resp: ResponseSpec, seed):
    """Return ``(y, event)``; ``event`` is None except for the Cox family."""
    rng = _rng(seed)
    X = np.asarray(X, dtype=float)
    eta = X @ signal.beta(X.shape[1])
    if resp.family is Family.GAUSSIAN:
        return eta + resp.gaussian_sd * rng.standard_normal(eta.shape[0]), None
    if resp.family is Family.LOGISTIC:
        prob = 1.0 / (1.0 + np.exp(-eta))
        return (rng.random(eta.shape[0]) < prob).astype(float), None
    t_event = rng.standard_exponential(eta.shape[0]) / np.exp(eta)
    r = resp.censor_rate
    if r > 0:
        t_cens = rng.standard_exponential(eta.shape[0]) / r
    else:
        t_cens = np.full(eta.shape[0], np.inf)
    event = (t_event <= t_cens).astype(float)
    return np.minimum(t_event, t_cens), event


def replicate_seed(seed: int, r: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(r,))


def simulate_dataset(design: DesignSpec, signal: SignalSpec, resp: ResponseSpec, seed) -> tuple[Dataset, np.ndarray]:
    """Preprocessed dataset for one replicate plus the indices of kept raw columns."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_design, s_resp = ss.spawn(2)
    X = gen_design(design, signal.k, np.random.default_rng(s_design))
    raw = Dataset(X, np.zeros(design.n))
    ds, record = prepare(raw)
    kept = np.asarray(record.kept)
    # a dropped constant column shifts indices; keep the signal block aligned
    k_eff = int(np.count_nonzero(kept < signal.k))
    y, event = gen_response(ds.X, SignalSpec(k_eff, signal.beta_magnitude), resp, np.random.default_rng(s_resp))
    return Dataset(ds.X, y, event, ds.feature_names), kept


@dataclass
class SimCell:
    replicate: int
    target_fp: float
    p: int
    rho: float
    observed_fp: int = 0
    observed_tp: int = 0
    active_size: int = 0
    lambda_fpc_used: float = float("nan")
    lambda_classical: float = float("nan")
    target_above_max: bool = False
    failed: bool = False
    error: str = ""
    active: tuple[int, ...] = ()


@dataclass
class CellAggregate:
    p: int
    rho: float
    target_fp: float
    n_ok: int
    n_failed: int
    fp_mean: float
    fp_se: float
    fp_median: float
    fp_q1: float
    fp_q3: float
    tp_mean: float
    tp_se: float
    tp_median: float
    tp_q1: float
    tp_q3: float


@dataclass
class SimResult:
    cells: list[SimCell]
    aggregates: list[CellAggregate]
    meta: dict = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(c.failed for c in self.cells)

    def aggregate(self, target_fp: float, p: int | None = None, rho: float | None = None) -> CellAggregate:
        for a in self.aggregates:
            if a.target_fp == target_fp and (p is None or a.p == p) and (rho is None or a.rho == rho):
                return a
        raise KeyError((target_fp, p, rho))

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "aggregates": [asdict(a) for a in self.aggregates],
            "cells": [_cell_dict(c) for c in self.cells],
        }


def _cell_dict(c: SimCell) -> dict:
    d = asdict(c)
    d["active"] = list(c.active)
    return d


def _summary(v: np.ndarray):
    if v.size == 0:
        nan = float("nan")
        return nan, nan, nan, nan, nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return float(v.mean()), se, float(med), float(q1), float(q3)


def aggregate_cells(cells: list[SimCell]) -> list[CellAggregate]:
    keys = sorted({(c.p, c.rho, c.target_fp) for c in cells})
    out = []
    for p, rho, t in keys:
        group = [c for c in cells if (c.p, c.rho, c.target_fp) == (p, rho, t)]
        ok = [c for c in group if not c.failed]
        fp = _summary(np.array([c.observed_fp for c in ok], dtype=float))
        tp = _summary(np.array([c.observed_tp for c in ok], dtype=float))
        out.append(CellAggregate(p, rho, t, len(ok), len(group) - len(ok), *fp, *tp))
    return out


def _count(active, kept, k) -> tuple[int, int, tuple[int, ...]]:
    orig = tuple(int(kept[j]) for j in active)
    tp = sum(1 for j in orig if j < k)
    return len(orig) - tp, tp, orig


def _run_replicate(args) -> list[SimCell]:
    design, signal, resp, targets, config, r = args
    base = dict(replicate=r, p=design.p, rho=design.noise_corr)
    try:
        ds, kept = simulate_dataset(design, signal, resp, replicate_seed(design.seed, r))
    except FpcError as exc:
        return [SimCell(target_fp=t, failed=True, error=f"{type(exc).__name__}: {exc}", **base) for t in targets]
    cells = []
    for t in targets:
        try:
            sol = solve_fpc(ds, resp.family, FpcTarget(expected_fp=t), config, standardize=False)
        except FpcError as exc:
            cells.append(SimCell(target_fp=t, failed=True, error=f"{type(exc).__name__}: {exc}", **base))
            continue
        fp, tp, orig = _count(sol.active_set, kept, signal.k)
        cells.append(
            SimCell(
                target_fp=t,
                observed_fp=fp,
                observed_tp=tp,
                active_size=len(orig),
                lambda_fpc_used=sol.lambda_fpc,
                lambda_classical=sol.lambda_classical,
                target_above_max=sol.target_above_max,
                active=orig,
                **base,
            )
        )
    return cells


def _map(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * threads))))


def _finish(cells: list[SimCell], meta: dict) -> SimResult:
    result = SimResult(cells, aggregate_cells(cells), meta)
    if cells and result.n_failed > MAX_FAILURE_RATE * len(cells):
        err = CampaignFailure(f"{result.n_failed} of {len(cells)} cells failed")
        err.result = result
        raise err
    if result.n_failed:
        log.warning("%d of %d cells failed and were excluded", result.n_failed, len(cells))
    return result


def run_fp_experiment(
    design: DesignSpec,
    signal: SignalSpec,
    resp: ResponseSpec,
    targets,
    replicates: int,
    config: PathConfig | None = None,
    *,
    threads: int = 1,
) -> SimResult:
    """FP/TP counts per replicate and target; the campaign seed is ``design.seed``."""
    signal.check(design)
    targets = [float(t) for t in targets]
    for t in targets:
        if not 0.0 < t < design.p:
            raise ValueError(f"target {t} outside (0, p)")
    if replicates < 1:
        raise ValueError("replicates must be positive")
    jobs = [(design, signal, resp, targets, config, r) for r in range(replicates)]
    cells = [c for chunk in _map(_run_replicate, jobs, threads) for c in chunk]
    meta = {
        "design": {**asdict(design), "column_dist": design.column_dist.value},
        "signal": asdict(signal),
        "response": {**asdict(resp), "family": resp.family.value},
        "targets": targets,
        "replicates": replicates,
    }
    return _finish(cells, meta)


def run_corr_experiment(
    rho_list,
    target_fp,
    design: DesignSpec,
    signal: SignalSpec,
    resp: ResponseSpec,
    replicates: int,
    config: PathConfig | None = None,
    *,
    threads: int = 1,
) -> SimResult:
    """FP experiment repeated over null-block correlations with matched seeds."""
    targets = [target_fp] if np.isscalar(target_fp) else list(target_fp)
    cells, metas = [], []
    for rho in rho_list:
        d = DesignSpec(design.n, design.p, design.column_dist, float(rho), design.seed)
        res = run_fp_experiment(d, signal, resp, targets, replicates, config, threads=threads)
        cells.extend(res.cells)
        metas.append(res.meta)
    return _finish(cells, {"runs": metas, "rho": [float(r) for r in rho_list]})


def run_tp_experiment(
    design: DesignSpec,
    signal: SignalSpec,
    resp: ResponseSpec,
    targets,
    replicates: int,
    config: PathConfig | None = None,
    *,
    threads: int = 1,
) -> SimResult:
    """Same campaign as :func:`run_fp_experiment`; read the TP aggregates."""
    return run_fp_experiment(design, signal, resp, targets, replicates, config, threads=threads)


def nesting_fraction(result: SimResult, small_target: float, large_target: float) -> float:
    """Share of replicates whose active set at the smaller target is contained
    in the one at the larger target."""
    by_rep: dict[tuple, dict[float, SimCell]] = {}
    for c in result.cells:
        by_rep.setdefault((c.p, c.rho, c.replicate), {})[c.target_fp] = c
    hits = total = 0
    for cells in by_rep.values():
        a, b = cells.get(small_target), cells.get(large_target)
        if a is None or b is None or a.failed or b.failed:
            continue
        total += 1
        hits += set(a.active) <= set(b.active)
    return hits / total if total else float("nan")


def merge_results(results: list[SimResult], meta: dict | None = None) -> SimResult:
    cells = [c for r in results for c in r.cells]
    return SimResult(cells, aggregate_cells(cells), meta or {"runs": [r.meta for r in results]})


def post_hoc_fdr(solution: FpcSolution) -> float:
    """Expected false positives over the active-set size, capped at one."""
    size = len(solution.active_set)
    if size == 0:
        return 0.0
    return min(1.0, solution.fp_bound / size)

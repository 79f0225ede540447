"""False positive control lasso.

The FPC penalty ``lambda_fpc`` acts on the self-normalized gradient
``X^T eps / ||eps||``, so a classical lasso solution at ``lambda`` is also the
FPC solution at ``lambda / ||eps_lambda||``.  :func:`solve_fpc` finds the
classical penalty whose normalized value matches a target by repeatedly
fitting short classical paths and narrowing the bracket around the match.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import glm
from .errors import (
    DegenerateResponse,
    NonConvergence,
    OutOfRange,
    RegularityViolation,
    SaturatedFit,
)
from .glm import Coefficients, Dataset, Family
from .path import KktReport, LassoPath, PathConfig, _kkt_from_residual, fit_path, lambda_max
from .preprocess import ColumnRecord, PreprocessRecord, preprocess

log = logging.getLogger(__name__)


def fp_to_lambda(fp: float, p: int) -> float:
    """Penalty bounding the expected false positives by ``fp`` among ``p``."""
    fp = float(fp)
    if not (0.0 < fp < 2.0 * p):
        raise OutOfRange(f"expected false positives must lie in (0, 2p) = (0, {2 * p}); got {fp}")
    # upper-tail form keeps full precision when fp / 2p is tiny
    return float(-ndtri(fp / (2.0 * p)))


def lambda_to_fp(lam: float, p: int) -> float:
    return float(2.0 * p * ndtr(-lam))


@dataclass(frozen=True)
class FpcTarget:
    expected_fp: float | None = None
    lambda_fpc: float | None = None

    def __post_init__(self):
        if (self.expected_fp is None) == (self.lambda_fpc is None):
            raise ValueError("give exactly one of expected_fp or lambda_fpc")
        if self.expected_fp is not None and not self.expected_fp > 0:
            raise OutOfRange("expected_fp must be positive")
        if self.lambda_fpc is not None and not self.lambda_fpc > 0:
            raise OutOfRange("lambda_fpc must be positive")

    def resolve(self, p: int) -> float:
        if self.lambda_fpc is not None:
            return float(self.lambda_fpc)
        lam = fp_to_lambda(self.expected_fp, p)
        if lam <= 0:
            # fp >= p maps to a non-positive penalty, which no fit can use
            raise OutOfRange(f"expected_fp must be below p={p} to give a positive penalty; got {self.expected_fp}")
        return lam


@dataclass
class RegularityDiagnostic:
    lambda_pairs: list[tuple[float, float]]
    n_violations: int
    max_violation_magnitude: float
    monotone: bool


def regularity_check(path: LassoPath | None = None, *, lambdas=None, lambda_fpc=None, rtol=1e-10):
    """Count places where the normalized penalty fails to increase with lambda."""
    if path is not None:
        lambdas, lambda_fpc = path.lambdas, path.lambda_fpc
    lam = np.asarray(lambdas, dtype=float)
    lf = np.asarray(lambda_fpc, dtype=float)
    order = np.argsort(lam)
    lam, lf = lam[order], lf[order]
    drops = lf[:-1] - lf[1:]  # positive where the mapping decreases
    bad = drops > rtol * np.abs(lf[:-1])
    n_bad = int(np.count_nonzero(bad))
    mag = float(np.max(drops[bad])) if n_bad else 0.0
    pairs = [(float(a), float(b)) for a, b in zip(lam[::-1], lf[::-1])]
    return RegularityDiagnostic(pairs, n_bad, mag, n_bad == 0)


def fpc_kkt_check(dataset: Dataset, family: Family, coef: Coefficients, lambda_fpc: float) -> KktReport:
    """KKT report for the self-normalized gradient at ``lambda_fpc``."""
    family = Family.parse(family)
    eps = glm.raw_residual(family, dataset, coef)
    return _kkt_from_residual(dataset.X, eps / np.linalg.norm(eps), coef.beta, lambda_fpc, False)


@dataclass
class FpcSolution:
    coef: Coefficients
    lambda_fpc: float
    lambda_classical: float
    residual_norm: float
    active_set: list[int]
    fp_bound: float
    preprocessing: PreprocessRecord
    target_lambda_fpc: float
    target_above_max: bool = False
    iterations: int = 0
    lambda_max: float = float("nan")
    data: Dataset | None = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return self.coef.beta.shape[0]


def _identity_record(dataset: Dataset) -> PreprocessRecord:
    names = dataset.feature_names or [f"x{j}" for j in range(dataset.p)]
    return PreprocessRecord([ColumnRecord(name=str(n)) for n in names])


def prepare(dataset: Dataset, *, standardize=True, skew=True) -> tuple[Dataset, PreprocessRecord]:
    """Skew-adjust and standardize the design, dropping constant columns."""
    if not standardize:
        return dataset, _identity_record(dataset)
    Z, record = preprocess(dataset.X, dataset.feature_names, skew=skew)
    if Z.shape[1] == 0:
        raise DegenerateResponse("every feature column is constant")
    names = tuple(record.columns[j].name for j in record.kept)
    return dataset.with_X(Z, names), record


def solve_fpc(
    dataset: Dataset,
    family: Family,
    target: FpcTarget,
    config: PathConfig | None = None,
    *,
    standardize: bool = True,
    skew: bool = True,
    tol_match: float = 1e-8,
    max_outer: int = 100,
) -> FpcSolution:
    """Classical-path search for the lasso solution at a target FPC penalty.

    Each pass fits ``config.n_lambda`` log-spaced penalties between the current
    bracket ends and stops at the first point whose normalized penalty falls
    below the target.  The bracket then shrinks to the two grid points around
    that crossing.  Ties in distance go to the larger penalty.
    """
    family = Family.parse(family)
    config = config or PathConfig()
    ds, record = prepare(dataset, standardize=standardize, skew=skew)
    p = ds.p
    lam_t = target.resolve(p)

    lmax = lambda_max(ds, family)
    if lmax <= 0:
        raise DegenerateResponse("response is constant; lambda_max is zero")
    c0 = glm.intercept_only(family, ds)
    rn0 = float(np.linalg.norm(glm.raw_residual(family, ds, c0)))
    empty_level = lmax / rn0

    def solution(coef, lam, rn, it, above=False):
        lf = lam / rn
        return FpcSolution(
            coef=coef,
            lambda_fpc=lf,
            lambda_classical=lam,
            residual_norm=rn,
            active_set=coef.active_set,
            fp_bound=lambda_to_fp(lf, p),
            preprocessing=record,
            target_lambda_fpc=lam_t,
            target_above_max=above,
            iterations=it,
            lambda_max=lmax,
            data=ds,
        )

    if lam_t >= empty_level:
        # any classical penalty >= lambda_max gives the empty model
        return solution(c0, lam_t * rn0, rn0, 0, above=True)

    hi, lo = lmax, config.min_ratio * lmax
    init = c0
    pairs_l, pairs_f = [], []
    for it in range(1, max_outer + 1):
        grid = np.geomspace(hi, lo, config.n_lambda)
        path = fit_path(ds, family, config, grid, init=init, fpc_floor=lam_t)
        pairs_l.extend(path.lambdas)
        pairs_f.extend(path.lambda_fpc)
        lf = path.lambda_fpc
        d2 = (lf - lam_t) ** 2
        k = int(np.argmin(d2))
        if d2[k] < tol_match:
            return solution(path.coef(k), path.lambdas[k], path.residual_norms[k], it)
        below = np.flatnonzero(lf <= lam_t)
        if below.size == 0:
            if path.saturated:
                raise SaturatedFit(f"fit saturated before reaching lambda_fpc={lam_t:.6g}")
            hi = path.lambdas[-1]
            lo = config.min_ratio * hi
            init = path.coef(len(path) - 1)
            continue
        i = int(below[0])
        if i == 0:
            diag = regularity_check(lambdas=pairs_l, lambda_fpc=pairs_f)
            raise RegularityViolation("normalized penalty is not monotone at the bracket top", diag)
        new_hi, new_lo = path.lambdas[i - 1], path.lambdas[i]
        if new_hi - new_lo < 1e-12 * lmax:
            diag = regularity_check(lambdas=pairs_l, lambda_fpc=pairs_f)
            raise RegularityViolation(
                f"bracket collapsed with lambda_fpc gap {np.sqrt(d2[k]):.3g}; mapping is not invertible here",
                diag,
            )
        hi, lo = new_hi, new_lo
        init = path.coef(i - 1)
    raise NonConvergence(lam_t, max_outer, f"FPC search did not converge in {max_outer} passes")

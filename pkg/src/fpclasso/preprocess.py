"""Column preprocessing: log skew reduction, standardization and PCA.

Skew reduction replaces a column by ``log(x + c)`` with the shift ``c``
chosen to minimize the squared sample skewness.  The search runs on all
columns at once: a coarse log-spaced scan over the offset above ``-min(x)``
locates a bracket, then golden-section search refines ``c`` inside it.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateColumn

# offsets above -min(x), in units of the column range
_OFFSET_LO = 1e-6
_OFFSET_HI = 1e6
_SCAN_POINTS = 57
_GOLDEN_TOL = 1e-8
_GOLDEN_MAX_ITER = 300
# smaller gains are the c -> inf (linear) limit and only cost precision
_MIN_REL_GAIN = 1e-6
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def skewness(x, axis=0):
    """Population skewness (third standardized moment)."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean(axis=axis, keepdims=True)
    d2 = d * d
    m2 = np.mean(d2, axis=axis)
    m3 = np.mean(d2 * d, axis=axis)
    with np.errstate(invalid="ignore", divide="ignore"):
        return m3 / (m2 * np.sqrt(m2))


def _n_distinct_at_least(X, k):
    Xs = np.sort(X, axis=0)
    return (np.count_nonzero(np.diff(Xs, axis=0), axis=0) + 1) >= k


def _log_skew_sq(X, shifts):
    return skewness(np.log(X + shifts[None, :])) ** 2


def _search_shifts(X):
    """Minimizing shift c for every column of X (columns must be eligible)."""
    lo = X.min(axis=0)
    rng = X.max(axis=0) - lo
    exps = np.linspace(np.log10(_OFFSET_LO), np.log10(_OFFSET_HI), _SCAN_POINTS)
    offsets = rng[None, :] * 10.0 ** exps[:, None]  # scan x columns
    vals = np.empty_like(offsets)
    for i in range(_SCAN_POINTS):
        vals[i] = _log_skew_sq(X, offsets[i] - lo)
    vals = np.where(np.isfinite(vals), vals, np.inf)
    best = np.argmin(vals, axis=0)
    cols = np.arange(X.shape[1])
    a = offsets[np.maximum(best - 1, 0), cols] - lo
    b = offsets[np.minimum(best + 1, _SCAN_POINTS - 1), cols] - lo

    c1 = b - _INVPHI * (b - a)
    c2 = a + _INVPHI * (b - a)
    f1 = _log_skew_sq(X, c1)
    f2 = _log_skew_sq(X, c2)
    for _ in range(_GOLDEN_MAX_ITER):
        if np.all(b - a < _GOLDEN_TOL):
            break
        left = f1 < f2
        # minimum in [a, c2] where left, else in [c1, b]
        b = np.where(left, c2, b)
        a = np.where(left, a, c1)
        nc1 = np.where(left, b - _INVPHI * (b - a), c2)
        nc2 = np.where(left, c1, a + _INVPHI * (b - a))
        nf1 = np.where(left, np.nan, f2)
        nf2 = np.where(left, f1, np.nan)
        need1 = left
        need2 = ~left
        if need1.any():
            nf1[need1] = _log_skew_sq(X[:, need1], nc1[need1])
        if need2.any():
            nf2[need2] = _log_skew_sq(X[:, need2], nc2[need2])
        c1, c2, f1, f2 = nc1, nc2, nf1, nf2
    c = 0.5 * (a + b)
    fc = _log_skew_sq(X, c)
    # the scan grid point itself may beat the refined interior point
    grid_c = offsets[best, cols] - lo
    grid_f = vals[best, cols]
    use_grid = grid_f < fc
    return np.where(use_grid, grid_c, c), np.where(use_grid, grid_f, fc)


def skew_adjust_matrix(X):
    """Skew-adjust every eligible column.

    Returns (X_out, shifts, skew_before, skew_after) with ``shifts[j]`` NaN
    where the column was left alone.
    """
    X = np.asarray(X, dtype=float)
    out = X.copy()
    p = X.shape[1]
    shifts = np.full(p, np.nan)
    before = skewness(X)
    after = before.copy()
    var = X.var(axis=0)
    eligible = (var > 0) & _n_distinct_at_least(X, 3) & np.isfinite(before)
    if eligible.any():
        idx = np.flatnonzero(eligible)
        c, fmin = _search_shifts(X[:, idx])
        improve = fmin < (1.0 - _MIN_REL_GAIN) * before[idx] ** 2
        for j, cj, ok in zip(idx, c, improve):
            if ok:
                out[:, j] = np.log(X[:, j] + cj)
                shifts[j] = cj
                after[j] = skewness(out[:, j])
    return out, shifts, before, after


def skew_adjust(column):
    """Log-transform a single column to minimize squared skewness.

    Returns ``(column_out, shift)`` with ``shift`` None when no transform
    helped or the column has fewer than three distinct values.
    """
    x = np.asarray(column, dtype=float).ravel()
    if x.size < 2 or np.ptp(x) == 0:
        raise DegenerateColumn("constant column")
    out, shifts, _, _ = skew_adjust_matrix(x[:, None])
    shift = None if np.isnan(shifts[0]) else float(shifts[0])
    return out[:, 0], shift


def standardize(column):
    """Center to mean 0 and scale to population standard deviation 1."""
    x = np.asarray(column, dtype=float).ravel()
    mean = float(x.mean())
    scale = float(x.std())
    if not scale > 0:
        raise DegenerateColumn("zero-variance column")
    return (x - mean) / scale, mean, scale


@dataclass
class ColumnRecord:
    name: str
    shift: float | None = None
    mean: float = 0.0
    scale: float = 1.0
    skew_before: float | None = None
    skew_after: float | None = None
    transform_applied: bool = False
    dropped: bool = False


@dataclass
class PreprocessRecord:
    columns: list[ColumnRecord] = field(default_factory=list)

    @property
    def kept(self) -> list[int]:
        return [j for j, c in enumerate(self.columns) if not c.dropped]

    def transform(self, X_raw) -> np.ndarray:
        """Apply the recorded transforms to new raw data (kept columns only)."""
        X_raw = np.asarray(X_raw, dtype=float)
        cols = []
        for j in self.kept:
            c = self.columns[j]
            x = X_raw[:, j]
            if c.transform_applied:
                x = np.log(x + c.shift)
            cols.append((x - c.mean) / c.scale)
        return np.column_stack(cols) if cols else np.empty((X_raw.shape[0], 0))

    def unstandardize(self, intercept: float, beta) -> tuple[float, np.ndarray]:
        """Map coefficients on standardized columns to the (possibly logged)
        unstandardized columns; returns full-length beta with zeros for
        dropped columns."""
        beta = np.asarray(beta, dtype=float)
        full = np.zeros(len(self.columns))
        b0 = float(intercept)
        for k, j in enumerate(self.kept):
            c = self.columns[j]
            full[j] = beta[k] / c.scale
            b0 -= beta[k] * c.mean / c.scale
        return b0, full

    def linear_predictor(self, X_raw, intercept: float, full_beta) -> np.ndarray:
        """Linear predictor on raw inputs from :meth:`unstandardize` output."""
        X_raw = np.asarray(X_raw, dtype=float)
        eta = np.full(X_raw.shape[0], float(intercept))
        for j, c in enumerate(self.columns):
            if c.dropped or full_beta[j] == 0:
                continue
            x = X_raw[:, j]
            if c.transform_applied:
                x = np.log(x + c.shift)
            eta += full_beta[j] * x
        return eta

    def to_dict(self) -> dict:
        return {"columns": [asdict(c) for c in self.columns]}

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessRecord":
        return cls([ColumnRecord(**c) for c in d["columns"]])


def preprocess(X, names=None, skew=True) -> tuple[np.ndarray, PreprocessRecord]:
    """Skew-adjust (optionally) and standardize every column of X.

    Constant columns are dropped and flagged in the record.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    if skew:
        Xt, shifts, before, after = skew_adjust_matrix(X)
    else:
        Xt, shifts = X, np.full(p, np.nan)
        before = after = skewness(X)
    means = Xt.mean(axis=0)
    scales = Xt.std(axis=0)
    records = []
    for j in range(p):
        rec = ColumnRecord(
            name=str(names[j]),
            skew_before=_finite_or_none(before[j]),
            skew_after=_finite_or_none(after[j]),
        )
        if not np.isnan(shifts[j]):
            rec.shift = float(shifts[j])
            rec.transform_applied = True
        if not scales[j] > 0 or np.ptp(X[:, j]) == 0:
            rec.dropped = True
        else:
            rec.mean = float(means[j])
            rec.scale = float(scales[j])
        records.append(rec)
    record = PreprocessRecord(records)
    kept = record.kept
    Z = (Xt[:, kept] - means[kept]) / scales[kept]
    return Z, record


def _finite_or_none(v):
    v = float(v)
    return v if np.isfinite(v) else None


def orthogonalize_pca(X, rtol=1e-10):
    """Principal component scores of a column-centered matrix.

    Returns ``(scores, loadings)`` with ``scores = X @ loadings``; columns are
    mutually orthogonal and ordered by decreasing variance.  Rank-deficient
    input yields only the numerically non-zero components.
    """
    X = np.asarray(X, dtype=float)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    if rank < min(X.shape):
        warnings.warn(f"rank-deficient design: keeping {rank} of {min(X.shape)} components", stacklevel=2)
    return U[:, :rank] * s[:rank], Vt[:rank].T

"""Response families, losses, raw residuals and gradients.

Every loss is in sum form (no 1/n factor) and every gradient has the shape
``-X.T @ eps`` where ``eps`` is the family's raw residual.  For the Cox model
the residual is the Breslow martingale residual.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalOverflow, UnsupportedFamily

ETA_CLAMP = 30.0


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LOGISTIC = "logistic"
    POISSON = "poisson"
    COX = "cox"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, Family):
            return value
        aliases = {"binomial": "logistic", "coxph": "cox", "survival": "cox"}
        key = str(value).lower()
        return cls(aliases.get(key, key))

    @property
    def has_intercept(self) -> bool:
        return self is not Family.COX


@dataclass(frozen=True)
class Dataset:
    """Design matrix plus response.

    For the Cox family ``y`` holds the observed times and ``event`` the 0/1
    event indicators; ``event`` is ignored for the other families.
    """

    X: np.ndarray
    y: np.ndarray
    event: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        n, p = X.shape
        if n < 2 or p < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape[0] != n:
            raise ValueError(f"y has {y.shape[0]} entries but X has {n} rows")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains missing or non-finite values")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains missing or non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.event is not None:
            event = np.asarray(self.event, dtype=float).ravel()
            if event.shape[0] != n:
                raise ValueError("event vector length does not match X")
            object.__setattr__(self, "event", event)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def with_X(self, X: np.ndarray, feature_names=None) -> "Dataset":
        return Dataset(X, self.y, self.event, feature_names)


@dataclass
class Coefficients:
    intercept: float
    beta: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        self.intercept = float(self.intercept)

    @classmethod
    def zeros(cls, p: int, intercept: float = 0.0) -> "Coefficients":
        return cls(intercept, np.zeros(p))

    def copy(self) -> "Coefficients":
        return Coefficients(self.intercept, self.beta.copy())

    @property
    def active_set(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.beta)]


def validate_response(family: Family, dataset: Dataset) -> None:
    """Check the response against the family's domain."""
    y = dataset.y
    if family is Family.LOGISTIC:
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("logistic response must be 0/1")
    elif family is Family.POISSON:
        if np.any(y < 0) or not np.all(y == np.round(y)):
            raise ValueError("poisson response must be non-negative integers")
    elif family is Family.COX:
        if dataset.event is None:
            raise ValueError("cox family requires event indicators")
        if np.any(y <= 0):
            raise ValueError("survival times must be positive")
        if not np.all((dataset.event == 0) | (dataset.event == 1)):
            raise ValueError("event indicators must be 0/1")


def _clamp(eta):
    return np.clip(eta, -ETA_CLAMP, ETA_CLAMP)


def link_mean(family: Family, eta) -> np.ndarray:
    family = Family.parse(family)
    eta = np.asarray(eta, dtype=float)
    if family is Family.GAUSSIAN:
        return eta.copy()
    if family is Family.LOGISTIC:
        return 1.0 / (1.0 + np.exp(-_clamp(eta)))
    if family is Family.POISSON:
        return np.exp(_clamp(eta))
    raise UnsupportedFamily("the Cox model has no mean function")


def linear_predictor(family: Family, dataset: Dataset, coef: Coefficients) -> np.ndarray:
    if coef.beta.shape[0] != dataset.p:
        raise ValueError(f"coefficient length {coef.beta.shape[0]} != p={dataset.p}")
    with np.errstate(over="ignore", invalid="ignore"):
        eta = dataset.X @ coef.beta
    if family.has_intercept:
        eta = eta + coef.intercept
    if not np.all(np.isfinite(eta)):
        raise NumericalOverflow("non-finite linear predictor")
    return eta


# -- Cox (Breslow) helpers --------------------------------------------------


@dataclass(frozen=True)
class _RiskSets:
    order: np.ndarray  # ascending time
    first: np.ndarray  # in sorted coordinates: first index of each row's tie group
    last: np.ndarray  # in sorted coordinates: last index of each row's tie group


def _risk_sets(time: np.ndarray) -> _RiskSets:
    order = np.argsort(time, kind="mergesort")
    ts = time[order]
    first = np.searchsorted(ts, ts, side="left")
    last = np.searchsorted(ts, ts, side="right") - 1
    return _RiskSets(order, first, last)


def _cox_terms(eta: np.ndarray, time: np.ndarray, event: np.ndarray):
    """Return (exp(eta - max eta), S, H) in original order.

    S_i sums the weights over the risk set at t_i and
    H_k = sum_{i: t_i <= t_k} d_i / S_i is the Breslow cumulative hazard.
    """
    rs = _risk_sets(time)
    # shifting eta leaves every ratio w/S unchanged and cannot overflow
    w = np.exp(eta - np.max(eta))
    ws = w[rs.order]
    ds = event[rs.order]
    # reverse cumulative sum: everyone with time >= t
    rev = np.cumsum(ws[::-1])[::-1]
    S_sorted = rev[rs.first]
    frac = np.cumsum(ds / S_sorted)
    H_sorted = frac[rs.last]
    S = np.empty_like(S_sorted)
    H = np.empty_like(H_sorted)
    S[rs.order] = S_sorted
    H[rs.order] = H_sorted
    return w, S, H


def _eta_residual(family: Family, dataset: Dataset, eta: np.ndarray) -> np.ndarray:
    if family is Family.COX:
        w, _, H = _cox_terms(eta, dataset.y, dataset.event)
        return dataset.event - w * H
    return dataset.y - link_mean(family, eta)


def _eta_loss(family: Family, dataset: Dataset, eta: np.ndarray) -> float:
    y = dataset.y
    if family is Family.GAUSSIAN:
        val = 0.5 * float(np.sum((y - eta) ** 2))
    elif family is Family.LOGISTIC:
        e = _clamp(eta)
        val = float(np.sum(np.logaddexp(0.0, e) - y * e))
    elif family is Family.POISSON:
        e = _clamp(eta)
        val = float(np.sum(np.exp(e) - y * e))
    else:
        _, S, _ = _cox_terms(eta, y, dataset.event)
        val = -float(np.sum(dataset.event * (eta - np.max(eta) - np.log(S))))
    if not np.isfinite(val):
        raise NumericalOverflow("non-finite loss")
    return val


def raw_residual(family: Family, dataset: Dataset, coef: Coefficients) -> np.ndarray:
    family = Family.parse(family)
    eta = linear_predictor(family, dataset, coef)
    return _eta_residual(family, dataset, eta)


def neg_log_likelihood(family: Family, dataset: Dataset, coef: Coefficients) -> float:
    family = Family.parse(family)
    eta = linear_predictor(family, dataset, coef)
    return _eta_loss(family, dataset, eta)


def gradient(family: Family, dataset: Dataset, coef: Coefficients) -> np.ndarray:
    """Gradient of the loss in beta, always ``-X.T @ raw_residual``."""
    return -(dataset.X.T @ raw_residual(family, dataset, coef))


def intercept_only(family: Family, dataset: Dataset) -> Coefficients:
    """Closed-form intercept-only fit (no intercept for Cox)."""
    family = Family.parse(family)
    y = dataset.y
    if family is Family.GAUSSIAN:
        b = float(np.mean(y))
    elif family is Family.LOGISTIC:
        m = float(np.mean(y))
        b = float(np.log(m / (1.0 - m))) if 0.0 < m < 1.0 else np.copysign(np.inf, m - 0.5)
    elif family is Family.POISSON:
        m = float(np.mean(y))
        b = float(np.log(m)) if m > 0 else -np.inf
    else:
        b = 0.0
    return Coefficients(b, np.zeros(dataset.p))

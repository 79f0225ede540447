"""Serialized report and campaign-config schemas."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ActiveFeature(_Strict):
    name: str
    index: int
    coefficient: float
    coefficient_standardized: float


class SolutionSummary(_Strict):
    lambda_fpc: float
    lambda_classical: float
    target_lambda_fpc: float
    fp_bound: float
    post_hoc_fdr: float
    residual_norm: float
    lambda_max: float
    intercept: float
    target_above_max: bool
    iterations: int
    active: list[ActiveFeature]


class RegularityModel(_Strict):
    monotone: bool
    n_violations: int
    max_violation_magnitude: float
    lambda_pairs: list[tuple[float, float]]


class ColumnModel(_Strict):
    name: str
    shift: Optional[float] = None
    mean: float = 0.0
    scale: float = 1.0
    skew_before: Optional[float] = None
    skew_after: Optional[float] = None
    transform_applied: bool = False
    dropped: bool = False


class TargetModel(_Strict):
    expected_fp: Optional[float] = None
    lambda_fpc: Optional[float] = None


class FitReport(_Strict):
    version: str
    status: Literal["ok", "target_above_max", "regularity_violation"]
    seed: Optional[int] = None
    family: str
    target: TargetModel
    n: int
    p: int
    solution: Optional[SolutionSummary] = None
    regularity: Optional[RegularityModel] = None
    preprocessing: list[ColumnModel]
    message: Optional[str] = None
    timing_seconds: Optional[float] = None


class PathRow(_Strict):
    lambda_classical: float
    lambda_fpc: float
    residual_norm: float
    n_active: int


class DiagnoseReport(_Strict):
    version: str
    family: str
    n: int
    p: int
    lambda_max: float
    regularity: RegularityModel
    table: list[PathRow]


class QqReport(_Strict):
    version: str
    seed: int
    b_dist: str
    a_dist: str
    standardization: str
    n: int
    m: int
    d_K: float
    d_W: float
    xi3: float
    delta: float
    bound_K: float
    bound_W: float
    quantiles: list[tuple[float, float]]


# -- campaign config ----------------------------------------------------------

def _as_list(v):
    return v if isinstance(v, list) else [v]


class DesignConfig(_Strict):
    n: int = Field(100, ge=2)
    p: list[int] = Field(default_factory=lambda: [100], min_length=1)
    column_dist: Literal["gaussian", "binomial", "bernoulli", "exponential"] = "gaussian"
    noise_corr: list[float] = Field(default_factory=lambda: [0.0], min_length=1)

    @field_validator("p", "noise_corr", mode="before")
    @classmethod
    def _listify(cls, v):
        return _as_list(v)

    @model_validator(mode="after")
    def _check(self):
        if any(p < 1 for p in self.p):
            raise ValueError("every p must be positive")
        if any(not 0.0 <= r < 1.0 for r in self.noise_corr):
            raise ValueError("noise_corr values must lie in [0, 1)")
        return self


class SignalConfig(_Strict):
    k: int = Field(5, ge=0)
    beta_magnitude: float = 1.0


class ResponseConfig(_Strict):
    family: Literal["gaussian", "logistic", "binomial", "cox", "survival"] = "gaussian"
    gaussian_sd: float = Field(1.0, gt=0)
    censor_fraction_target: float = Field(0.25, ge=0, lt=1)


class PathConfigModel(_Strict):
    n_lambda: int = Field(50, ge=2)
    min_ratio: float = Field(0.01, gt=0, lt=1)
    tol: float = Field(1e-8, gt=0)


class CampaignConfig(_Strict):
    experiment: Literal["fp", "corr", "tp"] = "fp"
    replicates: int = Field(..., ge=1)
    seed: Optional[int] = Field(None, ge=0)
    targets: list[float] = Field(..., min_length=1)
    design: DesignConfig = Field(default_factory=DesignConfig)
    signal: SignalConfig = Field(default_factory=SignalConfig)
    response: ResponseConfig = Field(default_factory=ResponseConfig)
    path: PathConfigModel = Field(default_factory=PathConfigModel)

    @model_validator(mode="after")
    def _check_targets(self):
        for p in self.design.p:
            for t in self.targets:
                if not 0.0 < t < p:
                    raise ValueError(f"target {t} outside (0, p) for p={p}")
        return self

"""Pydantic models for every report the commands emit.

Reports hold only values that are a pure function of (config, seeds); timestamps and host
details go to ``RunMetadata`` in a separate sidecar file.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class OperatingPointModel(BaseModel):
    """Analytic (R*, D*, Delta*) in base-q units."""

    R_star: float
    D_star: float
    Delta_star: float


class ExperimentReport(BaseModel):
    """Measured performance of a code over a batch of encode/decode trials."""

    n: int
    q: int
    rate: float = Field(..., description="R_n = |I| / n")
    info_size: int
    frozen_size: int
    computable_size: int
    trials: int
    seed: int
    frozen_policy: str
    confidence: float
    mean_distortion: float
    distortion_half_width: float
    error_rate: float = Field(..., ge=0.0, le=1.0, description="Empirical P_e")
    error_half_width: float
    error_bound: float = Field(..., description="Sum of Z_marg over the computable set")
    equivocation_proxy: float = Field(
        ..., description="Pooled per-letter empirical H(Y | X_hat); a proxy, not Delta_n"
    )
    target: OperatingPointModel | None = None
    spec_reference: str | None = None


class TrialRow(BaseModel):
    """One trial as exported to the optional per-trial CSV."""

    trial: int
    distortion: float
    decode_mismatch: bool


class CheckResult(BaseModel):
    """One inequality or identity evaluated exactly by the oracle."""

    name: str
    lhs: float
    rhs: float
    passed: bool | None = Field(
        ..., description="None when the check does not apply (reported as N/A)"
    )
    asserted: bool = True

    @property
    def status(self) -> str:
        if self.passed is None:
            return "N/A"
        return "PASS" if self.passed else "FAIL"


class DistortionBreakdown(BaseModel):
    """Exact distortion quantities under the encoder and decoder laws (per letter)."""

    encoder_distortion: float
    decoder_distortion: float
    error_probability: float
    distortion_given_correct: float | None
    distortion_given_error: float | None
    error_bound: float
    identity_residual: float


class EquivocationBreakdown(BaseModel):
    """Exact equivocation and the entropy terms of its lower-bound chain (per letter)."""

    equivocation: float
    encoder_conditional_entropy: float
    target_conditional_entropy: float
    joint_entropy_gap: float
    marginal_entropy_gap: float


class OracleReport(BaseModel):
    """All exact small-n quantities for one spec and frozen mode."""

    n: int
    q: int
    frozen_mode: str
    frozen: list[int]
    computable: list[int]
    target: OperatingPointModel
    variational_distance: float
    variational_bound: float
    distortion: DistortionBreakdown
    equivocation: EquivocationBreakdown
    checks: list[CheckResult]

    @property
    def all_passed(self) -> bool:
        return all(c.passed is not False for c in self.checks if c.asserted)


class FrozenPoint(BaseModel):
    """Exact (D_n, Delta_n) of one frozen vector."""

    model_config = ConfigDict(frozen=True)

    frozen_values: tuple[int, ...]
    distortion: float
    equivocation: float


class TimeSharePlanModel(BaseModel):
    """A single frozen vector, or two time-shared with weight alpha on the first."""

    kind: str = Field(..., pattern="^(single|pair)$")
    first: FrozenPoint
    second: FrozenPoint | None = None
    alpha: float = Field(1.0, ge=0.0, le=1.0)
    distortion: float
    equivocation: float
    target_distortion: float
    target_equivocation: float


class RegionQueryReport(BaseModel):
    """Answer to a minimal-rate query over the frontier."""

    d_max: float
    delta_min: float
    point: OperatingPointModel
    channel: list[float]
    rate_trajectory: list[float]


class RunMetadata(BaseModel):
    """Sidecar metadata that is allowed to differ between identical runs."""

    command: str
    version: str
    created_at: str
    config_sha256: str | None = None
    threads: int
    seed: int
    outputs: list[str]

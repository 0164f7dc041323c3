"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..config import BenchSettings, ExperimentConfig


class ProgramBody(BaseModel):
    """A program in its text serialization plus optional trained coefficients."""

    program: str
    coefficients: tuple[float, ...] | None = None


class CertifyRequest(ProgramBody):
    target: str
    epsilon: float = Field(gt=0)
    domain: tuple[float, float] | None = None  # None = the target's own domain
    max_depth: int = 96
    max_leaves: int = 10_000_000
    include_certificate: bool = False


class WitnessModel(BaseModel):
    x: float
    reason: str
    eta: float | None = None


class CertifyResponse(BaseModel):
    status: Literal["Proven", "Failed"]
    target: str
    epsilon: float
    domain: tuple[float, float]
    subintervals: int
    max_depth_reached: int
    witness: WitnessModel | None = None
    certificate: dict | None = None


class CheckCertificateRequest(BaseModel):
    certificate: dict


class CheckCertificateResponse(BaseModel):
    status: Literal["Proven"]
    subintervals: int
    target: str
    epsilon: float


class TestRequest(ProgramBody):
    target: str
    mode: Literal["real64", "float32"] = "real64"
    grid_size: int = Field(default=10_000, ge=2)
    exhaustive: bool = False


class PrecisionReport(BaseModel):
    target: str
    mode: str
    metric: Literal["relative", "ulp"]
    exhaustive: bool
    points: int
    max_error: float
    argmax_x: float | None


class BaselineRequest(BaseModel):
    target: str
    family: str
    order: int = Field(default=0, ge=0)
    center: float | None = None
    interval: tuple[float, float] | None = None
    coeff_file: str | None = None
    grid_size: int = Field(default=10_000, ge=2)


class BaselineResponse(BaseModel):
    family: str
    order: int
    program: str
    operations: int
    report: PrecisionReport


class BenchRequest(ProgramBody):
    config: BenchSettings | None = None  # None = reduced settings


class CompareRequest(BaseModel):
    a: ProgramBody
    b: ProgramBody
    config: BenchSettings | None = None
    ratios: int = Field(default=9, ge=1)


class CompareResponse(BaseModel):
    ratios: list[float]
    median: float
    min: float
    max: float


class SearchStartRequest(BaseModel):
    config: ExperimentConfig = ExperimentConfig()
    seed: int | None = None  # None = first seed listed in the config


class JobStatus(BaseModel):
    job_id: str
    state: Literal["running", "done", "stopped", "failed"]
    seed: int
    evaluations: int
    budget: int
    archive_size: int
    config_hash: str
    error: str | None = None


class ArchiveResponse(BaseModel):
    job_id: str
    records: list[dict]


class PutRecordRequest(BaseModel):
    record: dict
    count: bool = True


class SampleResponse(BaseModel):
    records: list[dict]


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str

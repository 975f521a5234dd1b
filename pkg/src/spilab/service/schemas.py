"""Request/response models for the HTTP service.

File-producing endpoints take and return filesystem paths: the service is
the process that owns the workspace, and the CLI is a thin client over
these models.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..config import PipelineConfig, SceneEntry
from ..pipeline import BenchReport, MetricRow, RunManifest


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    stage: str
    error: str
    message: str


class ConfigArithmeticRequest(BaseModel):
    config: PipelineConfig


class ConfigArithmeticResponse(BaseModel):
    pattern_count_displayed: int
    compression_ratio: float
    frame_rate_hz: float


class MapParamBody(BaseModel):
    l: float = Field(gt=0)
    q: int = Field(ge=2)


class GenerateMapsRequest(BaseModel):
    width: int
    height: int
    maps: list[MapParamBody]
    seed: int = 1
    out_dir: str


class GenerateMapsResponse(BaseModel):
    map_files: list[str]
    region_counts: list[int]
    total_regions: int


class BuildPatternsRequest(BaseModel):
    map_files: list[str]
    beta: float = 0.05
    seed: int = 2
    out_path: str
    report_csv: Optional[str] = None


class BuildPatternsResponse(BaseModel):
    lookups_file: str
    pattern_count: int
    on_fraction_min: float
    on_fraction_max: float
    report_csv: Optional[str]


class GenerateSceneRequest(BaseModel):
    width: int
    height: int
    scene: SceneEntry
    out_path: str
    pgm_path: Optional[str] = None


class GenerateSceneResponse(BaseModel):
    scene_file: str
    support_fraction: float
    pgm_file: Optional[str]


class SimulateRequest(BaseModel):
    scene_file: str
    map_files: list[str]
    lookups_file: str
    mode: Literal["raw", "complementary"] = "raw"
    snr_db: Optional[float] = None
    noise_seed: int = 4
    daq_bits: Optional[int] = None
    daq_full_scale: Optional[float] = None
    out_path: str


class SimulateResponse(BaseModel):
    measurements_file: str
    sidecar_file: str
    pattern_count_displayed: int
    compression_ratio: float


class ReconstructRequest(BaseModel):
    measurements_file: str
    map_files: list[str]
    lookups_file: str
    kind: Literal["backproject", "tikhonov"] = "backproject"
    alpha: float = 1e-4
    out_path: str
    timing_path: Optional[str] = None


class ReconstructResponse(BaseModel):
    image_file: str
    stage: str
    seconds: float
    pixels_per_second: float


class EnhanceRequest(BaseModel):
    initial_file: str
    measurements_file: str
    map_files: list[str]
    lookups_file: str
    tau_rel: float = 0.02
    tau_abs: float = 0.0
    iters: int = 5
    stop_tol: float = 1e-4
    clamp_nonneg: bool = True
    clamp01: bool = False
    out_path: str
    report_path: Optional[str] = None


class EnhanceResponse(BaseModel):
    image_file: str
    iterations: int
    max_change: list[float]
    empty_region_count: int
    inconsistency_count: int
    converged: bool
    report_file: Optional[str]


class MetricsRequest(BaseModel):
    ref_file: str
    test_file: str


class MetricsResponse(BaseModel):
    psnr_db: Optional[float]  # null encodes +infinity (identical images)
    ssim: Optional[float]


class MontageRequest(BaseModel):
    ref_file: str
    image_files: list[str]
    out_path: str
    csv_path: Optional[str] = None


class MontageResponse(BaseModel):
    montage_file: str
    width: int
    height: int
    rows: list[MetricRow]
    csv_file: Optional[str]


class PipelineRequest(BaseModel):
    config: PipelineConfig
    workdir: str
    jobs: Optional[int] = None


class PipelineResponse(BaseModel):
    manifest: RunManifest
    manifest_file: str


class BenchRequest(BaseModel):
    config: PipelineConfig
    workdir: str
    repeats: int = 3


class BenchResponse(BaseModel):
    report: BenchReport

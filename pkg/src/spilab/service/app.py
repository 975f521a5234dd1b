"""FastAPI application exposing every pipeline stage.

Errors surface as HTTP 422 with a stage-tagged body so thin clients can
report ``[stage] message`` and exit nonzero. All endpoints are synchronous
pure functions of their request plus the workspace filesystem.
"""

from __future__ import annotations

import csv
import json
import math
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, formats, metrics, recon, sim
from ..config import PipelineConfig
from ..enhance import EnhanceParams, enhance
from ..errors import SpilabError
from ..mapgen import build_map_stack
from ..model import MapStack, region_sizes
from ..patterns import PatternSet, build_pattern_set, row_pixel_fraction
from ..pipeline import (
    StageError,
    build_montage,
    run_bench,
    run_pipeline,
    stage_scene,
)
from . import schemas

app = FastAPI(
    title="spilab",
    version=__version__,
    description="Single-pixel imaging simulation and reconstruction service",
)

_STAGE_BY_PATH = {
    "/v1/maps/generate": "genmaps",
    "/v1/patterns/build": "patterns",
    "/v1/scenes/generate": "scenes",
    "/v1/simulate": "simulate",
    "/v1/reconstruct/initial": "recon",
    "/v1/reconstruct/enhance": "enhance",
    "/v1/metrics/compare": "metrics",
    "/v1/montage": "montage",
    "/v1/pipeline/run": "pipeline",
    "/v1/bench/run": "bench",
    "/v1/config/arithmetic": "config",
}


@app.exception_handler(SpilabError)
def _spilab_error(request: Request, exc: SpilabError) -> JSONResponse:
    stage = getattr(exc, "stage", None) or _STAGE_BY_PATH.get(request.url.path, "service")
    body = schemas.ErrorBody(
        stage=stage, error=type(exc).__name__, message=str(exc)
    )
    return JSONResponse(status_code=422, content={"detail": body.model_dump()})


@app.exception_handler(FileNotFoundError)
def _missing_file(request: Request, exc: FileNotFoundError) -> JSONResponse:
    stage = _STAGE_BY_PATH.get(request.url.path, "service")
    body = schemas.ErrorBody(
        stage=stage, error="FileNotFound", message=str(exc)
    )
    return JSONResponse(status_code=422, content={"detail": body.model_dump()})


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


@app.post("/v1/config/arithmetic", response_model=schemas.ConfigArithmeticResponse)
def config_arithmetic(
    req: schemas.ConfigArithmeticRequest,
) -> schemas.ConfigArithmeticResponse:
    return schemas.ConfigArithmeticResponse(
        pattern_count_displayed=req.config.pattern_count_displayed(),
        compression_ratio=req.config.compression_ratio(),
        frame_rate_hz=req.config.frame_rate_hz(),
    )


@app.post("/v1/maps/generate", response_model=schemas.GenerateMapsResponse)
def generate_maps(req: schemas.GenerateMapsRequest) -> schemas.GenerateMapsResponse:
    stack = build_map_stack(
        req.width, req.height, [(p.l, p.q) for p in req.maps], req.seed
    )
    out = Path(req.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, m in enumerate(stack.maps):
        path = out / f"map_{i:02d}.spim"
        formats.write_spim(path, m)
        paths.append(str(path))
    return schemas.GenerateMapsResponse(
        map_files=paths,
        region_counts=[m.region_count for m in stack.maps],
        total_regions=stack.total_regions,
    )


def _load_pattern_set(map_files: list[str], lookups_file: str) -> PatternSet:
    stack = MapStack(maps=tuple(formats.read_spim(p) for p in map_files))
    lookups = formats.read_spil(lookups_file)
    balance = tuple(
        np.array([row_pixel_fraction(row, region_sizes(m)) for row in lk.entries])
        for m, lk in zip(stack.maps, lookups)
    )
    return PatternSet(stack=stack, lookups=tuple(lookups), balance=balance)


@app.post("/v1/patterns/build", response_model=schemas.BuildPatternsResponse)
def build_patterns(req: schemas.BuildPatternsRequest) -> schemas.BuildPatternsResponse:
    stack = MapStack(maps=tuple(formats.read_spim(p) for p in req.map_files))
    ps = build_pattern_set(stack, req.beta, req.seed)
    formats.write_spil(req.out_path, list(ps.lookups))
    fractions = np.concatenate(ps.balance)
    if req.report_csv:
        with open(req.report_csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["map", "row", "on_fraction"])
            for m, r, frac in ps.balance_rows():
                w.writerow([m, r, f"{frac:.6f}"])
    return schemas.BuildPatternsResponse(
        lookups_file=req.out_path,
        pattern_count=ps.pattern_count,
        on_fraction_min=float(fractions.min()),
        on_fraction_max=float(fractions.max()),
        report_csv=req.report_csv,
    )


@app.post("/v1/scenes/generate", response_model=schemas.GenerateSceneResponse)
def generate_scene(req: schemas.GenerateSceneRequest) -> schemas.GenerateSceneResponse:
    config = PipelineConfig(
        width=req.width, height=req.height, maps=[{"l": 1, "q": 2}], scenes=[req.scene]
    )
    img = stage_scene(config, req.scene, 0)
    Path(req.out_path).parent.mkdir(parents=True, exist_ok=True)
    formats.write_spif(req.out_path, img)
    if req.pgm_path:
        formats.write_pgm(req.pgm_path, img)
    return schemas.GenerateSceneResponse(
        scene_file=req.out_path,
        support_fraction=float(np.count_nonzero(img.data) / img.pixel_count),
        pgm_file=req.pgm_path,
    )


@app.post("/v1/simulate", response_model=schemas.SimulateResponse)
def simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
    scene = formats.read_spif(req.scene_file)
    ps = _load_pattern_set(req.map_files, req.lookups_file)
    ms = sim.forward_measure(scene, ps, req.mode)
    if req.snr_db is not None:
        ms = sim.add_noise(ms, sim.NoiseSpec(req.snr_db, req.noise_seed))
    if req.daq_bits is not None:
        ms = sim.daq_quantize(ms, req.daq_bits, req.daq_full_scale)
    Path(req.out_path).parent.mkdir(parents=True, exist_ok=True)
    formats.write_spiv(req.out_path, ms)
    sidecar = str(Path(req.out_path).with_suffix(".json"))
    Path(sidecar).write_text(
        json.dumps(
            {
                "mode": ms.mode,
                "snr_db": ms.snr_db,
                "daq_bits": ms.daq_bits,
                "seed": req.noise_seed,
                "pattern_count_displayed": ms.pattern_count_displayed,
            },
            indent=2,
        )
    )
    return schemas.SimulateResponse(
        measurements_file=req.out_path,
        sidecar_file=sidecar,
        pattern_count_displayed=ms.pattern_count_displayed,
        compression_ratio=ms.pattern_count_displayed / scene.pixel_count,
    )


@app.post("/v1/reconstruct/initial", response_model=schemas.ReconstructResponse)
def reconstruct_initial(req: schemas.ReconstructRequest) -> schemas.ReconstructResponse:
    ms = formats.read_spiv(req.measurements_file)
    ps = _load_pattern_set(req.map_files, req.lookups_file)
    t0 = time.perf_counter()
    if req.kind == "tikhonov":
        op = recon.build_tikhonov(ps, req.alpha)
    else:
        op = recon.build_backproject(ps)
    img = recon.apply_inverse(op, ms)
    seconds = time.perf_counter() - t0
    Path(req.out_path).parent.mkdir(parents=True, exist_ok=True)
    formats.write_spif(req.out_path, img)
    timing = {
        "stage": f"recon-{req.kind}",
        "seconds": seconds,
        "pixels_per_second": img.pixel_count / seconds if seconds > 0 else float("inf"),
    }
    if req.timing_path:
        Path(req.timing_path).write_text(json.dumps(timing, indent=2))
    return schemas.ReconstructResponse(
        image_file=req.out_path,
        stage=timing["stage"],
        seconds=timing["seconds"],
        pixels_per_second=timing["pixels_per_second"],
    )


@app.post("/v1/reconstruct/enhance", response_model=schemas.EnhanceResponse)
def reconstruct_enhance(req: schemas.EnhanceRequest) -> schemas.EnhanceResponse:
    x0 = formats.read_spif(req.initial_file)
    ms = formats.read_spiv(req.measurements_file)
    ps = _load_pattern_set(req.map_files, req.lookups_file)
    stats = recon.recover_region_stats(ms, ps)
    params = EnhanceParams(
        tau_rel=req.tau_rel,
        tau_abs=req.tau_abs,
        max_iters=req.iters,
        stop_tol=req.stop_tol,
        clamp_nonneg=req.clamp_nonneg,
        clamp_unit=req.clamp01,
    )
    img, report = enhance(x0, stats, ps.stack, params)
    Path(req.out_path).parent.mkdir(parents=True, exist_ok=True)
    formats.write_spif(req.out_path, img)
    if req.report_path:
        Path(req.report_path).write_text(json.dumps(report.to_dict(), indent=2))
    return schemas.EnhanceResponse(
        image_file=req.out_path,
        iterations=report.iterations,
        max_change=report.max_change,
        empty_region_count=len(report.empty_regions),
        inconsistency_count=len(report.inconsistencies),
        converged=report.converged,
        report_file=req.report_path,
    )


@app.post("/v1/metrics/compare", response_model=schemas.MetricsResponse)
def metrics_compare(req: schemas.MetricsRequest) -> schemas.MetricsResponse:
    ref = formats.read_spif(req.ref_file)
    test = formats.read_spif(req.test_file)
    result = metrics.compare(ref, test)
    p = None if math.isinf(result.psnr_db) else result.psnr_db
    return schemas.MetricsResponse(psnr_db=p, ssim=result.ssim)


@app.post("/v1/montage", response_model=schemas.MontageResponse)
def montage(req: schemas.MontageRequest) -> schemas.MontageResponse:
    ref = formats.read_spif(req.ref_file)
    others = [formats.read_spif(p) for p in req.image_files]
    strip, rows = build_montage(ref, others)
    Path(req.out_path).parent.mkdir(parents=True, exist_ok=True)
    formats.write_pgm(req.out_path, strip)
    if req.csv_path:
        with open(req.csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["panel", "psnr_db", "ssim"])
            for row in rows:
                w.writerow(
                    [
                        row.scene,
                        "inf" if row.psnr_db is None else f"{row.psnr_db:.6f}",
                        "" if row.ssim is None else f"{row.ssim:.6f}",
                    ]
                )
    return schemas.MontageResponse(
        montage_file=req.out_path,
        width=strip.width,
        height=strip.height,
        rows=rows,
        csv_file=req.csv_path,
    )


@app.post("/v1/pipeline/run", response_model=schemas.PipelineResponse)
def pipeline_run(req: schemas.PipelineRequest) -> schemas.PipelineResponse:
    manifest = run_pipeline(req.config, req.workdir, req.jobs)
    return schemas.PipelineResponse(
        manifest=manifest,
        manifest_file=str(Path(req.workdir) / "manifest.json"),
    )


@app.post("/v1/bench/run", response_model=schemas.BenchResponse)
def bench_run(req: schemas.BenchRequest) -> schemas.BenchResponse:
    return schemas.BenchResponse(report=run_bench(req.config, req.workdir, req.repeats))

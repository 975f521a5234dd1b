"""End-to-end orchestration: maps -> patterns -> scenes -> simulate ->
reconstruct -> enhance [-> external NN] -> metrics.

Every artifact lands in a workdir with explicit seeds recorded in the run
manifest, so re-running a config reproduces byte-identical SPIM / SPIL /
SPIV / SPIF files. Scenes fan out across a thread pool; per-scene seeds are
split from the config seeds by scene index, so results do not depend on
scheduling order.
"""

from __future__ import annotations

import csv
import json
import math
import shlex
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel

from . import formats, mapgen, metrics, recon, scenes, sim
from .config import PipelineConfig, SceneEntry
from .enhance import EnhanceParams, enhance
from .errors import BadParam, DimensionMismatch, SpilabError
from .model import MapStack, SceneImage, split_seed
from .patterns import PatternSet, build_pattern_set


class StageError(SpilabError):
    """Failure tagged with the pipeline stage it occurred in."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


class MetricRow(BaseModel):
    scene: str
    method: str  # initial | iterative | nn
    psnr_db: Optional[float]  # None encodes an unbounded PSNR (identical images)
    ssim: Optional[float]  # None when the raster is smaller than the SSIM window


class SceneArtifacts(BaseModel):
    scene_id: str
    scene: str
    measurements: str
    sidecar: str
    initial: str
    enhanced: str
    enhance_report: str
    nn: Optional[str] = None


class RunManifest(BaseModel):
    config: PipelineConfig
    workdir: str
    map_files: list[str]
    lookups_file: str
    balance_report: str
    scene_artifacts: list[SceneArtifacts]
    timings: dict[str, float]
    total_seconds: float
    rows: list[MetricRow]
    pattern_count_displayed: int
    compression_ratio: float
    frame_rate_hz: float
    metrics_csv: str


def _metric_row(scene_id: str, method: str, ref: SceneImage, img: SceneImage) -> MetricRow:
    result = metrics.compare(ref, img)
    p = None if math.isinf(result.psnr_db) else result.psnr_db
    return MetricRow(scene=scene_id, method=method, psnr_db=p, ssim=result.ssim)


def _load_stack(maps_dir: Path) -> MapStack:
    paths = sorted(maps_dir.glob("*.spim"))
    if not paths:
        raise BadParam(f"no SPIM files in {maps_dir}")
    return MapStack(maps=tuple(formats.read_spim(p) for p in paths))


def stage_genmaps(config: PipelineConfig, workdir: Path) -> tuple[MapStack, list[str]]:
    if config.maps_dir:
        stack = _load_stack(Path(config.maps_dir))
        if (stack.width, stack.height) != (config.width, config.height):
            raise BadParam("pre-built maps do not match the configured raster")
        return stack, [str(p) for p in sorted(Path(config.maps_dir).glob("*.spim"))]
    stack = mapgen.build_map_stack(
        config.width,
        config.height,
        [(p.l, p.q) for p in config.maps],
        config.seeds.maps,
    )
    out = workdir / "maps"
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, m in enumerate(stack.maps):
        path = out / f"map_{i:02d}.spim"
        formats.write_spim(path, m)
        paths.append(str(path))
    return stack, paths


def stage_patterns(
    config: PipelineConfig, stack: MapStack, workdir: Path
) -> tuple[PatternSet, str, str]:
    report_path = workdir / "balance_report.csv"
    if config.lookups_path:
        lookups = formats.read_spil(config.lookups_path)
        from .patterns import row_pixel_fraction
        from .model import region_sizes

        balance = tuple(
            np.array(
                [row_pixel_fraction(row, region_sizes(m)) for row in lk.entries]
            )
            for m, lk in zip(stack.maps, lookups)
        )
        ps = PatternSet(stack=stack, lookups=tuple(lookups), balance=balance)
        lookups_file = str(config.lookups_path)
    else:
        ps = build_pattern_set(stack, config.beta, config.seeds.patterns)
        lookups_file = str(workdir / "lookups.spil")
        formats.write_spil(lookups_file, list(ps.lookups))
    with open(report_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["map", "row", "on_fraction"])
        for m, r, frac in ps.balance_rows():
            w.writerow([m, r, f"{frac:.6f}"])
    return ps, lookups_file, str(report_path)


def stage_scene(config: PipelineConfig, entry: SceneEntry, index: int) -> SceneImage:
    if entry.file:
        path = Path(entry.file)
        if not path.exists():
            raise BadParam(f"scene file {path} does not exist")
        return formats.read_spif(path)
    seed = entry.seed if entry.seed is not None else split_seed(config.seeds.scene, index)
    spec = scenes.SceneSpec(
        kind=entry.kind,
        seed=seed,
        sparsity_max=entry.sparsity_max,
        spokes=entry.spokes,
        vignette=entry.vignette,
    )
    glyphs = None
    if entry.kind == "glyphs":
        if entry.glyphs_path:
            glyphs = scenes.load_idx_glyphs(entry.glyphs_path)
        else:
            glyphs = scenes.synthetic_glyph_set(16, seed=split_seed(seed, 1))
    return scenes.generate_scene(config.width, config.height, spec, glyphs)


def _run_nn(command: str, in_path: str, out_path: str) -> None:
    tokens = [
        t.replace("{in}", in_path).replace("{out}", out_path)
        for t in shlex.split(command)
    ]
    proc = subprocess.run(tokens, capture_output=True, text=True)
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout).strip().splitlines()[-3:]
        raise SpilabError(f"enhancer command failed ({proc.returncode}): {' '.join(tail)}")
    if not Path(out_path).exists():
        raise SpilabError(f"enhancer command produced no output at {out_path}")


def _scene_chain(
    config: PipelineConfig,
    pattern_set: PatternSet,
    entry: SceneEntry,
    index: int,
    workdir: Path,
) -> tuple[SceneArtifacts, list[MetricRow], dict[str, float]]:
    timings: dict[str, float] = {}
    scene_id = f"scene_{index:03d}"

    def _timed(stage, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except StageError:
            raise
        except SpilabError as exc:
            raise StageError(stage, str(exc)) from exc
        timings[stage] = timings.get(stage, 0.0) + time.perf_counter() - t0
        return out

    ref = _timed("scenes", lambda: stage_scene(config, entry, index))
    scene_path = workdir / "scenes" / f"{scene_id}.spif"
    formats.write_spif(scene_path, ref)

    def _simulate():
        ms = sim.forward_measure(ref, pattern_set, config.mode)
        if config.snr_db is not None:
            ms = sim.add_noise(
                ms, sim.NoiseSpec(config.snr_db, split_seed(config.seeds.noise, index))
            )
        if config.daq_bits is not None:
            ms = sim.daq_quantize(ms, config.daq_bits)
        return ms

    ms = _timed("simulate", _simulate)
    ms_path = workdir / "measurements" / f"{scene_id}.spiv"
    ms_path.parent.mkdir(parents=True, exist_ok=True)
    formats.write_spiv(ms_path, ms)
    sidecar = ms_path.with_suffix(".json")
    sidecar.write_text(
        json.dumps(
            {
                "mode": ms.mode,
                "snr_db": ms.snr_db,
                "daq_bits": ms.daq_bits,
                "seed": split_seed(config.seeds.noise, index),
                "pattern_count_displayed": ms.pattern_count_displayed,
            },
            indent=2,
        )
    )

    def _initial():
        if config.initial_kind == "tikhonov":
            op = recon.build_tikhonov(pattern_set, config.alpha)
        else:
            op = recon.build_backproject(pattern_set)
        return recon.apply_inverse(op, ms)

    x0 = _timed("recon", _initial)
    initial_path = workdir / "recon" / f"{scene_id}_initial.spif"
    initial_path.parent.mkdir(parents=True, exist_ok=True)
    formats.write_spif(initial_path, x0)

    def _enhance():
        stats = recon.recover_region_stats(ms, pattern_set)
        params = EnhanceParams(
            tau_rel=config.tau_rel,
            tau_abs=config.tau_abs,
            max_iters=config.iters,
            stop_tol=config.stop_tol,
            clamp_nonneg=config.clamp_nonneg,
            clamp_unit=config.clamp01,
        )
        return enhance(x0, stats, pattern_set.stack, params)

    xk, report = _timed("enhance", _enhance)
    enhanced_path = workdir / "recon" / f"{scene_id}_enhanced.spif"
    formats.write_spif(enhanced_path, xk)
    report_path = workdir / "recon" / f"{scene_id}_enhance.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2))

    nn_path = None
    if config.nn_command:
        nn_path = workdir / "recon" / f"{scene_id}_nn.spif"
        _timed("nn", lambda: _run_nn(config.nn_command, str(initial_path), str(nn_path)))

    def _metrics():
        rows = [
            _metric_row(scene_id, "initial", ref, x0),
            _metric_row(scene_id, "iterative", ref, xk),
        ]
        if nn_path is not None:
            rows.append(_metric_row(scene_id, "nn", ref, formats.read_spif(nn_path)))
        return rows

    rows = _timed("metrics", _metrics)
    artifacts = SceneArtifacts(
        scene_id=scene_id,
        scene=str(scene_path),
        measurements=str(ms_path),
        sidecar=str(sidecar),
        initial=str(initial_path),
        enhanced=str(enhanced_path),
        enhance_report=str(report_path),
        nn=str(nn_path) if nn_path else None,
    )
    return artifacts, rows, timings


def run_pipeline(
    config: PipelineConfig, workdir: str | Path, jobs: int | None = None
) -> RunManifest:
    """Run every stage; returns the manifest after writing all artifacts."""
    t_start = time.perf_counter()
    workdir = Path(workdir)
    (workdir / "scenes").mkdir(parents=True, exist_ok=True)
    if not config.scenes:
        raise StageError("scenes", "config lists no scenes")
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    try:
        stack, map_files = stage_genmaps(config, workdir)
    except SpilabError as exc:
        raise StageError("genmaps", str(exc)) from exc
    timings["genmaps"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        pattern_set, lookups_file, balance_report = stage_patterns(config, stack, workdir)
    except SpilabError as exc:
        raise StageError("patterns", str(exc)) from exc
    timings["patterns"] = time.perf_counter() - t0

    results: list = [None] * len(config.scenes)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {
            pool.submit(_scene_chain, config, pattern_set, entry, i, workdir): i
            for i, entry in enumerate(config.scenes)
        }
        for fut, i in futures.items():
            results[i] = fut.result()

    rows: list[MetricRow] = []
    artifacts: list[SceneArtifacts] = []
    for art, scene_rows, scene_timings in results:
        artifacts.append(art)
        rows.extend(scene_rows)
        for stage, seconds in scene_timings.items():
            timings[stage] = timings.get(stage, 0.0) + seconds

    csv_path = workdir / "metrics.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["scene", "method", "psnr_db", "ssim"])
        for row in rows:
            w.writerow(
                [
                    row.scene,
                    row.method,
                    "inf" if row.psnr_db is None else f"{row.psnr_db:.6f}",
                    "" if row.ssim is None else f"{row.ssim:.6f}",
                ]
            )

    manifest = RunManifest(
        config=config,
        workdir=str(workdir),
        map_files=map_files,
        lookups_file=lookups_file,
        balance_report=balance_report,
        scene_artifacts=artifacts,
        timings=timings,
        total_seconds=time.perf_counter() - t_start,
        rows=rows,
        pattern_count_displayed=config.pattern_count_displayed(),
        compression_ratio=config.compression_ratio(),
        frame_rate_hz=config.frame_rate_hz(),
        metrics_csv=str(csv_path),
    )
    _assert_artifacts_exist(manifest)
    (workdir / "manifest.json").write_text(manifest.model_dump_json(indent=2))
    return manifest


def _assert_artifacts_exist(manifest: RunManifest) -> None:
    paths = list(manifest.map_files)
    paths += [manifest.lookups_file, manifest.balance_report, manifest.metrics_csv]
    for art in manifest.scene_artifacts:
        paths += [art.scene, art.measurements, art.sidecar, art.initial,
                  art.enhanced, art.enhance_report]
        if art.nn:
            paths.append(art.nn)
    missing = [p for p in paths if not Path(p).exists()]
    if missing:
        raise StageError("manifest", f"artifacts missing at manifest time: {missing}")


class BenchReport(BaseModel):
    repeats: int
    median_stage_seconds: dict[str, float]
    theoretical_frame_rate_hz: float
    pattern_count_displayed: int
    compression_ratio: float
    reconstruction_seconds_per_frame: float  # initial + one enhancement sweep


def run_bench(config: PipelineConfig, workdir: str | Path, repeats: int) -> BenchReport:
    """Median per-stage wall time over repeated identical runs (report only)."""
    if repeats < 3:
        raise BadParam(f"repeats must be >= 3, got {repeats}")
    workdir = Path(workdir)
    per_stage: dict[str, list[float]] = {}
    per_frame: list[float] = []
    for rep in range(repeats):
        manifest = run_pipeline(config, workdir / f"rep_{rep}")
        for stage, seconds in manifest.timings.items():
            per_stage.setdefault(stage, []).append(seconds)
        n_scenes = len(manifest.scene_artifacts)
        iters = max(
            1,
            sum(
                json.loads(Path(a.enhance_report).read_text())["iterations"]
                for a in manifest.scene_artifacts
            )
            / n_scenes,
        )
        per_frame.append(
            manifest.timings.get("recon", 0.0) / n_scenes
            + manifest.timings.get("enhance", 0.0) / n_scenes / iters
        )
    return BenchReport(
        repeats=repeats,
        median_stage_seconds={
            k: float(np.median(v)) for k, v in sorted(per_stage.items())
        },
        theoretical_frame_rate_hz=config.frame_rate_hz(),
        pattern_count_displayed=config.pattern_count_displayed(),
        compression_ratio=config.compression_ratio(),
        reconstruction_seconds_per_frame=float(np.median(per_frame)),
    )


SEPARATOR_WIDTH = 4
SEPARATOR_VALUE = 0.5


def build_montage(
    ref: SceneImage, others: list[SceneImage]
) -> tuple[SceneImage, list[MetricRow]]:
    """Horizontal strip [ref | others...] with 4 px mid-gray separators,
    plus PSNR/SSIM of every non-reference image against the reference."""
    panels = [ref] + list(others)
    for img in panels[1:]:
        if (img.width, img.height) != (ref.width, ref.height):
            raise DimensionMismatch("montage panels must share dimensions")
    sep = np.full((ref.height, SEPARATOR_WIDTH), SEPARATOR_VALUE)
    pieces = []
    for i, img in enumerate(panels):
        if i:
            pieces.append(sep)
        pieces.append(img.data)
    strip = np.hstack(pieces)
    rows = [
        _metric_row(f"panel_{i}", "montage", ref, img)
        for i, img in enumerate(panels[1:], start=1)
    ]
    return SceneImage.from_array(strip), rows

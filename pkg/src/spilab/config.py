"""Pipeline configuration: JSON-serializable, explicit seeds everywhere.

The nominal displayed pattern count is the sum of quantization levels over
all maps (doubled in complementary mode); empty-bin compaction can only
lower the generated count, so the nominal value upper-bounds the actual one
and drives the compression/frame-rate arithmetic.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator

DESK_CHAR_SIZES = (4, 5, 7, 9, 12, 16, 21, 28, 37, 48)
FULL_CHAR_SIZES = (
    4, 5, 5, 6, 7, 8, 9, 10, 12, 14, 16, 18,
    20, 23, 27, 31, 35, 40, 46, 53, 61, 70, 80, 91, 105, 120,
)


class MapParam(BaseModel):
    l: float = Field(gt=0)
    q: int = Field(ge=2)


class Seeds(BaseModel):
    maps: int = 1
    patterns: int = 2
    scene: int = 3
    noise: int = 4


class SceneEntry(BaseModel):
    """One scene of a pipeline run: either generated or loaded from a file."""

    kind: Optional[Literal["lineart", "glyphs", "siemens"]] = None
    file: Optional[str] = None
    seed: Optional[int] = None  # default: split from seeds.scene by index
    sparsity_max: float = 0.05
    glyphs_path: Optional[str] = None  # IDX archive; synthetic set when absent
    spokes: int = 32
    vignette: float = 2.0

    @field_validator("file")
    @classmethod
    def _kind_or_file(cls, v, info):
        if v is None and info.data.get("kind") is None:
            raise ValueError("scene entry needs either 'kind' or 'file'")
        return v


class PipelineConfig(BaseModel):
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    maps: list[MapParam]
    beta: float = 0.05
    mode: Literal["raw", "complementary"] = "raw"
    snr_db: Optional[float] = None
    daq_bits: Optional[int] = None
    tau_rel: float = 0.02
    tau_abs: float = 0.0
    iters: int = 5
    stop_tol: float = 1e-4
    clamp01: bool = False
    clamp_nonneg: bool = True
    seeds: Seeds = Seeds()
    dmd_rate_hz: float = 22000.0
    nn_command: Optional[str] = None
    scenes: list[SceneEntry] = []
    maps_dir: Optional[str] = None  # pre-built SPIM stack instead of genmaps
    lookups_path: Optional[str] = None  # pre-built SPIL instead of patterns
    initial_kind: Literal["backproject", "tikhonov"] = "backproject"
    alpha: float = 1e-4

    def pattern_count_displayed(self) -> int:
        count = sum(p.q for p in self.maps)
        return 2 * count if self.mode == "complementary" else count

    def compression_ratio(self) -> float:
        return self.pattern_count_displayed() / (self.width * self.height)

    def frame_rate_hz(self) -> float:
        return self.dmd_rate_hz / self.pattern_count_displayed()


def default_desk_config(**overrides) -> PipelineConfig:
    """256x192, 10 maps with log-spaced feature sizes, 20 levels each."""
    base = dict(
        width=256,
        height=192,
        maps=[MapParam(l=l, q=20) for l in DESK_CHAR_SIZES],
    )
    base.update(overrides)
    return PipelineConfig(**base)


def default_full_config(**overrides) -> PipelineConfig:
    """1024x768 (native DMD raster), 26 maps, 124 levels each."""
    base = dict(
        width=1024,
        height=768,
        maps=[MapParam(l=l, q=124) for l in FULL_CHAR_SIZES],
    )
    base.update(overrides)
    return PipelineConfig(**base)

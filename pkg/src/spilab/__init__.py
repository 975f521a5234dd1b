"""spilab: single-pixel imaging simulation and reconstruction laboratory."""

__version__ = "0.1.0"

from .config import PipelineConfig, default_desk_config, default_full_config
from .enhance import EnhanceParams, enhance
from .mapgen import build_map_stack, gen_correlated_field, quantize_phase_to_map
from .metrics import compare, psnr, ssim
from .model import (
    ImageMap,
    LookupMatrix,
    MapStack,
    MeasurementSet,
    RegionStats,
    SceneImage,
    region_means_of_image,
    region_sizes,
    validate_map,
)
from .patterns import build_pattern_set, materialize_pattern
from .recon import apply_inverse, backproject_means, build_tikhonov, recover_region_stats
from .sim import NoiseSpec, add_noise, daq_quantize, forward_measure

__all__ = [
    "__version__",
    "PipelineConfig",
    "default_desk_config",
    "default_full_config",
    "EnhanceParams",
    "enhance",
    "build_map_stack",
    "gen_correlated_field",
    "quantize_phase_to_map",
    "compare",
    "psnr",
    "ssim",
    "ImageMap",
    "LookupMatrix",
    "MapStack",
    "MeasurementSet",
    "RegionStats",
    "SceneImage",
    "region_means_of_image",
    "region_sizes",
    "validate_map",
    "build_pattern_set",
    "materialize_pattern",
    "apply_inverse",
    "backproject_means",
    "build_tikhonov",
    "recover_region_stats",
    "NoiseSpec",
    "add_noise",
    "daq_quantize",
    "forward_measure",
]

"""Granular-flow runout simulation, dataset campaigns, and hazard mapping."""

from .raster import (
    GridGeo,
    RasterField,
    TerrainDerivatives,
    extract_tiles,
    gaussian_smooth,
    read_raster,
    terrain_derivatives,
    write_raster,
)
from .source import PileField, SourceSpec, build_pile
from .solver import (
    FlowState,
    MaterialParams,
    SimResult,
    SolverConfig,
    adapt_dt,
    run,
    save_result,
    step,
    voellmy_basal_stress,
    yield_deceleration,
)
from .sampling import ParameterSample, ParamRanges, lhs_sample, sobol_sample
from .campaign import (
    CampaignConfig,
    DatasetManifest,
    compute_displaced_px,
    run_campaign,
    split_dataset,
)
from .ensemble import EnsembleConfig, EnsembleProduct, quantile, run_ensemble
from .metrics import (
    FootprintScore,
    ThicknessScore,
    max_runout_distance,
    score_batch,
    score_footprint,
    score_thickness,
)

__version__ = "0.1.0"

__all__ = [
    "GridGeo",
    "RasterField",
    "TerrainDerivatives",
    "read_raster",
    "write_raster",
    "gaussian_smooth",
    "terrain_derivatives",
    "extract_tiles",
    "SourceSpec",
    "PileField",
    "build_pile",
    "MaterialParams",
    "SolverConfig",
    "FlowState",
    "SimResult",
    "voellmy_basal_stress",
    "yield_deceleration",
    "step",
    "adapt_dt",
    "run",
    "save_result",
    "ParamRanges",
    "ParameterSample",
    "lhs_sample",
    "sobol_sample",
    "CampaignConfig",
    "DatasetManifest",
    "run_campaign",
    "split_dataset",
    "compute_displaced_px",
    "EnsembleConfig",
    "EnsembleProduct",
    "run_ensemble",
    "quantile",
    "score_footprint",
    "score_thickness",
    "max_runout_distance",
    "score_batch",
    "FootprintScore",
    "ThicknessScore",
]

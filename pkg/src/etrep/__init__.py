"""Discrete elliptical tubes: validity, intrinsic statistics, permutation tests."""

from .model import (
    CrossSection,
    ETRep,
    GlobalTube,
    InvalidETRepError,
    ValidityReport,
    compute_normals,
    etrep_from_global,
    rcc_check,
    reconstruct_global,
    straight_tube,
    validate,
)
from .shapespace import (
    ConvexPoint,
    FrameTube,
    SampleSet,
    feature_matrix,
    feature_names,
    intrinsic_distance,
    intrinsic_mean,
    intrinsic_path,
    intrinsic_shape_mean,
    map_from_convex,
    map_to_convex,
    nonintrinsic_distance,
    nonintrinsic_mean,
    nonintrinsic_path,
    nonintrinsic_shape_mean,
    normalize_sample,
)
from .simulate import SimulationConfig, simulate_population
from .stats import (
    FeatureMatrix,
    TestReport,
    bh_adjust,
    direction_projection_test,
    partial_tests,
    permutation_pvalue,
    two_sample_report,
)

__version__ = "0.1.0"

__all__ = [
    "CrossSection",
    "ETRep",
    "GlobalTube",
    "InvalidETRepError",
    "ValidityReport",
    "compute_normals",
    "etrep_from_global",
    "rcc_check",
    "reconstruct_global",
    "straight_tube",
    "validate",
    "ConvexPoint",
    "FrameTube",
    "SampleSet",
    "feature_matrix",
    "feature_names",
    "intrinsic_distance",
    "intrinsic_mean",
    "intrinsic_path",
    "intrinsic_shape_mean",
    "map_from_convex",
    "map_to_convex",
    "nonintrinsic_distance",
    "nonintrinsic_mean",
    "nonintrinsic_path",
    "nonintrinsic_shape_mean",
    "normalize_sample",
    "SimulationConfig",
    "simulate_population",
    "FeatureMatrix",
    "TestReport",
    "bh_adjust",
    "direction_projection_test",
    "partial_tests",
    "permutation_pvalue",
    "two_sample_report",
    "__version__",
]

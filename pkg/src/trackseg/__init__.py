"""Distribution-tracking level-set segmentation with curvature-distribution
shape priors, a synthetic ultrasound phantom generator, and an NMSE benchmark
harness."""

from .density import (BinGrid, KernelSpec, Pdf1D, TargetModel, bhattacharyya,
                      kde_curvature_band, kde_region, train_target)
from .engine import (SegParams, SegResult, default_init, extract_features,
                     segment, train_model)
from .evaluation import EvalReport, dice, nmse, run_table1
from .fields import FeatureImage, ScalarField
from .filters import SradParams, edge_detector, srad, tangent_regularize
from .levelset import (LevelSet, aos_geodesic_step, curvature, redistance,
                       signed_distance_from_mask)
from .phantom import PhantomSample, PhantomSpec, generate, generate_dataset
from .velocity import (photometric_bhattacharyya, shape_bhattacharyya,
                       velocity_photometric, velocity_shape)

__version__ = "0.1.0"

__all__ = [
    "BinGrid", "KernelSpec", "Pdf1D", "TargetModel", "bhattacharyya",
    "kde_curvature_band", "kde_region", "train_target",
    "SegParams", "SegResult", "default_init", "extract_features", "segment",
    "train_model",
    "EvalReport", "dice", "nmse", "run_table1",
    "FeatureImage", "ScalarField",
    "SradParams", "edge_detector", "srad", "tangent_regularize",
    "LevelSet", "aos_geodesic_step", "curvature", "redistance",
    "signed_distance_from_mask",
    "PhantomSample", "PhantomSpec", "generate", "generate_dataset",
    "photometric_bhattacharyya", "shape_bhattacharyya", "velocity_photometric",
    "velocity_shape",
]

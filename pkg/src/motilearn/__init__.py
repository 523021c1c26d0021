"""motilearn: learning motility maps from motion data.

Fits a mixture of local total-least-squares models to the graph of the
map from shape velocity to body velocity, predicts with branch awareness
by conditioning on the previous output, optionally augments the data along
the graph's ruled (linear-in-shape-velocity) directions, and evaluates
against phase-binned baselines by reconstructing trajectories on SE(2).
"""

__version__ = "0.1.0"

from .augment import (AugmentConfig, RuledSurfaceAugmenter, assign_members,
                      build_agbr, sphere_weights, synthesize)
from .baselines import (FourierSeries, GeometricVelocityModel, PhaseBin,
                        PhaseVelocityModel)
from .data import (Dataset, GraphPoint, ShapeSample, Trajectory,
                   derive_velocities, export_csv, ingest_csv, ingest_csv_many,
                   segment_strides)
from .evaluation import DensityCurve, ksde, silverman_bandwidth, zscore_loss
from .gaussians import (GaussianComponent, log_density, mahalanobis_normalized,
                        tls_extract)
from .gbr import GaussianBranchingRegressor, build_gbr
from .mixture import EmConfig, FitError, GaussianMixtureEM, fit_gmm, responsibilities
from .se2 import (PoseSE2, StrideRecord, compose, exp_se2, integrate, log_se2,
                  relative, stride_displacements)
from .serialize import load_model, save_model
from .synth import (GaitParams, KinematicSpec, benchmark_datasets,
                    constant_spec, curvature_spec, gait_family, gen_kinematic,
                    gen_variety, merge_datasets, variety_branch, variety_sweep)
from .validation import ParseError, ValidationError

__all__ = [
    "AugmentConfig", "Dataset", "DensityCurve", "EmConfig", "FitError",
    "FourierSeries", "GaitParams", "GaussianBranchingRegressor",
    "GaussianComponent", "GaussianMixtureEM", "GeometricVelocityModel",
    "GraphPoint", "KinematicSpec", "ParseError", "PhaseBin",
    "PhaseVelocityModel", "PoseSE2", "RuledSurfaceAugmenter", "ShapeSample",
    "StrideRecord", "Trajectory", "ValidationError", "assign_members",
    "benchmark_datasets", "build_agbr", "build_gbr", "compose",
    "constant_spec", "curvature_spec", "derive_velocities", "exp_se2",
    "export_csv", "fit_gmm", "gait_family", "gen_kinematic", "gen_variety",
    "ingest_csv",
    "ingest_csv_many", "integrate", "ksde", "load_model", "log_density",
    "log_se2", "mahalanobis_normalized", "merge_datasets", "relative",
    "responsibilities", "save_model", "segment_strides",
    "silverman_bandwidth", "sphere_weights", "stride_displacements",
    "synthesize", "tls_extract", "variety_branch", "variety_sweep",
    "zscore_loss",
]

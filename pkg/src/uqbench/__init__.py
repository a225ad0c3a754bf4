"""uqbench: evaluation toolkit for pixel-wise regression uncertainty maps.

Sparsification curves and AUSE, uncertainty AUROC, the standard depth/flow
accuracy metrics, PFM/PGM I/O, and a self-contained 1D benchmark comparing
side-learner uncertainty against MC-dropout, ensembles and dual-head nets.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .grid import Field, PixelSeries, ValidityMask, densify_for_visualization, extract_valid
from .metrics import MetricReport, depth_error_maps, depth_report, epe_map, mean_epe
from .sparsify import (
    ReliabilityLabels,
    SparsificationConfig,
    SparsificationResult,
    ause,
    ause_dataset_wise,
    ause_image_wise,
    auroc,
    oracle_curve,
    sparsification_curve,
)

__all__ = [
    "__version__",
    "BACKEND",
    "Field",
    "PixelSeries",
    "ValidityMask",
    "densify_for_visualization",
    "extract_valid",
    "MetricReport",
    "depth_error_maps",
    "depth_report",
    "epe_map",
    "mean_epe",
    "ReliabilityLabels",
    "SparsificationConfig",
    "SparsificationResult",
    "ause",
    "ause_dataset_wise",
    "ause_image_wise",
    "auroc",
    "oracle_curve",
    "sparsification_curve",
]

"""Tree-structured sparse models for spatial data."""

from ._core import (
    ClusterTree,
    ConfigError,
    DimensionError,
    Error,
    augment,
    cross_validate,
    fit,
    project_to_voxels,
    prox_tree,
    scale_slice,
    simulate,
    ward_cluster,
    wilcoxon,
)

__all__ = [
    "ClusterTree",
    "ConfigError",
    "DimensionError",
    "Error",
    "augment",
    "cross_validate",
    "fit",
    "project_to_voxels",
    "prox_tree",
    "scale_slice",
    "simulate",
    "ward_cluster",
    "wilcoxon",
]

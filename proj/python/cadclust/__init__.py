"""Clustering evaluation and annotation toolkit for 3D CAD collections."""

from ._cadclust import (
    ClusterAnnotation,
    Error,
    LabeledEdgeSet,
    Partition,
    balanced_accuracy,
    canonical_edge,
    capacity_split,
    chamfer,
    confusion,
    consistency,
    distance_matrix,
    edge_accuracy,
    format_edge_set,
    human_ensemble_edges,
    human_ensemble_label,
    jaccard,
    kmeans,
    load_obj,
    majority_threshold,
    method_ensemble_label,
    minmax_normalize,
    read_edge_set,
    read_partition,
    sample_surface,
    silhouette,
    voxelize,
    write_edge_set,
    write_partition,
)

__all__ = [name for name in dir() if not name.startswith("_")]

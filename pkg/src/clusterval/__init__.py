"""Clustering and cluster-validation toolkit: scaling, k-means, agglomerative
clustering, and internal/external validity scores."""

from .dataset import (
    LabeledDataset,
    SplitSpec,
    class_counts,
    load_csv,
    load_iris,
    train_test_split,
)
from .errors import ClusterValError
from .hclust import (
    Dendrogram,
    agglomerate,
    cut_by_count,
    cut_by_height,
    pairwise_distances,
    suggest_cut,
)
from .kmeans import (
    KMeansConfig,
    KMeansModel,
    detect_knee,
    fit_kmeans,
    inertia_curve,
    kmeanspp_init,
    predict,
)
from .scaling import ScalerModel, eigh_jacobi, fit_scaler, transform
from .validation import (
    ContingencyTable,
    ExternalScores,
    MetricReport,
    best_match_accuracy,
    contingency,
    external_scores,
    linkage_comparison,
    silhouette,
    silhouette_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterValError",
    "ContingencyTable",
    "Dendrogram",
    "ExternalScores",
    "KMeansConfig",
    "KMeansModel",
    "LabeledDataset",
    "MetricReport",
    "ScalerModel",
    "SplitSpec",
    "agglomerate",
    "best_match_accuracy",
    "class_counts",
    "contingency",
    "cut_by_count",
    "cut_by_height",
    "detect_knee",
    "eigh_jacobi",
    "external_scores",
    "fit_kmeans",
    "fit_scaler",
    "inertia_curve",
    "kmeanspp_init",
    "linkage_comparison",
    "load_csv",
    "load_iris",
    "pairwise_distances",
    "predict",
    "silhouette",
    "silhouette_sweep",
    "suggest_cut",
    "train_test_split",
    "transform",
]

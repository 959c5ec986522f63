"""Synthetic training/evaluation harness."""
from .analysis import (
    BUCKETS,
    ComparisonReport,
    bucket_label,
    bucket_members,
    category_counts,
    compare_models,
    density_map,
    density_partition_report,
    improvement_ratio,
)
from .evaluation import EvalReport, Prediction, collect_predictions, evaluate_ap, iou
from .model import VARIANTS, Model, VariantFlags, build_model, default_variant
from .synthetic import (
    DatasetSpec,
    SyntheticScene,
    generate_dataset,
    restore_dataset,
    snapshot_dataset,
    unit_prototypes,
)
from .training import Adam, dataset_from_run, train

__all__ = [
    "DatasetSpec",
    "SyntheticScene",
    "generate_dataset",
    "snapshot_dataset",
    "restore_dataset",
    "unit_prototypes",
    "Model",
    "VariantFlags",
    "VARIANTS",
    "build_model",
    "default_variant",
    "Adam",
    "train",
    "dataset_from_run",
    "EvalReport",
    "Prediction",
    "collect_predictions",
    "evaluate_ap",
    "iou",
    "BUCKETS",
    "bucket_label",
    "bucket_members",
    "category_counts",
    "density_map",
    "density_partition_report",
    "improvement_ratio",
    "compare_models",
    "ComparisonReport",
]

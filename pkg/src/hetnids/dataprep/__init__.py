"""Flow-table loading, feature selection, splitting, resampling and scaling."""

from hetnids.dataprep.datasets import (
    DomainDataset,
    Scaler,
    SplitBundle,
    apply_scaler,
    fit_scaler,
    select_features,
    stratified_split,
    subsample,
    subsample_size,
)
from hetnids.dataprep.registry import CrossDomainSpec, combination_registry
from hetnids.dataprep.resample import random_undersample, smote
from hetnids.dataprep.synth import SynthConfig, synth_pair
from hetnids.dataprep.tables import RawTable, binarize_labels, clean, load_flow_csv

__all__ = [
    "CrossDomainSpec", "DomainDataset", "RawTable", "Scaler", "SplitBundle", "SynthConfig",
    "apply_scaler", "binarize_labels", "clean", "combination_registry", "fit_scaler",
    "load_flow_csv", "random_undersample", "select_features", "smote", "stratified_split",
    "subsample", "subsample_size", "synth_pair",
]

"""Experiment configuration files.

Configs are JSON objects. Recognised keys (anything else is rejected)::

    mode            "synthetic" | "csv"                      (default "synthetic")
    output_dir      directory for results                    (default "runs/<name>")
    synthetic       SynthConfig fields: latent_dim, dims, samples_per_domain,
                    class_separation, domain_shift, noise_std, map_seeds
    csv_paths       CSV file per dataset, in the order the combination names them
    label_column    label column name                        (default "multilabel")
    normal_token    benign label value                       (default "NORMAL")
    combination     Sr# of the feature-combination table (1..20)
    datasets        dataset names, with explicit feature_ids instead of combination
    feature_ids     list of feature-ID lists, one per domain
    fractions       training-set fractions for domains after the first   (default [1.0])
    repeats         runs per fraction                        (default 5)
    base_seed       run r uses seed base_seed + r            (default 0)
    jobs            parallel runs                            (default 1)
    split_ratios    train/val/test ratios                    (default [0.7, 0.15, 0.15])
    smote_k         SMOTE neighbours                         (default 5)
    train           TrainConfig fields; "kernel" takes policy, sigma2, multipliers
    baseline        BaselineConfig fields
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from hetnids.adaptation import KernelConfig
from hetnids.dataprep.registry import DATASETS, CrossDomainSpec, combination_registry
from hetnids.dataprep.synth import SynthConfig
from hetnids.dataprep.tables import NORMAL_TOKEN
from hetnids.dataprep.registry import LABEL_COLUMN
from hetnids.model import BaselineConfig, TrainConfig


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


TOP_LEVEL_KEYS = {
    "mode", "output_dir", "synthetic", "csv_paths", "label_column", "normal_token",
    "combination", "datasets", "feature_ids", "fractions", "repeats", "base_seed", "jobs",
    "split_ratios", "smote_k", "train", "baseline",
}

PRESETS: dict[str, dict] = {
    "synth_default": {
        "mode": "synthetic",
        "output_dir": "runs/synth_default",
        "fractions": [1.0],
        "repeats": 5,
        "train": {"max_cycles": 200},
    },
}


@dataclass
class ExperimentConfig:
    mode: str = "synthetic"
    output_dir: str = "runs/experiment"
    synthetic: SynthConfig = field(default_factory=SynthConfig)
    csv_paths: list[str] = field(default_factory=list)
    label_column: str = LABEL_COLUMN
    normal_token: str = NORMAL_TOKEN
    combination: int | None = None
    datasets: list[str] | None = None
    feature_ids: list[list[int]] | None = None
    fractions: list[float] = field(default_factory=lambda: [1.0])
    repeats: int = 5
    base_seed: int = 0
    jobs: int = 1
    split_ratios: list[float] = field(default_factory=lambda: [0.7, 0.15, 0.15])
    smote_k: int = 5
    train: TrainConfig = field(default_factory=TrainConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    source_text: str = ""

    def cross_domain_spec(self) -> CrossDomainSpec:
        if self.combination is not None:
            return combination_registry(self.combination)
        return CrossDomainSpec(
            sr_id=0,
            dataset_names=tuple(self.datasets),
            feature_id_lists=tuple(tuple(ids) for ids in self.feature_ids),
        )

    def dataset_paths(self) -> dict[str, str]:
        """Dataset name -> CSV path, pairing ``csv_paths`` with the required datasets."""
        return dict(zip(self.cross_domain_spec().required_datasets, self.csv_paths))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "output_dir": self.output_dir,
            "synthetic": self.synthetic.to_dict(),
            "csv_paths": list(self.csv_paths),
            "label_column": self.label_column,
            "normal_token": self.normal_token,
            "combination": self.combination,
            "datasets": self.datasets,
            "feature_ids": self.feature_ids,
            "fractions": list(self.fractions),
            "repeats": self.repeats,
            "base_seed": self.base_seed,
            "jobs": self.jobs,
            "split_ratios": list(self.split_ratios),
            "smote_k": self.smote_k,
            "train": self.train.to_dict(),
            "baseline": self.baseline.to_dict(),
        }


def _reject_unknown(section: dict, allowed, prefix: str):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}", "unknown key")


def _build(cls, section, prefix: str, convert=None):
    if not isinstance(section, dict):
        raise ConfigError(prefix.rstrip("."), "must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    _reject_unknown(section, names, prefix)
    try:
        return convert(section) if convert else cls(**section)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(prefix.rstrip("."), str(exc)) from None


def _train_from(section: dict) -> TrainConfig:
    section = dict(section)
    if "kernel" in section:
        section["kernel"] = _build(KernelConfig, section["kernel"], "train.kernel.",
                                   KernelConfig.from_dict)
    return TrainConfig.from_dict(section)


def config_from_dict(raw: dict, base_dir: Path | None = None, check_files: bool = True,
                     source_text: str = "") -> ExperimentConfig:
    """Validate ``raw`` and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a JSON object")
    _reject_unknown(raw, TOP_LEVEL_KEYS, "")
    cfg = ExperimentConfig(source_text=source_text)

    mode = raw.get("mode", "synthetic")
    if mode not in ("synthetic", "csv"):
        raise ConfigError("mode", f"must be 'synthetic' or 'csv', got {mode!r}")
    cfg.mode = mode
    for key in ("output_dir", "label_column", "normal_token"):
        if key in raw:
            if not isinstance(raw[key], str):
                raise ConfigError(key, "must be a string")
            setattr(cfg, key, raw[key])
    for key in ("repeats", "base_seed", "jobs", "smote_k"):
        if key in raw:
            if not isinstance(raw[key], int) or isinstance(raw[key], bool):
                raise ConfigError(key, "must be an integer")
            setattr(cfg, key, raw[key])
    if cfg.repeats < 1:
        raise ConfigError("repeats", "must be >= 1")
    if cfg.jobs < 1:
        raise ConfigError("jobs", "must be >= 1")
    if cfg.smote_k < 1:
        raise ConfigError("smote_k", "must be >= 1")

    if "fractions" in raw:
        fr = raw["fractions"]
        if not isinstance(fr, list) or not fr:
            raise ConfigError("fractions", "must be a non-empty list")
        for i, f in enumerate(fr):
            if not isinstance(f, (int, float)) or not 0 < f <= 1:
                raise ConfigError(f"fractions[{i}]", "must lie in (0, 1]")
        cfg.fractions = [float(f) for f in fr]
    if "split_ratios" in raw:
        r = raw["split_ratios"]
        if not isinstance(r, list) or len(r) != 3 or abs(sum(r) - 1.0) > 1e-9:
            raise ConfigError("split_ratios", "must be three numbers summing to 1")
        cfg.split_ratios = [float(x) for x in r]

    if "synthetic" in raw:
        cfg.synthetic = _build(SynthConfig, raw["synthetic"], "synthetic.", SynthConfig.from_dict)
    if "train" in raw:
        cfg.train = _build(TrainConfig, raw["train"], "train.", _train_from)
    if "baseline" in raw:
        cfg.baseline = _build(BaselineConfig, raw["baseline"], "baseline.",
                              BaselineConfig.from_dict)

    has_sr = raw.get("combination") is not None
    has_lists = raw.get("feature_ids") is not None or raw.get("datasets") is not None
    if mode == "csv" or has_sr or has_lists:
        if has_sr and has_lists:
            raise ConfigError("combination", "give either combination or datasets/feature_ids, not both")
        if has_sr:
            sr = raw["combination"]
            if not isinstance(sr, int) or not 1 <= sr <= 20:
                raise ConfigError("combination", "must be an integer in 1..20")
            cfg.combination = sr
        elif has_lists:
            ds, ids = raw.get("datasets"), raw.get("feature_ids")
            if not isinstance(ds, list) or not isinstance(ids, list) or not ds or not ids:
                raise ConfigError("feature_ids", "datasets and feature_ids must both be given")
            if len(ds) not in (1, len(ids)):
                raise ConfigError("datasets", "name one dataset or one per feature list")
            for i, lst in enumerate(ids):
                if not isinstance(lst, list) or not all(isinstance(v, int) and 1 <= v <= 77 for v in lst):
                    raise ConfigError(f"feature_ids[{i}]", "must be a list of IDs in 1..77")
                if len(set(lst)) != len(lst):
                    raise ConfigError(f"feature_ids[{i}]", "duplicate feature IDs")
            if len(ids) < 2:
                raise ConfigError("feature_ids", "at least two domains are needed")
            cfg.datasets, cfg.feature_ids = list(ds), [list(x) for x in ids]
        elif mode == "csv":
            raise ConfigError("combination", "csv mode needs combination or datasets/feature_ids")

    if "csv_paths" in raw:
        paths = raw["csv_paths"]
        if not isinstance(paths, list) or not all(isinstance(p, str) for p in paths):
            raise ConfigError("csv_paths", "must be a list of file paths")
        cfg.csv_paths = [str(Path(base_dir, p)) if base_dir and not Path(p).is_absolute() else p
                         for p in paths]

    if mode == "csv":
        spec = cfg.cross_domain_spec()
        need = spec.required_datasets
        label = f"Sr#{spec.sr_id}" if cfg.combination is not None else "the combination"
        if len(cfg.csv_paths) != len(need):
            noun = "dataset" if len(need) == 1 else "datasets"
            raise ConfigError("csv_paths", f"{label} requires {len(need)} {noun} "
                                           f"({', '.join(need)}), got {len(cfg.csv_paths)} path(s)")
        if check_files:
            for i, p in enumerate(cfg.csv_paths):
                if not Path(p).is_file():
                    raise ConfigError(f"csv_paths[{i}]", f"file not found: {p}")
    if "output_dir" not in raw:
        cfg.output_dir = f"runs/{'synthetic' if mode == 'synthetic' else _exp_name(cfg)}"
    return cfg


def _exp_name(cfg: ExperimentConfig) -> str:
    return f"Sr{cfg.combination}" if cfg.combination is not None else "custom"


def parse_config(path_or_preset: str, check_files: bool = True) -> ExperimentConfig:
    """Load a JSON config file, or a named preset such as ``synth_default``."""
    if path_or_preset in PRESETS and not Path(path_or_preset).exists():
        text = json.dumps(PRESETS[path_or_preset], indent=2)
        return config_from_dict(json.loads(text), None, check_files, text)
    path = Path(path_or_preset)
    if not path.is_file():
        raise ConfigError("", f"config file not found: {path}")
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(raw, path.parent, check_files, text)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def known_datasets() -> list[str]:
    return list(DATASETS)

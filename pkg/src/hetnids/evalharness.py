"""Metrics, repeated seeded experiments and report export."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from hetnids.dataprep.datasets import (
    DomainDataset,
    apply_scaler,
    fit_scaler,
    select_features,
    stratified_split,
    subsample,
)
from hetnids.dataprep.registry import CrossDomainSpec
from hetnids.dataprep.resample import random_undersample, smote
from hetnids.dataprep.synth import SynthConfig, synth_pair
from hetnids.dataprep.tables import RawTable
from hetnids.model import (
    BaselineConfig,
    TrainConfig,
    build_model,
    predict,
    predict_baseline,
    train_baseline,
    train_cyclic,
)
from hetnids.seeding import derive_seed

log = logging.getLogger(__name__)

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")
MODELS = ("baseline", "proposed")
DEFAULT_RATIOS = (0.7, 0.15, 0.15)


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    precision_undefined: bool = False
    recall_undefined: bool = False


def evaluate(preds, labels) -> Metrics:
    """Binary metrics with ATTACK (1) as the positive class.

    Precision or recall with a zero denominator is reported as 0 and flagged;
    F1 is 0 whenever precision + recall is 0.
    """
    preds = np.asarray(preds).astype(np.int64).ravel()
    labels = np.asarray(labels).astype(np.int64).ravel()
    if preds.shape != labels.shape:
        raise ValueError(f"length mismatch: {preds.size} predictions, {labels.size} labels")
    if preds.size == 0:
        raise ValueError("cannot evaluate an empty prediction vector")
    tp = int(np.sum((preds == 1) & (labels == 1)))
    fp = int(np.sum((preds == 1) & (labels == 0)))
    tn = int(np.sum((preds == 0) & (labels == 0)))
    fn = int(np.sum((preds == 0) & (labels == 1)))
    p_undef, r_undef = tp + fp == 0, tp + fn == 0
    precision = 0.0 if p_undef else tp / (tp + fp)
    recall = 0.0 if r_undef else tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return Metrics((tp + tn) / preds.size, precision, recall, f1, tp, fp, tn, fn, p_undef, r_undef)


# --- data preparation --------------------------------------------------------


@dataclass
class PreparedDomain:
    name: str
    train: DomainDataset
    val: DomainDataset
    test: DomainDataset
    scaler_means: list[float]
    scaler_stds: list[float]

    def hashes(self) -> dict[str, str]:
        return {s: getattr(self, s).content_hash() for s in ("train", "val", "test")}


def prepare_domains(raw: list[DomainDataset], fraction: float, run_seed: int,
                    ratios=DEFAULT_RATIOS, smote_k: int = 5) -> list[PreparedDomain]:
    """split -> subsample (domains after the first) -> SMOTE -> undersample -> scale.

    Subsampling touches only the training split, so every domain keeps its
    untouched test split.
    """
    out = []
    for k, ds in enumerate(raw):
        sp = stratified_split(ds, ratios, derive_seed(run_seed, "split", k))
        train = sp.train
        if k > 0 and fraction < 1.0:
            train = subsample(train, fraction, derive_seed(run_seed, "subsample", k))
        train = smote(train, smote_k, derive_seed(run_seed, "smote", k))
        train = random_undersample(train, derive_seed(run_seed, "undersample", k))
        scaler = fit_scaler(train)
        out.append(PreparedDomain(
            ds.name,
            apply_scaler(scaler, train),
            apply_scaler(scaler, sp.val),
            apply_scaler(scaler, sp.test),
            scaler.means.tolist(),
            scaler.stds.tolist(),
        ))
    return out


def domains_from_tables(spec: CrossDomainSpec, tables: dict[str, RawTable]) -> list[DomainDataset]:
    """Feature views for every domain of ``spec`` from cleaned, binarized tables."""
    out = []
    for k, ids in enumerate(spec.feature_id_lists):
        name = spec.domain_dataset(k)
        if name not in tables:
            raise KeyError(f"Sr#{spec.sr_id} needs dataset {name!r}, which was not supplied")
        out.append(select_features(tables[name], ids, f"{name}#{k + 1}"))
    return out


# --- experiment --------------------------------------------------------------


@dataclass
class RunRecord:
    run: int
    seed: int
    fraction: float
    model: str
    domain: int
    domain_name: str
    metrics: Metrics | None
    data_hash: str
    status: str = "ok"


@dataclass
class AggregateReport:
    experiment: str
    fractions: list[float]
    runs: int
    seeds: list[int]
    domain_names: list[str]
    models: list[str]
    records: list[RunRecord] = field(default_factory=list)
    mmd_traces: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    data_hashes: dict[str, dict] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def cell(self, model: str, domain: int, fraction: float) -> list[RunRecord]:
        return [r for r in self.records
                if r.model == model and r.domain == domain and r.fraction == fraction]

    def aggregate(self, model: str, domain: int, fraction: float, metric: str):
        """``(mean, std, n_ok)``; std is the sample std and 0 for a single run."""
        vals = [getattr(r.metrics, metric) for r in self.cell(model, domain, fraction)
                if r.status == "ok"]
        if not vals:
            return None, None, 0
        mean = float(np.mean(vals))
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        return mean, std, len(vals)

    def aggregates(self) -> list[dict]:
        rows = []
        for model in self.models:
            for d, dname in enumerate(self.domain_names):
                for f in self.fractions:
                    cell = self.cell(model, d, f)
                    failed = [r.status for r in cell if r.status != "ok"]
                    for metric in METRIC_NAMES:
                        mean, std, n = self.aggregate(model, d, f, metric)
                        rows.append({
                            "experiment": self.experiment, "model": model, "domain": dname,
                            "fraction": f, "metric": metric, "mean": mean, "std": std,
                            "n_runs": n,
                            "status": "ok" if not failed else ("failed" if n == 0 else "partial"),
                        })
        return rows


def _run_once(args):
    (source, tables, fraction, r, run_seed, cfg, bcfg, models, ratios, smote_k) = args
    if isinstance(source, SynthConfig):
        raw = synth_pair(source, derive_seed(run_seed, "synth"))
    else:
        raw = domains_from_tables(source, tables)
    names = [d.name for d in raw]
    try:
        prepared = prepare_domains(raw, fraction, run_seed, ratios, smote_k)
    except Exception as exc:  # noqa: BLE001 - recorded as a failure marker
        log.warning("run %d fraction %s: preparation failed: %s", r, fraction, exc)
        recs = [RunRecord(r, run_seed, fraction, m, k, names[k], None, "", f"failed: {exc}")
                for m in models for k in range(len(raw))]
        return recs, None, {}
    hashes = {p.name: p.hashes() for p in prepared}
    combined_hash = {k: "|".join(h.values()) for k, h in enumerate(hashes.values())}
    recs, trace = [], None

    if "baseline" in models:
        for k, p in enumerate(prepared):
            try:
                b = replace(bcfg, seed=derive_seed(run_seed, "baseline", k))
                net, _ = train_baseline(p.train, p.val, b)
                m = evaluate(predict_baseline(net, p.test.features), p.test.labels)
                recs.append(RunRecord(r, run_seed, fraction, "baseline", k, p.name, m,
                                      combined_hash[k]))
            except Exception as exc:  # noqa: BLE001
                recs.append(RunRecord(r, run_seed, fraction, "baseline", k, p.name, None,
                                      combined_hash[k], f"failed: {exc}"))
    if "proposed" in models:
        try:
            pcfg = replace(cfg, seed=derive_seed(run_seed, "proposed"))
            model = build_model([p.train.d for p in prepared], pcfg)
            model, hist = train_cyclic(model, [(p.train, p.val) for p in prepared], pcfg)
            trace = hist.mmd_trace()
            for k, p in enumerate(prepared):
                m = evaluate(predict(model, k, p.test.features), p.test.labels)
                recs.append(RunRecord(r, run_seed, fraction, "proposed", k, p.name, m,
                                      combined_hash[k]))
        except Exception as exc:  # noqa: BLE001
            for k, p in enumerate(prepared):
                recs.append(RunRecord(r, run_seed, fraction, "proposed", k, p.name, None,
                                      combined_hash[k], f"failed: {exc}"))
    return recs, trace, hashes


def run_experiment(source, fractions=(1.0,), R: int = 5, base_seed: int = 0,
                   cfg: TrainConfig | None = None, baseline_cfg: BaselineConfig | None = None,
                   *, tables: dict[str, RawTable] | None = None, models=MODELS,
                   experiment: str | None = None, ratios=DEFAULT_RATIOS, smote_k: int = 5,
                   jobs: int = 1) -> AggregateReport:
    """Prepare, train and evaluate ``R`` seeded runs per fraction.

    ``source`` is a :class:`SynthConfig` or a :class:`CrossDomainSpec`; the
    latter needs ``tables`` mapping dataset names to cleaned, binarized
    tables. Run ``r`` uses seed ``base_seed + r``; baseline and proposed
    models of one run consume the same prepared splits.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    cfg = cfg or TrainConfig()
    baseline_cfg = baseline_cfg or BaselineConfig()
    models = list(models)
    fractions = [float(f) for f in fractions]
    if isinstance(source, SynthConfig):
        names = [f"synth{k + 1}" for k in range(len(source.dims))]
        experiment = experiment or "synthetic"
        src_cfg = {"synthetic": source.to_dict()}
    elif isinstance(source, CrossDomainSpec):
        if tables is None:
            raise ValueError("a CrossDomainSpec source needs loaded tables")
        names = [f"{source.domain_dataset(k)}#{k + 1}" for k in range(source.n_domains)]
        experiment = experiment or f"Sr{source.sr_id}"
        src_cfg = {"combination": {"sr_id": source.sr_id,
                                   "datasets": list(source.dataset_names),
                                   "feature_ids": [list(x) for x in source.feature_id_lists]}}
    else:
        raise TypeError("source must be a SynthConfig or CrossDomainSpec")

    seeds = [base_seed + r for r in range(R)]
    report = AggregateReport(
        experiment, fractions, R, seeds, names, models,
        config={**src_cfg, "train": cfg.to_dict(), "baseline": baseline_cfg.to_dict(),
                "ratios": list(ratios), "smote_k": smote_k, "base_seed": base_seed},
    )
    jobs_args = [(source, tables, f, r, seeds[r], cfg, baseline_cfg, models, ratios, smote_k)
                 for f in fractions for r in range(R)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_run_once, jobs_args))
    else:
        results = [_run_once(a) for a in jobs_args]
    for args, (recs, trace, hashes) in zip(jobs_args, results):
        f, r = args[2], args[3]
        report.records.extend(recs)
        if trace is not None:
            report.mmd_traces[f"{r}:{f}"] = trace
        report.data_hashes[f"{r}:{f}"] = hashes
    return report


# --- export ------------------------------------------------------------------

CSV_FIELDS = ("experiment", "model", "domain", "fraction", "metric", "mean", "std", "n_runs",
              "status")


def _report_to_dict(report: AggregateReport) -> dict:
    return {
        "experiment": report.experiment,
        "fractions": report.fractions,
        "runs": report.runs,
        "seeds": report.seeds,
        "domain_names": report.domain_names,
        "models": report.models,
        "config": report.config,
        "data_hashes": report.data_hashes,
        "records": [
            {**asdict(r), "metrics": asdict(r.metrics) if r.metrics else None}
            for r in report.records
        ],
        "mmd_traces": {k: [list(p) for p in v] for k, v in report.mmd_traces.items()},
        "aggregates": report.aggregates(),
    }


def export_report(report: AggregateReport, directory) -> list[Path]:
    """Write ``report.full.json``, ``report.csv`` and ``mmd_trace_run<r>.csv`` files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    full = directory / "report.full.json"
    full.write_text(json.dumps(_report_to_dict(report), indent=1))
    written.append(full)

    flat = directory / "report.csv"
    with flat.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for row in report.aggregates():
            w.writerow({k: ("" if row[k] is None else row[k]) for k in CSV_FIELDS})
    written.append(flat)

    by_run: dict[int, list[tuple[float, int, float]]] = {}
    for key, trace in report.mmd_traces.items():
        r, f = key.split(":")
        by_run.setdefault(int(r), []).extend((float(f), c, m) for c, m in trace)
    for r, rows in sorted(by_run.items()):
        path = directory / f"mmd_trace_run{r}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["fraction", "cycle", "mean_mmd"])
            for f, c, m in rows:
                w.writerow([f, c, repr(m)])
        written.append(path)
    return written


def load_report(directory) -> AggregateReport:
    data = json.loads((Path(directory) / "report.full.json").read_text())
    records = [
        RunRecord(**{**r, "metrics": Metrics(**r["metrics"]) if r["metrics"] else None})
        for r in data["records"]
    ]
    return AggregateReport(
        data["experiment"], data["fractions"], data["runs"], data["seeds"],
        data["domain_names"], data["models"], records,
        {k: [tuple(p) for p in v] for k, v in data["mmd_traces"].items()},
        data["data_hashes"], data["config"],
    )

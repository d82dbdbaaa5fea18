import csv

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import f1_score, precision_score, recall_score

from hetnids.dataprep.synth import SynthConfig, synth_pair
from hetnids.dataprep.tables import binarize_labels, clean, load_flow_csv
from hetnids.dataprep.registry import CrossDomainSpec
from hetnids.evalharness import (
    AggregateReport,
    Metrics,
    RunRecord,
    evaluate,
    export_report,
    load_report,
    prepare_domains,
    run_experiment,
)
from hetnids.model import BaselineConfig, TrainConfig
from conftest import write_flow_csv

FAST = TrainConfig(max_cycles=2, cycle_subset_size=64, batch_size=32, latent_dim=4,
                   private_hidden=8, shared_hidden=4)
FAST_B = BaselineConfig(hidden=(8, 4), epochs=2)
SMALL = SynthConfig(samples_per_domain=(200, 200))


def test_evaluate_examples():
    m = evaluate([1, 0, 1, 0], [1, 1, 0, 0])
    assert (m.accuracy, m.precision, m.recall, m.f1) == (0.5, 0.5, 0.5, 0.5)
    assert (m.tp, m.fp, m.tn, m.fn) == (1, 1, 1, 1)
    p = evaluate([1, 0, 1], [1, 0, 1])
    assert (p.accuracy, p.precision, p.recall, p.f1) == (1.0, 1.0, 1.0, 1.0)
    z = evaluate([0, 0, 0], [1, 0, 1])
    assert z.precision == z.recall == z.f1 == 0.0
    assert z.precision_undefined and not z.recall_undefined


def test_evaluate_errors():
    with pytest.raises(ValueError):
        evaluate([1, 0], [1])
    with pytest.raises(ValueError):
        evaluate([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_metric_consistency(pairs):
    preds, labels = zip(*pairs)
    m = evaluate(preds, labels)
    assert m.tp + m.fp + m.tn + m.fn == len(pairs)
    assert m.accuracy == (m.tp + m.tn) / len(pairs)
    if m.precision + m.recall > 0:
        assert m.f1 * (m.precision + m.recall) == pytest.approx(2 * m.precision * m.recall)
    assert m.precision == pytest.approx(precision_score(labels, preds, zero_division=0))
    assert m.recall == pytest.approx(recall_score(labels, preds, zero_division=0))
    assert m.f1 == pytest.approx(f1_score(labels, preds, zero_division=0))


def test_prepare_domains_subsamples_later_domains_only():
    raw = synth_pair(SynthConfig(samples_per_domain=(1000, 1000)), 0)
    full = prepare_domains(raw, 1.0, 3)
    half = prepare_domains(raw, 0.5, 3)
    assert half[0].hashes() == full[0].hashes()
    assert half[1].train.n < full[1].train.n
    # same test rows; only the scaler (fit on the smaller train split) differs
    def unscaled(p):
        return p.test.features * np.array(p.scaler_stds) + np.array(p.scaler_means)

    np.testing.assert_allclose(unscaled(half[1]), unscaled(full[1]), rtol=1e-12, atol=1e-12)
    for p in half:
        a, b = p.train.class_counts()
        assert a == b
        assert np.abs(p.train.features.mean(axis=0)).max() < 1e-9


def test_run_experiment_r1_zero_std_and_counts():
    rep = run_experiment(SMALL, [1.0], R=1, base_seed=0, cfg=FAST, baseline_cfg=FAST_B)
    assert rep.seeds == [0]
    rows = rep.aggregates()
    assert len(rows) == 2 * 2 * 1 * 4
    assert all(r["std"] == 0.0 and r["n_runs"] == 1 and r["status"] == "ok" for r in rows)


def test_run_experiment_deterministic_and_fair():
    a = run_experiment(SMALL, [1.0, 0.5], R=2, base_seed=7, cfg=FAST, baseline_cfg=FAST_B)
    b = run_experiment(SMALL, [1.0, 0.5], R=2, base_seed=7, cfg=FAST, baseline_cfg=FAST_B)
    assert a.aggregates() == b.aggregates()
    assert a.seeds == [7, 8]
    # baseline and proposed records of a run share one data hash per domain
    for r in a.records:
        twin = [q for q in a.records if q.run == r.run and q.fraction == r.fraction
                and q.domain == r.domain]
        assert len({q.data_hash for q in twin}) == 1


def test_parallel_matches_serial():
    a = run_experiment(SMALL, [1.0], R=2, cfg=FAST, baseline_cfg=FAST_B, jobs=1)
    b = run_experiment(SMALL, [1.0], R=2, cfg=FAST, baseline_cfg=FAST_B, jobs=2)
    assert a.aggregates() == b.aggregates()


def test_export_counts_and_round_trip(tmp_path):
    rep = run_experiment(SynthConfig(samples_per_domain=(400, 400)), [0.1, 0.5, 0.75, 1.0], R=2,
                         cfg=FAST, baseline_cfg=FAST_B)
    export_report(rep, tmp_path)
    with (tmp_path / "report.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 64
    assert list(rows[0]) == ["experiment", "model", "domain", "fraction", "metric", "mean",
                             "std", "n_runs", "status"]
    back = load_report(tmp_path)
    assert back.aggregates() == rep.aggregates()
    traces = sorted(p.name for p in tmp_path.glob("mmd_trace_run*.csv"))
    assert traces == ["mmd_trace_run0.csv", "mmd_trace_run1.csv"]


def test_aggregates_recomputed_from_raw(tmp_path):
    rep = run_experiment(SMALL, [1.0], R=3, cfg=FAST, baseline_cfg=FAST_B)
    export_report(rep, tmp_path)
    full = json.loads((tmp_path / "report.full.json").read_text())
    for agg in full["aggregates"]:
        d = full["domain_names"].index(agg["domain"])
        vals = [r["metrics"][agg["metric"]] for r in full["records"]
                if r["model"] == agg["model"] and r["domain"] == d]
        assert agg["mean"] == pytest.approx(np.mean(vals), abs=1e-12)
        assert agg["std"] == pytest.approx(np.std(vals, ddof=1), abs=1e-12)


def test_failure_marker_row(tmp_path):
    m = Metrics(1, 1, 1, 1, 1, 0, 1, 0)
    rep = AggregateReport("x", [1.0], 2, [0, 1], ["a"], ["baseline"], [
        RunRecord(0, 0, 1.0, "baseline", 0, "a", m, "h"),
        RunRecord(1, 1, 1.0, "baseline", 0, "a", None, "h", "failed: boom"),
    ])
    assert rep.aggregates()[0]["status"] == "partial"
    rep.records = rep.records[1:]
    export_report(rep, tmp_path)
    with (tmp_path / "report.csv").open() as fh:
        row = next(csv.DictReader(fh))
    assert row["mean"] == "" and row["std"] == "" and row["status"] == "failed"


def test_failed_preparation_is_recorded():
    tiny = SynthConfig(samples_per_domain=(20, 20))  # too small for SMOTE with k=5 after a 10 % cut
    rep = run_experiment(tiny, [0.1], R=1, cfg=FAST, baseline_cfg=FAST_B)
    assert rep.records and all(r.status.startswith("failed") for r in rep.records)


def test_csv_source(tmp_path):
    rng = np.random.default_rng(0)
    rows = []
    for i in range(300):
        lab = "NORMAL" if i % 3 else "DoS"
        shift = 0 if lab == "NORMAL" else 3
        rows.append(tuple(np.round(rng.normal(size=4) + shift, 6)) + (lab,))
    p = write_flow_csv(tmp_path / "a.csv", rows)
    table = binarize_labels(clean(load_flow_csv(p)))
    spec = CrossDomainSpec(0, ("A",), ((1, 2), (3, 4)))
    rep = run_experiment(spec, [1.0], R=1, cfg=FAST, baseline_cfg=FAST_B, tables={"A": table})
    assert rep.domain_names == ["A#1", "A#2"]
    assert all(r.status == "ok" for r in rep.records)
    with pytest.raises(ValueError):
        run_experiment(spec, [1.0], R=1)


def test_invalid_r():
    with pytest.raises(ValueError):
        run_experiment(SMALL, [1.0], R=0)

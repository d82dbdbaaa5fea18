import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetnids.dataprep.datasets import DomainDataset
from hetnids.dataprep.resample import random_undersample, smote
from conftest import make_domain


def test_smote_balances_and_keeps_originals():
    ds = make_domain(n=300, attack_frac=0.2)
    out = smote(ds, k=5, seed=1)
    n0, n1 = out.class_counts()
    assert n0 == n1 == ds.class_counts()[0]
    np.testing.assert_array_equal(out.features[: ds.n], ds.features)
    np.testing.assert_array_equal(out.labels[: ds.n], ds.labels)


def test_smote_samples_on_neighbour_segments():
    ds = make_domain(n=200, attack_frac=0.25, seed=4)
    out, (base, nn, u) = smote(ds, k=5, seed=2, return_pairs=True)
    synth = out.features[ds.n:]
    assert np.all((u >= 0) & (u < 1))
    expected = ds.features[base] + u[:, None] * (ds.features[nn] - ds.features[base])
    np.testing.assert_allclose(synth, expected, rtol=0, atol=1e-12)
    # independent neighbour oracle: brute-force k nearest minority rows
    minority = np.flatnonzero(ds.labels == 1)
    Xm = ds.features[minority]
    for b, n in zip(base[:50], nn[:50]):
        d = ((Xm - ds.features[b]) ** 2).sum(axis=1)
        d[minority == b] = np.inf
        knn = set(minority[np.argsort(d, kind="stable")[:5]])
        assert n in knn
    assert all(ds.labels[base] == 1) and all(ds.labels[nn] == 1)


def test_smote_k_larger_than_minority():
    ds = DomainDataset("s", np.arange(20.0)[:, None], [0] * 16 + [1] * 4)
    with pytest.raises(ValueError, match="k=5"):
        smote(ds, k=5)
    assert smote(ds, k=3).class_counts() == (16, 16)


def test_smote_balanced_input_unchanged():
    ds = DomainDataset("b", np.arange(8.0)[:, None], [0, 1] * 4)
    assert smote(ds).content_hash() == ds.content_hash()


def test_smote_deterministic():
    ds = make_domain(n=150)
    assert smote(ds, seed=9).content_hash() == smote(ds, seed=9).content_hash()


def test_undersample_exact_balance_subset():
    ds = make_domain(n=300, attack_frac=0.3)
    out = random_undersample(ds, seed=0)
    n0, n1 = out.class_counts()
    assert n0 == n1 == ds.class_counts()[1]
    rows = set(map(bytes, ds.features))
    assert all(bytes(r) in rows for r in out.features)


@settings(max_examples=25, deadline=None)
@given(st.integers(6, 80), st.integers(6, 80), st.integers(0, 1000))
def test_smote_then_undersample_balanced(n0, n1, seed):
    rng = np.random.default_rng(seed)
    y = np.array([0] * n0 + [1] * n1)
    ds = DomainDataset("p", rng.normal(size=(n0 + n1, 3)), y)
    out = random_undersample(smote(ds, 5, seed), seed)
    a, b = out.class_counts()
    assert a == b == max(n0, n1)

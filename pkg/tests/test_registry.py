import warnings

import pytest

from hetnids.dataprep.registry import (
    COMBINATION_LABELS,
    DATASETS,
    FEATURE_NAMES,
    LABEL_ID,
    CrossDomainSpec,
    combination_registry,
)


def test_feature_catalogue_covers_ids_1_to_77():
    assert sorted(FEATURE_NAMES) == list(range(1, 78))
    assert LABEL_ID == 78


def test_dataset_sizes():
    rows = {k: v["rows"] for k, v in DATASETS.items()}
    assert rows == {"CIC17": 152_055, "CIC18": 199_997, "SDN20": 205_167, "ANDMAL": 100_521}
    assert DATASETS["CIC18"]["attack_pct"] == 26.2


def test_sr14_two_datasets_verbatim():
    spec = combination_registry(14)
    assert spec.dataset_names == ("CIC17", "CIC18")
    assert spec.feature_id_lists == (
        (5, 12, 15, 25, 33, 51, 64, 66, 67, 77),
        (11, 17, 26, 29, 31, 32, 37, 45, 56, 73),
    )
    assert spec.required_datasets == ("CIC17", "CIC18")
    assert spec.corrections == ()


def test_sr6_dot_read_as_comma():
    spec = combination_registry(6)
    assert spec.feature_id_lists[0] == (12, 14, 18, 53, 70)
    assert spec.printed[0] == "12,14,18,53.70"
    assert any("53.70" in c for c in spec.corrections)


def test_sr5_label_column_dropped_with_warning():
    with pytest.warns(UserWarning, match="label column"):
        spec = combination_registry(5)
    assert spec.feature_id_lists[1] == (24, 29, 30, 41, 44)
    assert len(spec.feature_id_lists[0]) == 30


def test_sr20_lists_kept_as_printed():
    spec = combination_registry(20)
    assert COMBINATION_LABELS[20] == "10-10-10"
    assert [len(x) for x in spec.feature_id_lists] == [15, 17, 15]
    assert spec.n_domains == 3
    assert spec.required_datasets == ("CIC17", "CIC18", "SDN20")


def test_single_dataset_feeds_both_domains():
    spec = combination_registry(2)
    assert spec.domain_dataset(0) == spec.domain_dataset(1) == "CIC18"
    assert spec.required_datasets == ("CIC18",)


@pytest.mark.parametrize("sr", range(1, 21))
def test_every_row_valid(sr):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spec = combination_registry(sr)
    for ids in spec.feature_id_lists:
        assert all(1 <= i <= 77 for i in ids)
        assert len(set(ids)) == len(ids)
    sizes = [int(s) for s in COMBINATION_LABELS[sr].split("-")]
    if sr not in (5, 20):
        assert [len(x) for x in spec.feature_id_lists] == sizes


def test_unknown_sr_raises():
    with pytest.raises(KeyError):
        combination_registry(21)


def test_spec_validation():
    with pytest.raises(ValueError):
        CrossDomainSpec(0, ("A", "B", "C"), ((1,), (2,)))
    with pytest.raises(ValueError):
        CrossDomainSpec(0, ("A",), ((1, 1), (2,)))

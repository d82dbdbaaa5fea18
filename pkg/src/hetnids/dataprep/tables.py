"""Flow CSV ingestion, cleaning and label consolidation."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from hetnids.dataprep.registry import FEATURE_NAMES, LABEL_COLUMN

NORMAL_TOKEN = "NORMAL"


class CsvFormatError(ValueError):
    """Raised for malformed flow CSVs (missing columns, ragged rows)."""


@dataclass
class RawTable:
    """A flow table as read from disk.

    ``values`` holds every non-label column as float64 with NaN marking a
    missing cell. ``labels`` holds the label column: strings straight from
    the file, or 0/1 integers after :func:`binarize_labels`. Missing labels
    are stored as ``None``.
    """

    column_names: list[str]
    values: np.ndarray
    labels: np.ndarray
    label_column_name: str = LABEL_COLUMN

    def __post_init__(self):
        if self.label_column_name not in self.column_names:
            raise CsvFormatError(f"label column {self.label_column_name!r} not in table")
        if self.values.ndim != 2 or self.values.shape[1] != len(self.column_names) - 1:
            raise CsvFormatError("values must have one column per non-label column")
        if len(self.labels) != len(self.values):
            raise CsvFormatError("labels and values differ in length")

    @property
    def feature_columns(self) -> list[str]:
        return [c for c in self.column_names if c != self.label_column_name]

    @property
    def n_rows(self) -> int:
        return len(self.values)

    def take(self, idx: np.ndarray) -> "RawTable":
        return RawTable(
            list(self.column_names), self.values[idx], self.labels[idx], self.label_column_name
        )


def _normalize_name(name: str) -> str:
    return re.sub(r"[^0-9a-z]", "", name.strip().lower())


def load_flow_csv(path: str | Path, label_column: str = LABEL_COLUMN) -> RawTable:
    """Read a flow CSV with a header row.

    Non-numeric, empty and infinite cells become NaN so that :func:`clean`
    drops them together with genuine nulls.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"flow CSV not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file, header row expected") from None
        if label_column not in header:
            raise CsvFormatError(f"{path}: label column {label_column!r} missing from header")
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {i} has {len(row)} fields, header has {len(header)}"
                )
            rows.append(row)

    frame = pd.DataFrame(rows, columns=header, dtype=object)
    label_raw = frame.pop(label_column)
    labels = np.array(
        [None if (s is None or str(s).strip() == "") else str(s).strip() for s in label_raw],
        dtype=object,
    )
    numeric = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    if numeric.size:
        numeric[~np.isfinite(numeric)] = np.nan
    feature_cols = list(frame.columns)
    return RawTable(feature_cols + [label_column], numeric.reshape(len(rows), -1), labels,
                    label_column)


def clean(table: RawTable) -> RawTable:
    """Drop rows with any missing cell, then collapse exact duplicate rows.

    Survivors keep their original order; the first occurrence of a duplicate
    is the one retained.
    """
    missing_label = np.array([lab is None for lab in table.labels], dtype=bool)
    keep = ~(np.isnan(table.values).any(axis=1) | missing_label)
    idx = np.flatnonzero(keep)
    if idx.size:
        frame = pd.DataFrame(table.values[idx])
        frame["__label__"] = table.labels[idx]
        dup = frame.duplicated(keep="first").to_numpy()
        idx = idx[~dup]
    if idx.size == 0:
        raise ValueError("no rows survive cleaning")
    return table.take(idx)


def binarize_labels(table: RawTable, normal_token: str = NORMAL_TOKEN) -> RawTable:
    """Collapse every attack type into 1; rows equal to ``normal_token`` become 0."""
    token = normal_token.strip().lower()
    labels = np.array(
        [0 if (lab is not None and str(lab).strip().lower() == token) else 1
         for lab in table.labels],
        dtype=np.int64,
    )
    return RawTable(list(table.column_names), table.values, labels, table.label_column_name)


def feature_column_index(table: RawTable, feature_ids) -> list[int]:
    """Map feature IDs to column positions in ``table.values`` by name."""
    lookup = {_normalize_name(c): j for j, c in enumerate(table.feature_columns)}
    out = []
    for fid in feature_ids:
        if fid not in FEATURE_NAMES:
            raise KeyError(f"unknown feature ID {fid}; valid IDs are 1..77")
        key = _normalize_name(FEATURE_NAMES[fid])
        if key not in lookup:
            raise KeyError(f"feature ID {fid} ({FEATURE_NAMES[fid]}) not found in table columns")
        out.append(lookup[key])
    return out

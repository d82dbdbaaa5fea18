import numpy as np
import pytest

from hetnids.dataprep.datasets import DomainDataset
from hetnids.dataprep.registry import FEATURE_NAMES


def make_domain(n=200, d=4, attack_frac=0.3, seed=0, name="dom", shift=2.0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < attack_frac).astype(np.int64)
    y[:3], y[3:6] = 0, 1  # both classes always present
    X = rng.normal(size=(n, d)) + shift * y[:, None]
    return DomainDataset(name, X, y, list(range(1, d + 1)))


@pytest.fixture
def domain():
    return make_domain()


def write_flow_csv(path, rows, ids=(1, 2, 3, 4), label="multilabel"):
    """rows: list of (values..., label) tuples; header uses catalogue names."""
    header = [FEATURE_NAMES[i] for i in ids] + [label]
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

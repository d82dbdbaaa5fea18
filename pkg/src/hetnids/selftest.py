"""Oracle checks runnable from an installed package (``hetnids selftest``)."""

from __future__ import annotations

import numpy as np

from hetnids import nncore
from hetnids.adaptation import KernelConfig, mmd2_backward, mmd2_biased
from hetnids.dataprep.datasets import subsample_size

# dataset size -> sizes at 10 %, 50 %, 75 %
SUBSAMPLE_TABLE = {
    152_055: (15_206, 76_028, 114_041),
    199_997: (20_000, 99_998, 149_998),
    205_167: (20_517, 102_584, 153_875),
    100_521: (10_052, 50_260, 75_391),
}


def naive_mmd2(Z1, Z2, sigma2):
    """Triple-sum MMD^2 with scalar kernel calls; no vectorisation."""
    import math

    def k(a, b):
        return math.exp(-sum((x - y) ** 2 for x, y in zip(a, b)) / (2.0 * sigma2))

    N, M = len(Z1), len(Z2)
    s11 = sum(k(a, b) for a in Z1 for b in Z1)
    s22 = sum(k(a, b) for a in Z2 for b in Z2)
    s12 = sum(k(a, b) for a in Z1 for b in Z2)
    return s11 / N**2 + s22 / M**2 - 2.0 * s12 / (N * M)


def rel_err(a, b, floor: float = 1e-6) -> float:
    """Elementwise ``|a - b| / max(|a| + |b|, floor)``, maximised.

    The floor keeps entries whose true gradient is exactly zero (finite
    differences return round-off there) from dominating.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(floor, np.abs(a) + np.abs(b))))


def check_mmd(trials: int = 20, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        D = int(rng.integers(1, 9))
        Z1 = rng.normal(size=(int(rng.integers(1, 17)), D))
        Z2 = rng.normal(size=(int(rng.integers(1, 17)), D)) + rng.normal()
        s2 = float(rng.uniform(0.1, 5.0))
        kc = KernelConfig("fixed", s2)
        worst = max(worst, abs(mmd2_biased(Z1, Z2, kc) - naive_mmd2(Z1.tolist(), Z2.tolist(), s2)))
    return worst < 1e-10, f"max |vectorised - naive| = {worst:.2e}"


def check_mmd_gradient(seed: int = 0, h: float = 1e-5):
    rng = np.random.default_rng(seed)
    Z1, Z2 = rng.normal(size=(5, 3)), rng.normal(size=(4, 3)) + 0.5
    kc = KernelConfig("fixed", 1.3)
    g1, g2 = mmd2_backward(Z1, Z2, kc)
    worst = 0.0
    for Z, g, first in ((Z1, g1, True), (Z2, g2, False)):
        num = np.zeros_like(Z)
        for idx in np.ndindex(Z.shape):
            old = Z[idx]
            Z[idx] = old + h
            up = mmd2_biased(Z1, Z2, kc)
            Z[idx] = old - h
            dn = mmd2_biased(Z1, Z2, kc)
            Z[idx] = old
            num[idx] = (up - dn) / (2 * h)
        worst = max(worst, rel_err(num, g))
    return worst < 1e-6, f"max relative error {worst:.2e}"


def check_network_gradient(seed: int = 0, h: float = 1e-5):
    rng = np.random.default_rng(seed)
    specs = [nncore.linear(4, 6), nncore.batchnorm(6), nncore.relu(6), nncore.dropout(6, 0.3),
             nncore.linear(6, 3), nncore.sigmoid(3)]
    net = nncore.init_mlp(specs, seed)
    for p in net.params:
        if "gamma" in p:
            p["gamma"][:] = rng.uniform(0.5, 1.5, size=p["gamma"].shape)
            p["beta"][:] = rng.normal(size=p["beta"].shape)
    X = rng.normal(size=(7, 4))
    W = rng.normal(size=(7, 3))

    def loss():
        out, _ = nncore.forward(net, X, "train", seed=11, update_stats=False)
        return float(np.sum(out * W))

    out, cache = nncore.forward(net, X, "train", seed=11, update_stats=False)
    grads, _ = nncore.backward(net, cache, W)
    worst = 0.0
    for i, name, arr in net.trainable():
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss()
            arr[idx] = old - h
            dn = loss()
            arr[idx] = old
            num[idx] = (up - dn) / (2 * h)
        worst = max(worst, rel_err(num, grads[i][name]))
    return worst < 1e-4, f"max relative error {worst:.2e}"


def check_subsample_table():
    bad = []
    for n, expected in SUBSAMPLE_TABLE.items():
        for f, want in zip((0.10, 0.50, 0.75), expected):
            got = subsample_size(n, f)
            if got != want:
                bad.append(f"{n}x{f}: {got} != {want}")
    return not bad, "all 12 sizes match" if not bad else "; ".join(bad)


CHECKS = {
    "mmd_bruteforce": check_mmd,
    "mmd_gradient": check_mmd_gradient,
    "network_gradient": check_network_gradient,
    "subsample_rounding": check_subsample_table,
}


def run_all(echo=print) -> bool:
    ok_all = True
    for name, fn in CHECKS.items():
        ok, detail = fn()
        ok_all &= ok
        echo(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok_all

"""Gaussian-kernel MMD between latent batches, with its analytic gradient."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

DEFAULT_MIXTURE = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidth policy for the Gaussian kernel ``exp(-|a-b|^2 / (2 sigma2))``.

    ``policy`` is one of ``"median"`` (median heuristic per call),
    ``"fixed"`` (use ``sigma2``) or ``"mixture"`` (average over
    ``multipliers`` times a base bandwidth, which is ``sigma2`` when given and
    the median heuristic otherwise).
    """

    policy: str = "median"
    sigma2: float | None = None
    multipliers: tuple[float, ...] = DEFAULT_MIXTURE

    def __post_init__(self):
        if self.policy not in ("median", "fixed", "mixture"):
            raise ValueError(f"unknown bandwidth policy {self.policy!r}")
        if self.policy == "fixed" and (self.sigma2 is None or self.sigma2 <= 0):
            raise ValueError("fixed bandwidth needs sigma2 > 0")
        if self.sigma2 is not None and self.sigma2 <= 0:
            raise ValueError("sigma2 must be > 0")
        if self.policy == "mixture":
            if any(m <= 0 for m in self.multipliers):
                raise ValueError("mixture multipliers must be positive")
            if len(set(self.multipliers)) != len(self.multipliers):
                raise ValueError("mixture multipliers must be distinct")

    def to_dict(self) -> dict:
        return {"policy": self.policy, "sigma2": self.sigma2, "multipliers": list(self.multipliers)}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelConfig":
        d = dict(d)
        if "multipliers" in d:
            d["multipliers"] = tuple(float(m) for m in d["multipliers"])
        return cls(**d)


def gaussian_kernel(a, b, sigma2: float) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.exp(-np.sum((a - b) ** 2) / (2.0 * sigma2)))


def kernel_matrix(A: np.ndarray, B: np.ndarray, sigma2: float) -> np.ndarray:
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * sigma2))


def median_heuristic(Z1: np.ndarray, Z2: np.ndarray) -> float:
    """Median squared pairwise distance of the pooled batch.

    Only distinct pairs count (no self-distances). If over half the pairs
    coincide the median is taken over the non-zero distances, and if every
    point coincides the bandwidth falls back to 1.
    """
    pooled = np.vstack([np.atleast_2d(Z1), np.atleast_2d(Z2)])
    if len(pooled) < 2:
        return 1.0
    d2 = pdist(pooled, "sqeuclidean")
    med = float(np.median(d2))
    if med > 0:
        return med
    pos = d2[d2 > 0]
    return float(np.median(pos)) if pos.size else 1.0


def bandwidths(Z1, Z2, kc: KernelConfig, _pooled_d2=None) -> list[float]:
    if kc.policy == "fixed":
        return [float(kc.sigma2)]
    if kc.policy == "mixture" and kc.sigma2 is not None:
        base = float(kc.sigma2)
    elif _pooled_d2 is not None:
        base = _median_from_matrix(_pooled_d2)
    else:
        base = median_heuristic(Z1, Z2)
    if kc.policy == "median":
        return [base]
    return [m * base for m in kc.multipliers]


def _median_from_matrix(D2: np.ndarray) -> float:
    d2 = D2[np.triu_indices(len(D2), k=1)]
    if d2.size == 0:
        return 1.0
    med = float(np.median(d2))
    if med > 0:
        return med
    pos = d2[d2 > 0]
    return float(np.median(pos)) if pos.size else 1.0


def _check(Z1, Z2):
    Z1 = np.atleast_2d(np.asarray(Z1, dtype=np.float64))
    Z2 = np.atleast_2d(np.asarray(Z2, dtype=np.float64))
    if Z1.shape[1] != Z2.shape[1]:
        raise ValueError(f"latent dims differ: {Z1.shape[1]} vs {Z2.shape[1]}")
    if len(Z1) == 0 or len(Z2) == 0:
        raise ValueError("MMD needs non-empty batches")
    return Z1, Z2


def _value(K11, K22, K12, exact):
    N, M = K12.shape
    if exact:
        # exactly rounded sums make the value invariant to swapping the batches
        s11, s22, s12 = (math.fsum(K.ravel()) for K in (K11, K22, K12))
    else:
        s11, s22, s12 = K11.sum(), K22.sum(), K12.sum()
    return s11 / N**2 + s22 / M**2 - 2.0 * s12 / (N * M)


def mmd2_biased(Z1, Z2, kc: KernelConfig | None = None) -> float:
    """Biased (V-statistic) MMD^2, averaged over the configured bandwidths."""
    kc = kc or KernelConfig()
    Z1, Z2 = _check(Z1, Z2)
    N = len(Z1)
    D2 = cdist(np.vstack([Z1, Z2]), np.vstack([Z1, Z2]), "sqeuclidean")
    sig = bandwidths(Z1, Z2, kc, D2)
    total = 0.0
    for s in sig:
        K = np.exp(-D2 / (2.0 * s))
        total += _value(K[:N, :N], K[N:, N:], K[:N, N:], exact=True)
    return float(total / len(sig))


def mmd2_with_grad(Z1, Z2, kc: KernelConfig | None = None):
    """Return ``(mmd2, dZ1, dZ2)``; bandwidths are held constant."""
    kc = kc or KernelConfig()
    Z1, Z2 = _check(Z1, Z2)
    N, M = len(Z1), len(Z2)
    P = np.vstack([Z1, Z2])
    D2 = cdist(P, P, "sqeuclidean")
    sig = bandwidths(Z1, Z2, kc, D2)
    total, g1, g2 = 0.0, np.zeros_like(Z1), np.zeros_like(Z2)
    for s in sig:
        K = np.exp(-D2 / (2.0 * s))
        K11, K22, K12 = K[:N, :N], K[N:, N:], K[:N, N:]
        total += _value(K11, K22, K12, exact=False)
        # d k(a, b) / da = -k(a, b) (a - b) / s
        pull11 = Z1 * K11.sum(axis=1)[:, None] - K11 @ Z1
        pull12 = Z1 * K12.sum(axis=1)[:, None] - K12 @ Z2
        g1 += (-2.0 / (N**2 * s)) * pull11 + (2.0 / (N * M * s)) * pull12
        pull22 = Z2 * K22.sum(axis=1)[:, None] - K22 @ Z2
        pull21 = Z2 * K12.sum(axis=0)[:, None] - K12.T @ Z1
        g2 += (-2.0 / (M**2 * s)) * pull22 + (2.0 / (N * M * s)) * pull21
    k = len(sig)
    return float(total / k), g1 / k, g2 / k


def mmd2_backward(Z1, Z2, kc: KernelConfig | None = None):
    """Gradients of :func:`mmd2_biased` with respect to both batches."""
    _, dZ1, dZ2 = mmd2_with_grad(Z1, Z2, kc)
    return dZ1, dZ2

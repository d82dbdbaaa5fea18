import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hetnids.adaptation import (
    KernelConfig,
    gaussian_kernel,
    kernel_matrix,
    median_heuristic,
    mmd2_backward,
    mmd2_biased,
    mmd2_with_grad,
)
from hetnids.selftest import naive_mmd2, rel_err


def test_kernel_values():
    assert gaussian_kernel([0, 0], [0, 0], 1.0) == 1.0
    assert gaussian_kernel([0, 0], [1, 1], 1.0) == pytest.approx(np.exp(-1.0), rel=1e-15)
    K = kernel_matrix(np.zeros((2, 1)), np.array([[0.0], [2.0]]), 2.0)
    np.testing.assert_allclose(K, [[1, np.exp(-1)], [1, np.exp(-1)]], rtol=1e-15)


def test_hand_example():
    # Z1={0}, Z2={1}, sigma2=1/2: 1 + 1 - 2 e^{-1}
    v = mmd2_biased([[0.0]], [[1.0]], KernelConfig("fixed", 0.5))
    assert v == pytest.approx(2 - 2 * np.exp(-1), rel=1e-14)


def test_matches_naive_loops():
    rng = np.random.default_rng(0)
    for _ in range(30):
        D = int(rng.integers(1, 9))
        Z1 = rng.normal(size=(int(rng.integers(1, 40)), D))
        Z2 = rng.normal(size=(int(rng.integers(1, 40)), D)) + rng.normal()
        s2 = float(rng.uniform(0.1, 10))
        got = mmd2_biased(Z1, Z2, KernelConfig("fixed", s2))
        assert abs(got - naive_mmd2(Z1.tolist(), Z2.tolist(), s2)) < 1e-10


def test_median_policy_uses_pooled_median():
    rng = np.random.default_rng(1)
    Z1, Z2 = rng.normal(size=(7, 3)), rng.normal(size=(5, 3))
    P = np.vstack([Z1, Z2])
    d2 = [float(((P[i] - P[j]) ** 2).sum()) for i in range(12) for j in range(i + 1, 12)]
    s2 = float(np.median(d2))
    assert median_heuristic(Z1, Z2) == pytest.approx(s2, rel=1e-14)
    assert mmd2_biased(Z1, Z2) == pytest.approx(naive_mmd2(Z1.tolist(), Z2.tolist(), s2), abs=1e-12)


def test_median_heuristic_degenerate():
    assert median_heuristic(np.ones((3, 2)), np.ones((4, 2))) == 1.0
    # 6 of 10 pairs coincide: median over non-zero distances only
    Z = np.array([[0.0], [0.0], [0.0], [0.0], [2.0]])
    assert median_heuristic(Z[:3], Z[3:]) == 4.0


def test_mixture_is_mean_over_multipliers():
    rng = np.random.default_rng(2)
    Z1, Z2 = rng.normal(size=(6, 2)), rng.normal(size=(6, 2)) + 1
    base = median_heuristic(Z1, Z2)
    kc = KernelConfig("mixture")
    want = np.mean([mmd2_biased(Z1, Z2, KernelConfig("fixed", m * base))
                    for m in (0.25, 0.5, 1, 2, 4)])
    assert mmd2_biased(Z1, Z2, kc) == pytest.approx(want, rel=1e-13)


def test_self_zero_and_symmetric():
    Z = np.random.default_rng(3).normal(size=(20, 4))
    assert abs(mmd2_biased(Z, Z)) < 1e-12
    W = Z + 0.3
    assert mmd2_biased(Z, W) == mmd2_biased(W, Z)


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 12), st.just(3)), elements=st.floats(-5, 5)),
    arrays(np.float64, st.tuples(st.integers(1, 12), st.just(3)), elements=st.floats(-5, 5)),
    st.sampled_from(["median", "mixture", "fixed"]),
)
def test_nonnegative_and_symmetric(Z1, Z2, policy):
    kc = KernelConfig(policy, 1.7 if policy == "fixed" else None)
    v = mmd2_biased(Z1, Z2, kc)
    assert v >= -1e-12
    assert v == mmd2_biased(Z2, Z1, kc)


@pytest.mark.parametrize("policy", ["fixed", "mixture"])
def test_gradient_matches_finite_differences(policy):
    rng = np.random.default_rng(4)
    Z1, Z2 = rng.normal(size=(6, 3)), rng.normal(size=(5, 3)) + 0.7
    kc = KernelConfig(policy, 1.3)
    g1, g2 = mmd2_backward(Z1, Z2, kc)
    h = 1e-5
    for Z, g in ((Z1, g1), (Z2, g2)):
        num = np.zeros_like(Z)
        for idx in np.ndindex(Z.shape):
            old = Z[idx]
            Z[idx] = old + h
            up = mmd2_biased(Z1, Z2, kc)
            Z[idx] = old - h
            dn = mmd2_biased(Z1, Z2, kc)
            Z[idx] = old
            num[idx] = (up - dn) / (2 * h)
        assert rel_err(num, g) < 1e-6


def test_median_gradient_treats_bandwidth_as_constant():
    rng = np.random.default_rng(5)
    Z1, Z2 = rng.normal(size=(6, 3)), rng.normal(size=(5, 3))
    s2 = median_heuristic(Z1, Z2)
    a = mmd2_backward(Z1, Z2)
    b = mmd2_backward(Z1, Z2, KernelConfig("fixed", s2))
    np.testing.assert_allclose(a[0], b[0], rtol=1e-14, atol=1e-16)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-14, atol=1e-16)


def test_value_with_grad_agrees_with_exact_value():
    rng = np.random.default_rng(6)
    Z1, Z2 = rng.normal(size=(30, 4)), rng.normal(size=(20, 4))
    v, _, _ = mmd2_with_grad(Z1, Z2)
    assert v == pytest.approx(mmd2_biased(Z1, Z2), abs=1e-14)


def _perm_p_value(Z1, Z2, n_perm, rng):
    # the pooled median bandwidth is permutation invariant, so K is built once
    observed = mmd2_biased(Z1, Z2)
    P = np.vstack([Z1, Z2])
    K = kernel_matrix(P, P, median_heuristic(Z1, Z2))
    n = len(Z1)

    def stat(idx):
        a, b = idx[:n], idx[n:]
        return K[np.ix_(a, a)].mean() + K[np.ix_(b, b)].mean() - 2 * K[np.ix_(a, b)].mean()

    assert stat(np.arange(len(P))) == pytest.approx(observed, abs=1e-12)
    null = [stat(rng.permutation(len(P))) for _ in range(n_perm)]
    return (1 + sum(v >= observed for v in null)) / (n_perm + 1)


def test_permutation_test_detects_shift():
    rng = np.random.default_rng(7)
    Z1 = rng.normal(size=(512, 4))
    Z2 = rng.normal(size=(512, 4)) + 1.5
    assert _perm_p_value(Z1, Z2, 200, rng) < 0.01


def test_permutation_test_accepts_same_distribution():
    rng = np.random.default_rng(8)
    Z1, Z2 = rng.normal(size=(128, 4)), rng.normal(size=(128, 4))
    assert _perm_p_value(Z1, Z2, 100, rng) > 0.01


def test_validation():
    with pytest.raises(ValueError):
        mmd2_biased(np.zeros((2, 3)), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        mmd2_biased(np.zeros((0, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        KernelConfig("fixed")
    with pytest.raises(ValueError):
        KernelConfig("laplace")
    kc = KernelConfig("mixture", 2.0, (1.0, 3.0))
    assert KernelConfig.from_dict(kc.to_dict()) == kc

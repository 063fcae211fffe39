"""KDE operations against a naive double-loop oracle."""

import numpy as np
import pytest

from miest.core import Dataset, DegenerateDataset, KernelSpec, MissingContinuousY, Profile
from miest.kde import (KdeContext, class_counts, class_indices, kde_conditional_x_given_y,
                       kde_grid, kde_joint, kde_marginal_x, kde_marginal_y, loo_density,
                       loo_sums, loo_sums_joint)

PROFILES = [Profile.UNIFORM, Profile.EPANECHNIKOV, Profile.TRIANGULAR]


def naive_marginal(x, kernel, h, j):
    n, d = x.shape
    s = 0.0
    for i in range(n):
        if i != j:
            s += kernel_value(kernel, (x[j] - x[i]) / h)
    return s / ((n - 1) * h ** d)


def kernel_value(kernel, u):
    # independent per-axis evaluation, written out by hand
    out = 1.0
    r = kernel.support_radius
    for t in np.abs(u):
        if kernel.profile is Profile.UNIFORM:
            out *= 0.5 / r if t <= r else 0.0
        elif kernel.profile is Profile.EPANECHNIKOV:
            out *= 0.75 * (1 - (t / r) ** 2) / r if t <= r else 0.0
        else:
            out *= (1 - t / r) / r if t <= r else 0.0
    return out


def naive_joint(x, y, kx, ky, hx, hy, j):
    n = x.shape[0]
    s = 0.0
    for i in range(n):
        if i != j:
            s += kernel_value(kx, (x[j] - x[i]) / hx) * kernel_value(ky, (y[j] - y[i]) / hy)
    return s / ((n - 1) * hx ** x.shape[1] * hy ** y.shape[1])


def test_marginal_worked_example():
    d = Dataset(x_cont=[[0.0], [0.1], [0.5]], y_disc=[0, 0, 0])
    ctx = KdeContext(d, h_x=0.3)
    # K(-1/3) + K(-5/3) = 1 + 0 over (2 * 0.3)
    assert kde_marginal_x(ctx, 0) == pytest.approx(1 / 0.6, abs=1e-12)
    ctx = KdeContext(d, h_x=2.0)
    assert [kde_marginal_x(ctx, j) for j in range(3)] == [0.5, 0.5, 0.5]


def test_marginal_isolated_pair_is_zero():
    d = Dataset(x_cont=[[0.0], [1.0]], y_disc=[0, 1])
    assert kde_marginal_x(KdeContext(d, h_x=0.5), 0) == 0.0


def test_joint_worked_examples():
    d = Dataset(x_cont=[[0.0], [0.1]], y_cont=[[0.0], [0.1]])
    ctx = KdeContext(d, h_x=0.3, h_y=0.3)
    assert kde_joint(ctx, 0) == pytest.approx(1 / 0.09, rel=1e-12)
    same = Dataset(x_cont=np.full((4, 1), 0.3), y_cont=np.full((4, 1), 0.7))
    assert kde_joint(KdeContext(same, h_x=1.0, h_y=1.0), 2) == 1.0
    iso = Dataset(x_cont=[[0.0], [0.1], [5.0]], y_cont=[[0.0], [0.1], [5.0]])
    assert kde_joint(KdeContext(iso, h_x=0.3, h_y=0.3), 2) == 0.0


def test_joint_needs_continuous_y():
    d = Dataset(x_cont=[[0.0], [0.1]], y_disc=[0, 1])
    with pytest.raises(MissingContinuousY):
        kde_joint(KdeContext(d, h_x=0.3, h_y=0.3), 0)


def test_conditional_examples():
    x = [[0.0], [0.1], [0.5], [0.9], [0.95]]
    d = Dataset(x_cont=x, y_disc=[0, 0, 0, 1, 1])
    ctx = KdeContext(d, h_x=0.3, h_x_given_y={0: 0.3, 1: 1.0})
    assert kde_conditional_x_given_y(ctx, 0) == pytest.approx(1 / 0.6, abs=1e-12)
    pair = Dataset(x_cont=[[0.4], [0.4], [0.0]], y_disc=[1, 1, 0])
    ctx = KdeContext(pair, h_x=1.0, h_x_given_y={1: 1.0, 0: 1.0})
    assert kde_conditional_x_given_y(ctx, 0) == 1.0


def test_conditional_singleton():
    from miest.core import SingletonClass
    d = Dataset(x_cont=[[0.0], [0.1], [0.5]], y_disc=[0, 0, 1])
    ctx = KdeContext(d, h_x=0.3, h_x_given_y={0: 0.3, 1: 0.3})
    with pytest.raises(SingletonClass):
        kde_conditional_x_given_y(ctx, 2)


def test_class_counts():
    assert class_counts(Dataset(x_cont=np.zeros((3, 1)), y_disc=[0, 0, 1])) == {0: 2, 1: 1}
    assert class_counts(Dataset(x_cont=np.zeros((4, 1)), y_disc=[7] * 4)) == {7: 4}
    idx = class_indices(np.array(["b", "a", "b"]))
    assert list(idx) == ["a", "b"] and idx["b"].tolist() == [0, 2]


def test_class_counts_statistical():
    labels = np.random.default_rng(3).choice(3, size=10000, p=[0.4, 0.4, 0.2])
    c = class_counts(Dataset(x_cont=np.zeros((10000, 1)), y_disc=labels))
    for k, p in enumerate([0.4, 0.4, 0.2]):
        assert abs(c[k] - 10000 * p) < 3 * np.sqrt(10000 * p * (1 - p))


@pytest.mark.parametrize("seed", range(50))
def test_brute_force_equivalence(seed):
    """Every KDE operation vs the naive double loop, 50 random datasets."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 51))
    dx, dy = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    x = np.round(rng.random((n, dx)), 2)   # ties exercise the window edge
    y = rng.random((n, dy))
    labels = rng.integers(0, 3, n)
    prof = PROFILES[seed % 3]
    k = KernelSpec(prof)
    hx, hy = rng.uniform(0.1, 1.2, 2)
    hgiven = {int(c): float(rng.uniform(0.1, 1.2)) for c in np.unique(labels)}
    d = Dataset(x_cont=x, y_cont=y, y_disc=labels)
    ctx = KdeContext(d, k, k, hx, hy, hgiven)
    for j in range(n):
        ref = naive_marginal(x, k, hx, j)
        assert kde_marginal_x(ctx, j) == pytest.approx(ref, rel=1e-12, abs=1e-300)
        assert kde_marginal_y(ctx, j) == pytest.approx(naive_marginal(y, k, hy, j),
                                                       rel=1e-12, abs=1e-300)
        assert kde_joint(ctx, j) == pytest.approx(naive_joint(x, y, k, k, hx, hy, j),
                                                  rel=1e-12, abs=1e-300)
        cls = labels[j]
        members = np.flatnonzero(labels == cls)
        if len(members) >= 2:
            pos = int(np.flatnonzero(members == j)[0])
            ref = naive_marginal(x[members], k, hgiven[int(cls)], pos)
            assert kde_conditional_x_given_y(ctx, j) == pytest.approx(ref, rel=1e-12,
                                                                      abs=1e-300)
    widths = np.sort(rng.uniform(0.05, 1.5, 4))
    batch = loo_density(x, k, widths)
    for a, h in enumerate(widths):
        ref = np.array([naive_marginal(x, k, h, j) for j in range(n)])
        np.testing.assert_allclose(batch[:, a], ref, rtol=1e-12, atol=0)
    joint = loo_sums_joint(x, y, k, k, widths[:2], widths[2:])
    for a in range(2):
        for b in range(2):
            ref = [naive_joint(x, y, k, k, widths[a], widths[2 + b], j)
                   * (n - 1) * widths[a] ** dx * widths[2 + b] ** dy for j in range(n)]
            np.testing.assert_allclose(joint[:, a, b], ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_fast_path_identical_to_general(seed):
    rng = np.random.default_rng(100 + seed)
    n, d = 120, int(rng.integers(1, 4))
    # grid-valued data puts many distances exactly on window edges
    x = rng.integers(0, 10, (n, d)) / 10
    y = rng.integers(0, 10, (n, 1)) / 10
    k = KernelSpec()
    w = np.array([0.1, 0.2, 0.3, 0.4, 0.6, 1.0])
    assert np.array_equal(loo_sums(x, k, w, fast=True), loo_sums(x, k, w, fast=False))
    assert np.array_equal(loo_sums_joint(x, y, k, k, w, w[::-1].copy(), fast=True),
                          loo_sums_joint(x, y, k, k, w, w[::-1].copy(), fast=False))


def test_fast_path_other_radius():
    rng = np.random.default_rng(7)
    x = rng.integers(0, 20, (80, 2)) / 20
    k = KernelSpec(Profile.UNIFORM, 1.0)
    w = np.array([0.05, 0.1, 0.15, 0.5])
    assert np.array_equal(loo_sums(x, k, w, fast=True), loo_sums(x, k, w, fast=False))


def test_scaling_property():
    rng = np.random.default_rng(1)
    x = rng.random((30, 2))
    k = KernelSpec(Profile.EPANECHNIKOV)
    c = 3.0
    a = loo_density(x * c, k, [0.4 * c])[:, 0]
    b = loo_density(x, k, [0.4])[:, 0]
    np.testing.assert_allclose(a, b * c ** -2, rtol=1e-12)


def test_leave_one_out_ignores_own_position():
    rng = np.random.default_rng(2)
    x = rng.random((20, 1))
    k = KernelSpec(Profile.TRIANGULAR)
    base = loo_sums(x, k, [0.3])[:, 0]
    # moving sample 0 changes others' sums but not through an i = j term
    x2 = x.copy()
    x2[0] += 10.0
    moved = loo_sums(x2, k, [0.3])[:, 0]
    ref = np.array([naive_marginal(x2, k, 0.3, j) * 19 * 0.3 for j in range(20)])
    np.testing.assert_allclose(moved, ref, rtol=1e-12, atol=1e-15)
    assert moved[0] == 0.0 and base[0] >= 0.0


def test_mass_check_1d():
    x = np.random.default_rng(4).normal(0.5, 0.1, (2000, 1))
    grid = np.linspace(x.min() - 0.2, x.max() + 0.2, 4001)
    f = kde_grid(x, KernelSpec(Profile.EPANECHNIKOV), 0.05, grid)
    assert abs(np.trapezoid(f, grid) - 1.0) < 0.02
    assert np.all(f >= 0)


def test_degenerate_too_few():
    with pytest.raises(DegenerateDataset):
        loo_sums(np.zeros((1, 1)), KernelSpec(), [0.5])


def test_duplicates_count_as_neighbours():
    x = np.zeros((3, 1))
    assert loo_sums(x, KernelSpec(), [0.1])[:, 0].tolist() == [2.0, 2.0, 2.0]

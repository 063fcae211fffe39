import json
import math

import numpy as np
import pytest
from scipy import integrate, stats

from miest.core import OutOfBox, UnsupportedDimension, renyi, shannon
from miest.synthetic import (OracleMethod, TruncGaussMixtureSpec, case1_spec, case2_spec,
                             exact_density, oracle_mi, sample, sample_arrays)

SIG = math.sqrt(0.1)


def test_exact_density_matches_scipy_truncnorm():
    spec = TruncGaussMixtureSpec((1.0,), ((0.5,),), 0.1)
    ref = stats.truncnorm((0 - 0.5) / SIG, (1 - 0.5) / SIG, loc=0.5, scale=SIG).pdf(0.5)
    assert exact_density(spec, [0.5], 0) == pytest.approx(ref, rel=1e-12)
    assert exact_density(spec, [0.5], 0) == pytest.approx(1.42364, abs=1e-4)


def test_exact_density_product_form():
    spec = case1_spec(3)
    x = np.array([0.1, 0.6, 0.9])
    ref = 1.0
    for v in x:
        ref *= stats.truncnorm(-0.25 / SIG, 0.75 / SIG, loc=0.25, scale=SIG).pdf(v)
    assert exact_density(spec, x, 0) == pytest.approx(ref, rel=1e-12)
    marg = sum(p * exact_density(spec, x, k) for k, p in enumerate(spec.class_probs))
    assert exact_density(spec, x) == pytest.approx(marg, rel=1e-14)


def test_out_of_box():
    with pytest.raises(OutOfBox):
        exact_density(case1_spec(2), [0.5, 1.2], 0)


@pytest.mark.parametrize("k", range(3))
def test_density_integrates_to_one(k):
    spec = case1_spec(1)
    val, _ = integrate.quad(lambda t: exact_density(spec, [t], k), 0, 1, epsabs=1e-13)
    assert abs(val - 1) < 1e-8
    spec2 = case1_spec(2)
    val2, _ = integrate.dblquad(lambda a, b: exact_density(spec2, [a, b], k), 0, 1, 0, 1,
                                epsabs=1e-10)
    assert abs(val2 - 1) < 1e-7


def test_reference_presets():
    s1 = case1_spec(4)
    assert s1.class_probs == (0.4, 0.4, 0.2)
    assert s1.means[2] == (0.5,) * 4 and s1.covariance_scale == 0.1
    s2 = case2_spec()
    assert s2.class_probs == (0.35, 0.2, 0.15, 0.15, 0.1, 0.05)
    assert s2.d == 6
    assert s2.means[4] == (0.75, 0.75, 0.375, 0.375, 0.375, 0.375)


def test_spec_validation_and_json():
    with pytest.raises(ValueError):
        TruncGaussMixtureSpec((0.5, 0.6), ((0.1,), (0.2,)))
    with pytest.raises(ValueError):
        TruncGaussMixtureSpec((1.0,), ((1.5,),))
    s = case2_spec()
    assert TruncGaussMixtureSpec.from_json(s.to_json()) == s
    assert json.loads(s.to_json())["d"] == 6


def test_sample_box_and_frequencies():
    spec = case1_spec(4)
    data = sample(spec, 10 ** 5, seed=42)
    x = data.x_cont
    assert x.min() >= 0 and x.max() <= 1
    counts = np.bincount(data.y_disc, minlength=3)
    for k, p in enumerate(spec.class_probs):
        assert abs(counts[k] - 1e5 * p) <= 3 * math.sqrt(1e5 * p * (1 - p))


def test_sample_distribution_ks():
    spec = TruncGaussMixtureSpec((1.0,), ((0.3,),), 0.1)
    x, _ = sample_arrays(spec, 20000, seed=3)
    ref = stats.truncnorm(-0.3 / SIG, 0.7 / SIG, loc=0.3, scale=SIG)
    assert stats.kstest(x[:, 0], ref.cdf).pvalue > 0.001


def test_sample_deterministic():
    a = sample(case1_spec(3), 500, seed=9)
    b = sample(case1_spec(3), 500, seed=9)
    assert np.array_equal(a.x_cont, b.x_cont) and np.array_equal(a.y_disc, b.y_disc)
    with pytest.raises(ValueError):
        sample(case1_spec(3), 0, seed=9)


def test_oracle_single_class_identity():
    spec = TruncGaussMixtureSpec((1.0,), ((0.3, 0.6),), 0.1)
    for method, kw in ((OracleMethod.QUADRATURE, {}), (OracleMethod.MONTE_CARLO, {"M": 10 ** 4})):
        assert oracle_mi(spec, shannon(), method, **kw).value == 0.0
        assert oracle_mi(spec, renyi(0.5), method, **kw).value == 1.0


def test_oracle_identical_classes():
    spec = TruncGaussMixtureSpec((0.3, 0.7), ((0.4,), (0.4,)), 0.1)
    assert oracle_mi(spec, shannon(), "quadrature").value == pytest.approx(0.0, abs=1e-14)
    assert oracle_mi(spec, renyi(0.5), "mc", M=10 ** 4).value == pytest.approx(1.0, abs=1e-14)


def test_oracle_quadrature_matches_mc_case1_d1():
    spec = case1_spec(1)
    q = oracle_mi(spec, renyi(0.5), OracleMethod.QUADRATURE)
    mc = oracle_mi(spec, renyi(0.5), OracleMethod.MONTE_CARLO, M=10 ** 6, seed=1)
    assert q.error_bound < 1e-10
    assert abs(q.value - mc.value) <= 3 * mc.std_error
    assert mc.std_error > 0


def test_oracle_quadrature_vs_scipy_quad():
    spec = case1_spec(1)
    f = lambda t, k: exact_density(spec, [t], k)  # noqa: E731
    ref = 0.0
    for k, p in enumerate(spec.class_probs):
        v, _ = integrate.quad(lambda t: f(t, k) * math.sqrt(exact_density(spec, [t]) / f(t, k)),
                              0, 1, epsabs=1e-13)
        ref += p * v
    assert oracle_mi(spec, renyi(0.5), "quadrature").value == pytest.approx(ref, abs=1e-10)


def test_oracle_quadrature_dimension_limit():
    with pytest.raises(UnsupportedDimension):
        oracle_mi(case1_spec(3), shannon(), OracleMethod.QUADRATURE)


@pytest.mark.parametrize("spec", [case1_spec(1), case1_spec(2),
                                  TruncGaussMixtureSpec((0.5, 0.5), ((0.2,), (0.8,)), 0.01)])
def test_shannon_information_nonnegative(spec):
    # with g = log(t), the functional is minus the Shannon information
    res = oracle_mi(spec, shannon(), "quadrature")
    assert -res.value >= -3 * res.std_error - res.error_bound


def test_shannon_nonnegative_mc_d4():
    res = oracle_mi(case1_spec(4), shannon(), "mc", M=10 ** 5, seed=2)
    assert -res.value >= -3 * res.std_error


def test_oracle_permutation_invariance():
    spec = case1_spec(2)
    perm = (2, 0, 1)
    other = TruncGaussMixtureSpec(tuple(spec.class_probs[k] for k in perm),
                                  tuple(spec.means[k] for k in perm), 0.1)
    a = oracle_mi(spec, renyi(0.5), "quadrature").value
    b = oracle_mi(other, renyi(0.5), "quadrature").value
    assert b == pytest.approx(a, abs=1e-14)


def test_mc_oracle_deterministic():
    a = oracle_mi(case1_spec(4), renyi(0.5), "mc", M=10 ** 5, seed=7)
    b = oracle_mi(case1_spec(4), renyi(0.5), "mc", M=10 ** 5, seed=7)
    assert a == b

import numpy as np
import pytest

from miest.core import Dataset, KernelSpec, TooFewSamples
from miest.inference import (ConfidenceReport, VarianceMethod, confidence_interval,
                             normal_quantile, normality_diagnostic)


def make_data(n=200, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(x_cont=rng.random((n, 1)), y_disc=rng.integers(0, 2, n))


def mean_x(d):
    return float(d.x_cont.mean())


def test_quantile():
    assert normal_quantile(0.95) == pytest.approx(1.959964, abs=1e-5)
    with pytest.raises(ValueError):
        normal_quantile(1.0)


@pytest.mark.parametrize("method", list(VarianceMethod))
def test_constant_estimator(method):
    rep = confidence_interval(make_data(), lambda d: 3.0, method=method, B=50)
    assert rep.interval == (3.0, 3.0) and rep.std_error == 0.0


@pytest.mark.parametrize("method", list(VarianceMethod))
def test_shift_equivariance(method):
    d = make_data()
    a = confidence_interval(d, mean_x, method=method, B=60, seed=3)
    b = confidence_interval(d, lambda s: mean_x(s) + 0.75, method=method, B=60, seed=3)
    assert b.interval[0] - a.interval[0] == pytest.approx(0.75, abs=1e-15)
    assert b.interval[1] - a.interval[1] == pytest.approx(0.75, abs=1e-15)
    assert a.interval[0] <= a.estimate <= a.interval[1]
    half = normal_quantile(0.95) * a.std_error
    assert a.interval[1] - a.estimate == pytest.approx(half, rel=1e-12)


def test_bootstrap_se_of_mean():
    d = make_data(2000, seed=1)
    rep = confidence_interval(d, mean_x, B=400, seed=1)
    ref = d.x_cont.std() / np.sqrt(2000)
    assert rep.std_error == pytest.approx(ref, rel=0.15)


def test_subsample_se_of_mean():
    d = make_data(2000, seed=1)
    rep = confidence_interval(d, mean_x, method="subsample", B=400, seed=1)
    ref = d.x_cont.std() / np.sqrt(2000)
    assert rep.std_error == pytest.approx(ref, rel=0.15)


def test_stratified_resamples_keep_class_counts():
    d = make_data(101, seed=2)
    counts = tuple(np.bincount(d.y_disc))
    seen = []
    confidence_interval(d, lambda s: seen.append(tuple(np.bincount(s.y_disc))) or 0.0, B=50)
    assert all(c == counts for c in seen[1:])


def test_seeded_and_thread_independent():
    d = make_data()
    a = confidence_interval(d, mean_x, B=50, seed=5)
    b = confidence_interval(d, mean_x, B=50, seed=5, n_jobs=2)
    assert a == b


def test_width_shrinks_with_n():
    widths = {}
    for n in (500, 2000):
        w = [np.diff(confidence_interval(make_data(n, seed=s), mean_x, B=100, seed=s)
                     .interval)[0] for s in range(5)]
        widths[n] = np.mean(w)
    assert 1.6 <= widths[500] / widths[2000] <= 2.5


def test_errors():
    d = make_data()
    with pytest.raises(ValueError):
        confidence_interval(d, mean_x, B=10)
    tiny = Dataset(x_cont=[[0.0], [0.1], [0.2]], y_disc=[0, 1, 1])
    with pytest.raises(TooFewSamples):
        confidence_interval(tiny, mean_x, B=50)
    with pytest.raises(TooFewSamples):
        normality_diagnostic(np.arange(50.0))


def test_report_dict():
    rep = confidence_interval(make_data(), mean_x, B=50)
    assert isinstance(rep, ConfidenceReport)
    assert rep.to_dict()["variance_method"] == "bootstrap"


def test_normality_null_and_power():
    rng = np.random.default_rng(0)
    passes = sum(normality_diagnostic(rng.normal(size=10000)).p_value > 0.01 for _ in range(50))
    assert passes >= 47
    assert normality_diagnostic(rng.exponential(size=10000)).p_value < 0.01

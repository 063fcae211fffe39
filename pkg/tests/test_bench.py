import csv
import io
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from miest.bench import (BenchPlan, BenchResult, CellResult, EstimatorSpec, OracleSettings,
                         PlanError, TooManyDropped, emit_results, fit_loglog_slope,
                         load_plan, run_bench)
from miest.core import NonPositiveInput
from miest.synthetic import OracleResult, case1_spec

CSV_HEADER = "estimator,N,trials,mse,bias,variance,mean_runtime_s,dropped"


def small_plan(**kw):
    base = dict(spec=case1_spec(2),
                estimators=(EstimatorSpec("kernel", "plugin", l=2.1),
                            EstimatorSpec("ensemble", "ensemble", L_count=10)),
                sample_sizes=(100, 200, 400), trials=4, seed=3,
                oracle=OracleSettings("quadrature"))
    base.update(kw)
    return BenchPlan(**base)


def test_slope_examples():
    assert fit_loglog_slope([(n, 3.0 / n) for n in (100, 200, 400)]) == pytest.approx(-1, abs=1e-9)
    assert fit_loglog_slope([(n, 2.0 / math.sqrt(n)) for n in (100, 200, 400)]) == \
        pytest.approx(-0.5, abs=1e-9)
    with pytest.raises(NonPositiveInput):
        fit_loglog_slope([(100, 1.0), (200, 0.0), (400, 1.0)])
    with pytest.raises(ValueError):
        fit_loglog_slope([(100, 1.0), (200, 0.5)])


def test_mse_decomposition_and_determinism():
    plan = small_plan()
    a = run_bench(plan)
    b = run_bench(plan)
    for c in a.cells:
        assert c.mse >= 0
        assert c.mse == pytest.approx(c.bias ** 2 + c.variance, rel=1e-10)
        assert c.trials == 4 and c.dropped == 0
    assert [c.trial_values for c in a.cells] == [c.trial_values for c in b.cells]
    assert a.to_json() == b.to_json()


def test_parallel_matches_serial():
    plan = small_plan(trials=2, sample_sizes=(100, 200))
    assert run_bench(plan).to_json() == run_bench(plan, n_jobs=2).to_json()


def test_oracle_returning_estimator():
    plan = small_plan(estimators=(EstimatorSpec("kernel", "plugin"),), trials=1,
                      sample_sizes=(100,))
    first = run_bench(plan).cells[0].trial_values[0]
    res = run_bench(plan, oracle=OracleResult(first, 0.0, "mc"))
    c = res.cells[0]
    assert (c.mse, c.bias, c.variance) == (0.0, 0.0, 0.0)


def test_degenerate_ensemble_equals_plugin():
    plan = small_plan(estimators=(EstimatorSpec("kernel", "plugin", l=2.1),
                                  EstimatorSpec("single", "ensemble", params=(2.1,))))
    res = run_bench(plan)
    # a one-point ensemble has weight 1, so its trial values equal the plug-in's
    for N in plan.sample_sizes:
        assert res.cell("kernel", N).trial_values == res.cell("single", N).trial_values


def test_unpaired_adding_estimator_keeps_data():
    one = small_plan(paired=False, estimators=(EstimatorSpec("kernel", "plugin"),))
    two = small_plan(paired=False, estimators=(EstimatorSpec("other", "plugin", l=1.5),
                                               EstimatorSpec("kernel", "plugin")))
    assert run_bench(one).cell("kernel", 200).trial_values == \
        run_bench(two).cell("kernel", 200).trial_values


def test_json_round_trip(tmp_path):
    res = run_bench(small_plan(trials=2), record_runtime=True)
    p = emit_results(res, "json", tmp_path / "r.json")
    back = BenchResult.from_json(p.read_text())
    assert back == res
    assert json.loads(p.read_text())["schema_version"] == 1


def test_csv_rows(tmp_path):
    res = run_bench(small_plan(trials=2))
    text = emit_results(res, "csv", tmp_path / "r.csv").read_text()
    rows = list(csv.DictReader(io.StringIO(text)))
    assert text.splitlines()[0] == CSV_HEADER
    assert len(rows) == 6
    assert rows[0]["mean_runtime_s"] == ""
    assert float(rows[0]["mse"]) == res.cells[0].mse


def test_empty_estimators_header_only(tmp_path):
    res = run_bench(small_plan(estimators=()))
    assert emit_results(res, "csv", tmp_path / "e.csv").read_text() == CSV_HEADER + "\n"


def synthetic_result():
    cells = []
    for name, c in (("kernel", 1.0), ("ensemble", 0.3)):
        for N in (500, 1000, 2000, 3000):
            cells.append(CellResult(name, N, 10, c / N, 0.0, c / N, None, 0, []))
    return BenchResult({"name": "t"}, 1.0, 0.0, cells)


def test_svg_structure(tmp_path):
    p = emit_results(synthetic_result(), "svg", tmp_path / "r.svg")
    root = ET.fromstring(p.read_text())
    ns = {"s": "http://www.w3.org/2000/svg"}
    assert root.get("version") == "1.1"
    lines = root.findall(".//s:polyline", ns)
    assert {l.get("data-estimator") for l in lines} == {"kernel", "ensemble"}
    for line in lines:
        pts = [tuple(map(float, pt.split(","))) for pt in line.get("points").split()]
        xs, ys = zip(*pts)
        assert list(xs) == sorted(xs)
        # SVG y grows downward: a decreasing MSE moves down the page
        assert list(ys) == sorted(ys)
    assert "ensemble" in p.read_text() and "kernel" in p.read_text()


def test_plan_validation(tmp_path):
    with pytest.raises(PlanError):
        small_plan(trials=0)
    with pytest.raises(PlanError):
        small_plan(sample_sizes=(400, 100))
    with pytest.raises(PlanError):
        small_plan(estimators=(EstimatorSpec("a", "plugin"), EstimatorSpec("a", "plugin")))
    with pytest.raises(PlanError):
        BenchPlan.from_dict({"dataset": "x.csv", "estimators": [], "sample_sizes": [10],
                             "trials": 1})
    bad = tmp_path / "bad.json"
    bad.write_text('{"spec": {"preset": "case1"},\n "trials": }')
    with pytest.raises(json.JSONDecodeError) as err:
        load_plan(bad)
    assert err.value.lineno == 2


def test_plan_dict_round_trip():
    plan = small_plan()
    assert BenchPlan.from_dict(plan.to_dict()) == plan


def test_dropped_trials_fail_run():
    # an ensemble with a tiny fixed eta is infeasible on every trial
    plan = small_plan(estimators=(EstimatorSpec("bad", "ensemble", L_count=10, eta=1e-3),),
                      trials=2, sample_sizes=(100,))
    with pytest.raises(TooManyDropped) as err:
        run_bench(plan)
    cell = err.value.result.cells[0]
    assert cell.dropped == 2 and cell.trials == 0 and cell.errors

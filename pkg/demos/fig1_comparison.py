"""Plug-in vs ensemble MSE on the three-class truncated-Gaussian mixture.

A reduced version of the shipped ``fig1_d4`` plan: fewer trials, so it runs
in a couple of minutes. Writes ``fig1_demo.{csv,svg}`` to the current
directory.

Run: python demos/fig1_comparison.py [trials]
"""

import sys

from miest.bench import (BenchPlan, EstimatorSpec, OracleSettings, emit_results,
                         fit_loglog_slope, run_bench)
from miest.synthetic import case1_spec

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 10
plan = BenchPlan(
    spec=case1_spec(4),
    estimators=(EstimatorSpec("kernel", "plugin", l=2.1),
                EstimatorSpec("ensemble", "ensemble", odin=1, l_min=1.2, l_max=3.0,
                              L_count=40)),
    sample_sizes=(500, 1000, 2000, 3000), trials=trials, seed=1,
    functional={"kind": "renyi", "alpha": 0.5},
    oracle=OracleSettings("mc", M=10 ** 6))

res = run_bench(plan)
print(f"oracle Renyi-0.5 integral: {res.oracle_value:.5f} (se {res.oracle_std_error:.1e})")
print(f"{'N':>6} {'plug-in MSE':>12} {'ensemble MSE':>13}")
for N in plan.sample_sizes:
    print(f"{N:>6} {res.cell('kernel', N).mse:12.3e} {res.cell('ensemble', N).mse:13.3e}")
for name in ("kernel", "ensemble"):
    print(f"log-log slope ({name}): {fit_loglog_slope(res.series(name)):.2f}")
emit_results(res, "csv", "fig1_demo.csv")
emit_results(res, "svg", "fig1_demo.svg")

"""Monte-Carlo MSE harness for the synthetic truncated-Gaussian mixtures.

Seeding: trial ``t`` at sample size ``N`` draws its dataset from
``SeedSequence([seed, N, t])`` when the plan is paired (every estimator sees
the same data) and from ``SeedSequence([seed, crc32(name), N, t])``
otherwise, so adding an estimator never changes another one's data.
Results are reduced in ``(estimator, N, t)`` order whatever the worker
count.
"""

from __future__ import annotations

import enum
import functools
import json
import math
import time
import warnings
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np
from joblib import Parallel, delayed

from .core import (BandwidthSet, Dataset, Functional, KernelSpec, MIEstError,
                   NonPositiveInput, Profile, renyi, shannon)
from .ensemble import (BasisFamily, EnsembleConfig, EtaPolicy, Program,
                       ensemble_estimate_mixed)
from .kde import class_indices
from .plugin import PluginConfig, plugin_mi_mixed
from .synthetic import (OracleMethod, OracleResult, TruncGaussMixtureSpec,
                        case1_spec, case2_spec, oracle_mi, sample)

__all__ = [
    "EstimatorKind", "EstimatorSpec", "OracleSettings", "BenchPlan", "CellResult",
    "BenchResult", "PlanError", "TooManyDropped", "load_plan", "make_estimator",
    "make_functional", "run_bench", "emit_results", "fit_loglog_slope",
    "SCHEMA_VERSION", "CSV_HEADER",
]

SCHEMA_VERSION = 1
CSV_HEADER = ("estimator", "N", "trials", "mse", "bias", "variance",
              "mean_runtime_s", "dropped")
# errors that drop a trial instead of aborting the run
_TRIAL_ERRORS = (MIEstError, ArithmeticError, np.linalg.LinAlgError, ValueError)


class PlanError(ValueError):
    """Malformed or inconsistent bench plan."""


class TooManyDropped(MIEstError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class EstimatorKind(str, enum.Enum):
    PLUGIN = "plugin"
    ENSEMBLE = "ensemble"


@dataclass(frozen=True)
class EstimatorSpec:
    """A named mixed-case estimator.

    ``plugin`` uses ``h_X = l N^-a`` and ``h_X|y = l N_y^-a`` with ``a`` the
    rate of the chosen basis. ``ensemble`` uses ``L_count`` parameters
    spaced linearly over ``[l_min, l_max]``, or the explicit ``params``.
    """

    name: str
    kind: EstimatorKind
    l: float = 2.1
    odin: int = 1
    delta: float = 1.0
    l_min: float = 1.2
    l_max: float = 3.0
    L_count: int = 40
    params: Optional[Tuple[float, ...]] = None
    program: Program = Program.RELAXED
    eta: Optional[float] = None
    profile: Profile = Profile.UNIFORM
    support_radius: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EstimatorKind(self.kind))
        object.__setattr__(self, "program", Program(self.program))
        object.__setattr__(self, "profile", Profile(self.profile))
        if self.params is not None:
            object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.odin not in (1, 2):
            raise PlanError(f"{self.name}: odin must be 1 or 2")
        if not self.name:
            raise PlanError("estimator name must be non-empty")

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.profile, self.support_radius)

    def basis(self, d: int) -> BasisFamily:
        if self.odin == 1:
            return BasisFamily.mixed_odin1(d)
        return BasisFamily.mixed_odin2(d, self.delta)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k in ("kind", "program", "profile"):
            out[k] = out[k].value
        if out["params"] is not None:
            out["params"] = list(out["params"])
        return out


@dataclass(frozen=True)
class OracleSettings:
    method: OracleMethod = OracleMethod.MONTE_CARLO
    M: int = 10 ** 7
    seed: int = 0
    n_nodes: int = 96

    def __post_init__(self):
        object.__setattr__(self, "method", OracleMethod(self.method))

    def to_dict(self) -> dict:
        return {"method": self.method.value, "M": self.M, "seed": self.seed,
                "n_nodes": self.n_nodes}


def make_functional(desc: dict) -> Functional:
    kind = desc.get("kind", "renyi")
    if kind == "shannon":
        return shannon()
    if kind == "renyi":
        if "alpha" not in desc:
            raise PlanError("renyi functional needs alpha")
        return renyi(float(desc["alpha"]))
    raise PlanError(f"unknown functional kind {kind!r}")


def _spec_from(desc) -> TruncGaussMixtureSpec:
    if "preset" in desc:
        preset = desc["preset"]
        if preset == "case1":
            return case1_spec(int(desc.get("d", 4)))
        if preset == "case2":
            return case2_spec()
        raise PlanError(f"unknown spec preset {preset!r}")
    return TruncGaussMixtureSpec.from_dict(desc)


@dataclass(frozen=True)
class BenchPlan:
    spec: TruncGaussMixtureSpec
    estimators: Tuple[EstimatorSpec, ...]
    sample_sizes: Tuple[int, ...]
    trials: int
    seed: int = 0
    functional: dict = field(default_factory=lambda: {"kind": "renyi", "alpha": 0.5})
    oracle: OracleSettings = OracleSettings()
    paired: bool = True
    max_drop_fraction: float = 0.01
    name: str = "bench"

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        if self.trials < 1:
            raise PlanError("trials must be >= 1")
        if not self.sample_sizes:
            raise PlanError("sample_sizes must be non-empty")
        if list(self.sample_sizes) != sorted(set(self.sample_sizes)):
            raise PlanError("sample_sizes must be strictly ascending")
        if self.sample_sizes[0] < 2:
            raise PlanError("sample sizes must be >= 2")
        names = [e.name for e in self.estimators]
        if len(set(names)) != len(names):
            raise PlanError("estimator names must be unique")
        if not 0 <= self.seed < 2 ** 64:
            raise PlanError("seed must be a 64-bit unsigned integer")
        make_functional(self.functional)

    @property
    def functional_obj(self) -> Functional:
        return make_functional(self.functional)

    def to_dict(self) -> dict:
        return {"name": self.name, "spec": self.spec.to_dict(),
                "functional": dict(self.functional),
                "estimators": [e.to_dict() for e in self.estimators],
                "sample_sizes": list(self.sample_sizes), "trials": self.trials,
                "seed": self.seed, "paired": self.paired,
                "max_drop_fraction": self.max_drop_fraction,
                "oracle": self.oracle.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "BenchPlan":
        try:
            if "dataset" in d:
                raise PlanError("dataset-path plans are not supported; give a spec")
            ests = []
            for e in d.get("estimators", []):
                if not isinstance(e, dict):
                    raise PlanError("each estimator must be an object")
                ests.append(EstimatorSpec(**e))
            return cls(spec=_spec_from(d["spec"]), estimators=tuple(ests),
                       sample_sizes=tuple(d["sample_sizes"]), trials=int(d["trials"]),
                       seed=int(d.get("seed", 0)),
                       functional=dict(d.get("functional", {"kind": "renyi", "alpha": 0.5})),
                       oracle=OracleSettings(**d.get("oracle", {})),
                       paired=bool(d.get("paired", True)),
                       max_drop_fraction=float(d.get("max_drop_fraction", 0.01)),
                       name=str(d.get("name", "bench")))
        except PlanError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise PlanError(f"invalid plan: {exc!r}") from exc


def load_plan(path) -> BenchPlan:
    """Parse a plan file; JSON syntax errors propagate with line/column."""
    text = Path(path).read_text()
    return BenchPlan.from_dict(json.loads(text))


@dataclass
class CellResult:
    estimator: str
    N: int
    trials: int
    mse: float
    bias: float
    variance: float
    mean_runtime_s: Optional[float]
    dropped: int
    trial_values: List[float]
    clamped_trials: int = 0
    errors: List[str] = field(default_factory=list)


@dataclass
class BenchResult:
    plan: dict
    oracle_value: float
    oracle_std_error: float
    cells: List[CellResult]
    schema_version: int = SCHEMA_VERSION

    def cell(self, estimator: str, N: int) -> CellResult:
        for c in self.cells:
            if c.estimator == estimator and c.N == N:
                return c
        raise KeyError((estimator, N))

    def series(self, estimator: str) -> List[Tuple[int, float]]:
        return [(c.N, c.mse) for c in self.cells if c.estimator == estimator]

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "plan": self.plan,
                "oracle_value": self.oracle_value,
                "oracle_std_error": self.oracle_std_error,
                "cells": [asdict(c) for c in self.cells]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchResult":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
        return cls(plan=d["plan"], oracle_value=d["oracle_value"],
                   oracle_std_error=d["oracle_std_error"],
                   cells=[CellResult(**c) for c in d["cells"]],
                   schema_version=d["schema_version"])

    @classmethod
    def from_json(cls, s: str) -> "BenchResult":
        return cls.from_dict(json.loads(s))


# Estimators
# -----------------------------------

def make_estimator(est: EstimatorSpec, functional: Functional,
                   d: int) -> Callable[[Dataset], object]:
    """Callable ``Dataset -> EstimateReport`` for the mixed case."""
    basis = est.basis(d)
    a = basis.rate
    kernel = est.kernel
    if est.kind is EstimatorKind.PLUGIN:
        def plugin(data: Dataset):
            h_given = {lab: est.l * len(idx) ** -a
                       for lab, idx in class_indices(data.y_disc).items()}
            cfg = PluginConfig(functional, kernel_x=kernel, h_x=est.l * data.n ** -a,
                               h_x_given_y=h_given)
            return plugin_mi_mixed(data, cfg)
        return plugin

    L = (BandwidthSet(est.params) if est.params is not None
         else BandwidthSet.linspace(est.l_min, est.l_max, est.L_count))
    policy = EtaPolicy.EQUAL_EPSILON if est.eta is None else EtaPolicy.FIXED
    cfg = EnsembleConfig(L, basis, program=est.program, eta_policy=policy, eta=est.eta)
    pcfg = PluginConfig(functional, kernel_x=kernel)
    return lambda data: ensemble_estimate_mixed(data, cfg, pcfg)


@functools.lru_cache(maxsize=32)
def _cached_oracle(spec_json: str, functional_json: str, settings_json: str) -> OracleResult:
    spec = TruncGaussMixtureSpec.from_json(spec_json)
    s = json.loads(settings_json)
    return oracle_mi(spec, make_functional(json.loads(functional_json)),
                     method=s["method"], M=s["M"], seed=s["seed"], n_nodes=s["n_nodes"])


def plan_oracle(plan: BenchPlan) -> OracleResult:
    """Oracle value for the plan, computed once per process and cached."""
    return _cached_oracle(plan.spec.to_json(sort_keys=True),
                          json.dumps(plan.functional, sort_keys=True),
                          json.dumps(plan.oracle.to_dict(), sort_keys=True))


def _trial_seed(plan: BenchPlan, est: EstimatorSpec, N: int, t: int):
    if plan.paired:
        return np.random.SeedSequence([plan.seed, N, t])
    return np.random.SeedSequence([plan.seed, zlib.crc32(est.name.encode()), N, t])


def _run_trial(plan: BenchPlan, N: int, t: int, record_runtime: bool):
    """All estimators on trial ``t`` at size ``N``: ``[(value|None, secs, clamped, err)]``."""
    functional = plan.functional_obj
    out = []
    shared = sample(plan.spec, N, _trial_seed(plan, plan.estimators[0], N, t)) \
        if plan.paired and plan.estimators else None
    for est in plan.estimators:
        data = shared if shared is not None else sample(plan.spec, N,
                                                        _trial_seed(plan, est, N, t))
        fn = make_estimator(est, functional, plan.spec.d)
        start = time.perf_counter() if record_runtime else 0.0
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                rep = fn(data)
            value = float(rep.value)
            if not math.isfinite(value):
                raise FloatingPointError("non-finite estimate")
            err, clamped = None, int(getattr(rep, "n_clamped", 0)) > 0
        except _TRIAL_ERRORS as exc:
            value, err, clamped = None, f"{type(exc).__name__}: {exc}", False
        secs = time.perf_counter() - start if record_runtime else 0.0
        out.append((value, secs, clamped, err))
    return out


def _cell(name, N, outcomes, oracle, record_runtime) -> CellResult:
    vals = [o[0] for o in outcomes if o[0] is not None]
    errors = [o[3] for o in outcomes if o[3] is not None]
    v = np.asarray(vals, dtype=np.float64)
    if len(v):
        dev = v - oracle
        mse = float(np.mean(dev * dev))
        bias = float(np.mean(v) - oracle)
        variance = float(np.var(v))
    else:
        mse = bias = variance = float("nan")
    runtime = float(np.mean([o[1] for o in outcomes])) if record_runtime else None
    return CellResult(name, N, len(vals), mse, bias, variance, runtime, len(errors),
                      [float(x) for x in vals], sum(o[2] for o in outcomes), errors[:5])


def run_bench(plan: BenchPlan, n_jobs: int = 1, record_runtime: bool = False,
              oracle: Optional[OracleResult] = None) -> BenchResult:
    """Replicate every estimator ``plan.trials`` times at every sample size.

    ``mse``, ``bias`` and ``variance`` are computed from the retained trials
    against the oracle value (``variance`` with divisor ``trials``, so
    ``mse = bias^2 + variance``). Trials that raise are dropped and counted;
    more than ``max_drop_fraction`` dropped in any cell raises
    ``TooManyDropped`` carrying the partial result. ``oracle`` overrides the
    oracle computation (useful when the same spec is reused).
    """
    orc = oracle if oracle is not None else plan_oracle(plan)
    jobs = [(N, t) for N in plan.sample_sizes for t in range(plan.trials)]
    if n_jobs == 1:
        raw = [_run_trial(plan, N, t, record_runtime) for N, t in jobs]
    else:
        raw = Parallel(n_jobs=n_jobs)(
            delayed(_run_trial)(plan, N, t, record_runtime) for N, t in jobs)
    by_job = dict(zip(jobs, raw))
    cells = []
    for e, est in enumerate(plan.estimators):
        for N in plan.sample_sizes:
            outcomes = [by_job[(N, t)][e] for t in range(plan.trials)]
            cells.append(_cell(est.name, N, outcomes, orc.value, record_runtime))
    result = BenchResult(plan.to_dict(), float(orc.value), float(orc.std_error), cells)
    worst = max((c.dropped / plan.trials for c in cells), default=0.0)
    if worst > plan.max_drop_fraction:
        raise TooManyDropped(f"{worst:.1%} of trials dropped in a cell "
                             f"(limit {plan.max_drop_fraction:.1%})", result)
    return result


def fit_loglog_slope(points: Sequence[Tuple[float, float]]) -> float:
    """OLS slope of ``log(mse)`` on ``log(N)``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("need at least three (N, mse) points")
    if np.any(~(pts > 0)):
        raise NonPositiveInput("log-log fit needs positive N and mse")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


# Emission
# -----------------------------------

def _num(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def _csv_text(result: BenchResult) -> str:
    lines = [",".join(CSV_HEADER)]
    for c in result.cells:
        name = c.estimator
        if any(ch in name for ch in ',"\n'):
            name = '"' + name.replace('"', '""') + '"'
        lines.append(",".join([name, str(c.N), str(c.trials), _num(c.mse), _num(c.bias),
                               _num(c.variance), _num(c.mean_runtime_s), str(c.dropped)]))
    return "\n".join(lines) + "\n"


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _log_ticks(lo, hi):
    ticks = []
    for k in range(math.floor(lo) - 1, math.ceil(hi) + 1):
        for m in (1, 2, 5):
            v = math.log10(m) + k
            if lo - 1e-12 <= v <= hi + 1e-12:
                ticks.append((v, m * 10.0 ** k))
    return ticks


def _svg_text(result: BenchResult, title: str = "MSE vs N") -> str:
    W, H, ml, mr, mt, mb = 640, 440, 80, 170, 40, 60
    pw, ph = W - ml - mr, H - mt - mb
    series = {}
    for c in result.cells:
        if c.mse > 0 and math.isfinite(c.mse):
            series.setdefault(c.estimator, []).append((c.N, c.mse))
    names = list(dict.fromkeys(c.estimator for c in result.cells))
    pts = [p for s in series.values() for p in s]
    if pts:
        xs = [math.log10(n) for n, _ in pts]
        ys = [math.log10(m) for _, m in pts]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
    else:
        x0, x1, y0, y1 = 2.0, 4.0, -3.0, 0.0
    if x1 - x0 < 1e-9:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 0.5, y1 + 0.5
    padx, pady = 0.05 * (x1 - x0), 0.05 * (y1 - y0)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady
    sx = lambda v: ml + (v - x0) / (x1 - x0) * pw  # noqa: E731
    sy = lambda v: mt + (y1 - v) / (y1 - y0) * ph  # noqa: E731

    out = ['<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" '
           f'height="{H}" viewBox="0 0 {W} {H}">',
           f'<title>{escape(title)}</title>',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<g id="axes" stroke="black" fill="none">'
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}"/></g>']
    tick = ['<g id="ticks" font-family="sans-serif" font-size="11">']
    for v, lab in _log_ticks(x0, x1):
        x = sx(v)
        tick.append(f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" y2="{mt + ph + 5}" '
                    f'stroke="black"/><text x="{x:.2f}" y="{mt + ph + 18}" '
                    f'text-anchor="middle">{lab:g}</text>')
    for v, lab in _log_ticks(y0, y1):
        y = sy(v)
        tick.append(f'<line x1="{ml - 5}" y1="{y:.2f}" x2="{ml}" y2="{y:.2f}" '
                    f'stroke="black"/><text x="{ml - 8}" y="{y + 4:.2f}" '
                    f'text-anchor="end">{lab:.0e}</text>')
    tick.append('</g>')
    out += tick
    out.append(f'<text x="{ml + pw / 2:.2f}" y="{H - 15}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">N (log10 scale)</text>')
    out.append(f'<text x="18" y="{mt + ph / 2:.2f}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13" '
               f'transform="rotate(-90 18 {mt + ph / 2:.2f})">MSE (log10 scale)</text>')
    for k, name in enumerate(names):
        color = _COLORS[k % len(_COLORS)]
        s = sorted(series.get(name, []))
        coords = " ".join(f"{sx(math.log10(n)):.2f},{sy(math.log10(m)):.2f}" for n, m in s)
        out.append(f'<polyline data-estimator="{escape(name, {chr(34): "&quot;"})}" '
                   f'points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = mt + 20 + 20 * k
        lx = ml + pw + 15
        out.append(f'<g class="legend"><line x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/><text x="{lx + 32}" y="{ly + 4}" '
                   f'font-family="sans-serif" font-size="12">{escape(name)}</text></g>')
    out.append('</svg>')
    return "\n".join(out) + "\n"


def emit_results(result: BenchResult, fmt: str, path) -> Path:
    """Write ``result`` as ``csv``, ``json`` or ``svg`` to ``path``."""
    if fmt == "csv":
        text = _csv_text(result)
    elif fmt == "json":
        text = result.to_json(indent=1) + "\n"
    elif fmt == "svg":
        text = _svg_text(result, title=f"{result.plan.get('name', 'bench')}: MSE vs N")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    path.write_text(text)
    return path

"""Optimally weighted ensembles of plug-in MI estimators.

An ensemble runs the plug-in estimator at bandwidths ``h(l) = l * N^(-rate)``
for every ``l`` in a parameter set and mixes the results with weights that
cancel the leading bias terms ``sum_i c_i psi_i(l) phi_i(N)``.

Weights come from one of two offline programs that only depend on ``N``,
the parameter set and the basis:

* exact: ``min ||w||_2`` s.t. ``sum w = 1`` and ``sum_l w(l) psi_i(l) = 0``;
* relaxed: ``min eps`` s.t. ``sum w = 1``,
  ``|sum_l w(l) psi_i(l) * sqrt(N) phi_i(N)| <= eps`` and ``||w||^2 <= eta``
  (``eta = eps`` by default).

The relaxed program is solved by root-finding on ``eps`` over the value
function ``F(eps) = min{||w||^2 : sum w = 1, |A w| <= eps}``; each ``F``
evaluation is a small strictly convex QP handled by a primal active-set
method started from the exact (minimum-norm) solution.
"""

from __future__ import annotations

import enum
import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize
from scipy.spatial.distance import cdist

from .core import (BandwidthSet, Case, Dataset, EstimateReport, InfeasibleError,
                   KernelSpec, MissingContinuousY, MissingParts, NoFeasibleRange,
                   Profile, ToleranceNotMet)
from .kde import class_indices, loo_density, loo_sums_joint
from .plugin import PluginConfig, _warn_clamped, mixed_table, resolution_floor

__all__ = [
    "BasisCase", "BasisTerm", "BasisFamily", "Program", "EtaPolicy",
    "EnsembleConfig", "SolverStatus", "WeightSolution", "bandwidth_schedule",
    "build_constraint_matrix", "solve_weights_exact", "solve_weights_relaxed",
    "solve_weights", "ensemble_estimate_mixed", "ensemble_estimate_cont",
    "select_parameters", "DEFAULT_L_RANGE",
]

DEFAULT_L_RANGE = (1.2, 3.0)


class BasisCase(str, enum.Enum):
    MIXED_ODIN1 = "mixed_odin1"
    MIXED_ODIN2 = "mixed_odin2"
    CONT_ODIN1 = "cont_odin1"
    CONT_ODIN2 = "cont_odin2"

    @property
    def continuous(self) -> bool:
        return self in (BasisCase.CONT_ODIN1, BasisCase.CONT_ODIN2)

    @property
    def odin2(self) -> bool:
        return self in (BasisCase.MIXED_ODIN2, BasisCase.CONT_ODIN2)


@dataclass(frozen=True)
class BasisTerm:
    """One bias term: ``psi(l) = prod_a l_a ** psi_exp[a]``, ``phi(N) = N ** -phi_exp``."""

    index: tuple
    psi_exp: Tuple[float, ...]
    phi_exp: float

    def psi(self, params) -> np.ndarray:
        params = np.atleast_2d(np.asarray(params, dtype=np.float64))
        out = np.ones(params.shape[0])
        for a, e in enumerate(self.psi_exp):
            if e:
                out = out * params[:, a] ** e
        return out

    def phi(self, n) -> float:
        return float(n) ** -self.phi_exp


def _mixed_odin1_terms(d_x):
    return tuple(BasisTerm((i,), (float(i),), i / (2 * d_x)) for i in range(1, d_x + 1))


def _mixed_odin2_terms(d_x, delta):
    bound = (d_x + delta) / 2
    terms = []
    for m in range(int(bound / delta) + 1):
        for i in range(int(bound) + 1):
            k = i + m * delta
            if 0 < k <= bound + 1e-12:
                terms.append(BasisTerm((i, m), (float(i - m * d_x),), k / (d_x + delta)))
    return tuple(sorted(terms, key=lambda t: (t.phi_exp, t.index)))


def _cont_odin1_terms(d_x, d_y):
    top = d_x + d_y
    terms = [BasisTerm((i, j), (float(i), float(j)), (i + j) / (2 * top))
             for s in range(1, top + 1) for i in range(s + 1) for j in (s - i,)]
    return tuple(sorted(terms, key=lambda t: (t.phi_exp, t.index)))


def _cont_odin2_terms(d_x, d_y, delta):
    D = d_x + d_y + delta
    bound = D / 2 + 1e-12
    seen, terms = set(), []

    def add(index, ex, ey, k):
        key = (round(ex, 12), round(ey, 12), round(k / D, 12))
        if key not in seen:
            seen.add(key)
            terms.append(BasisTerm(index, (float(ex), float(ey)), k / D))

    i_max = int(bound)
    for m in range(int(bound / (d_y + delta)) + 1):
        for n in range(int(bound / (d_x + delta)) + 1):
            for i in range(i_max + 1):
                for j in range(i_max + 1):
                    k = i + j + m * (d_y + delta) + n * (d_x + delta)
                    if 0 < k <= bound:
                        add((1, i, j, m, n), i - m * d_x, j - n * d_y, k)
    for m in range(1, int(bound / delta) + 1):
        for i in range(i_max + 1):
            for j in range(i_max + 1):
                k = i + j + m * delta
                if k <= bound:
                    add((2, i, j, m), i - m * d_x, j - m * d_y, k)
    return tuple(sorted(terms, key=lambda t: (t.phi_exp, t.index)))


@dataclass(frozen=True)
class BasisFamily:
    """Bias basis ``{(psi_i, phi_i) : i in J}`` and the matching bandwidth rate."""

    case: BasisCase
    d_x: int
    d_y: Optional[int] = None
    delta: Optional[float] = None
    terms: Optional[Tuple[BasisTerm, ...]] = None

    def __post_init__(self):
        case = BasisCase(self.case)
        object.__setattr__(self, "case", case)
        if self.d_x < 1:
            raise ValueError("d_x must be >= 1")
        if case.continuous and (self.d_y is None or self.d_y < 1):
            raise ValueError("continuous basis needs d_y >= 1")
        if case.odin2:
            delta = 1.0 if self.delta is None else float(self.delta)
            if not delta > 0:
                raise ValueError("delta must be positive")
            object.__setattr__(self, "delta", delta)
        if self.terms is None:
            if case is BasisCase.MIXED_ODIN1:
                terms = _mixed_odin1_terms(self.d_x)
            elif case is BasisCase.MIXED_ODIN2:
                terms = _mixed_odin2_terms(self.d_x, self.delta)
            elif case is BasisCase.CONT_ODIN1:
                terms = _cont_odin1_terms(self.d_x, self.d_y)
            else:
                terms = _cont_odin2_terms(self.d_x, self.d_y, self.delta)
            object.__setattr__(self, "terms", terms)
        else:
            object.__setattr__(self, "terms", tuple(self.terms))

    @classmethod
    def mixed_odin1(cls, d_x):
        return cls(BasisCase.MIXED_ODIN1, d_x)

    @classmethod
    def mixed_odin2(cls, d_x, delta=1.0):
        return cls(BasisCase.MIXED_ODIN2, d_x, delta=delta)

    @classmethod
    def cont_odin1(cls, d_x, d_y):
        return cls(BasisCase.CONT_ODIN1, d_x, d_y)

    @classmethod
    def cont_odin2(cls, d_x, d_y, delta=1.0):
        return cls(BasisCase.CONT_ODIN2, d_x, d_y, delta=delta)

    def __len__(self):
        return len(self.terms)

    @property
    def index_set(self):
        return [t.index for t in self.terms]

    @property
    def rate(self) -> float:
        """Exponent ``a`` of the schedule ``h(l) = l * N^(-a)``."""
        d = self.d_x + (self.d_y or 0)
        if self.case.odin2:
            return 1.0 / (d + self.delta)
        return 1.0 / (2 * d)

    def to_dict(self):
        out = {"case": self.case.value, "d_x": self.d_x, "n_terms": len(self.terms)}
        if self.d_y is not None:
            out["d_y"] = self.d_y
        if self.delta is not None:
            out["delta"] = self.delta
        return out


def bandwidth_schedule(case, l, N, d_x, d_y=None, N_y=None, delta=None):
    """Scheduled bandwidth(s) for parameter ``l``.

    Mixed cases return ``h_X`` or ``(h_X, h_X|y)`` when ``N_y`` is given;
    continuous cases take ``l = (l_X, l_Y)`` and return ``(h_X, h_Y)``.
    """
    if N < 2:
        raise ValueError("bandwidth schedule needs N >= 2")
    case = BasisCase(case)
    basis = BasisFamily(case, d_x, d_y, delta=delta, terms=())
    a = basis.rate
    if case.continuous:
        lx, ly = l
        if not (lx > 0 and ly > 0):
            raise ValueError("l must be positive")
        s = N ** -a
        return lx * s, ly * s
    if not l > 0:
        raise ValueError("l must be positive")
    hx = l * N ** -a
    if N_y is None:
        return hx
    if N_y < 1:
        raise ValueError("N_y must be >= 1")
    return hx, l * N_y ** -a


def _param_points(L, L_y=None, continuous=False):
    lx = np.asarray(L.params if isinstance(L, BandwidthSet) else L, dtype=np.float64)
    if not continuous:
        return lx[:, None]
    ly = lx if L_y is None else np.asarray(
        L_y.params if isinstance(L_y, BandwidthSet) else L_y, dtype=np.float64)
    return np.array(list(itertools.product(lx, ly)))


def build_constraint_matrix(basis: BasisFamily, L, N: int, L_y=None):
    """``Psi[i, k] = psi_i(l_k)`` and the row scales ``sqrt(N) * phi_i(N)``."""
    pts = _param_points(L, L_y, basis.case.continuous)
    if len(pts) < 1:
        raise ValueError("empty parameter set")
    psi = np.array([t.psi(pts) for t in basis.terms]).reshape(len(basis.terms), len(pts))
    scale = np.array([math.sqrt(N) * t.phi(N) for t in basis.terms])
    return psi, scale


# Weight programs
# -----------------------------------

class Program(str, enum.Enum):
    EXACT = "exact"
    RELAXED = "relaxed"


class EtaPolicy(str, enum.Enum):
    EQUAL_EPSILON = "equal_epsilon"
    FIXED = "fixed"


class SolverStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    TOLERANCE_NOT_MET = "tolerance_not_met"


@dataclass(frozen=True)
class EnsembleConfig:
    L: BandwidthSet
    basis: BasisFamily
    program: Program = Program.RELAXED
    eta_policy: EtaPolicy = EtaPolicy.EQUAL_EPSILON
    eta: Optional[float] = None
    solver_tol: float = 1e-8
    L_y: Optional[BandwidthSet] = None

    def __post_init__(self):
        object.__setattr__(self, "program", Program(self.program))
        object.__setattr__(self, "eta_policy", EtaPolicy(self.eta_policy))
        if self.eta_policy is EtaPolicy.FIXED and self.eta is None:
            raise ValueError("fixed eta policy needs eta")

    @property
    def points(self) -> np.ndarray:
        return _param_points(self.L, self.L_y, self.basis.case.continuous)


@dataclass
class WeightSolution:
    params: np.ndarray            # (n_points, n_axes) parameter values
    weights: np.ndarray
    epsilon: float
    eta: Optional[float]
    residuals: np.ndarray         # gamma_w(i) * sqrt(N) * phi_i(N)
    status: SolverStatus
    program: Program
    N: int
    basis: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def norm2(self) -> float:
        return float(np.linalg.norm(self.weights))

    def as_dict(self) -> Dict[Hashable, float]:
        keys = [float(p[0]) if len(p) == 1 else tuple(map(float, p)) for p in self.params]
        return dict(zip(keys, map(float, self.weights)))

    def to_dict(self) -> dict:
        key = lambda p: ",".join(repr(float(v)) for v in p)  # noqa: E731
        return {
            "weights": {key(p): float(w) for p, w in zip(self.params, self.weights)},
            "epsilon": float(self.epsilon),
            "eta": None if self.eta is None else float(self.eta),
            "residuals": [float(r) for r in self.residuals],
            "norm2": self.norm2,
            "status": self.status.value,
            "program": self.program.value,
            "N": int(self.N),
            "basis": self.basis,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "WeightSolution":
        params = np.array([[float(v) for v in k.split(",")] for k in d["weights"]])
        return cls(params=params,
                   weights=np.array(list(d["weights"].values()), dtype=np.float64),
                   epsilon=d["epsilon"], eta=d.get("eta"),
                   residuals=np.asarray(d["residuals"], dtype=np.float64),
                   status=SolverStatus(d["status"]), program=Program(d["program"]),
                   N=d["N"], basis=d.get("basis", {}))

    @classmethod
    def from_json(cls, s: str) -> "WeightSolution":
        return cls.from_dict(json.loads(s))


def _min_norm_affine(C, b):
    """Minimum-norm solution of ``C w = b`` by QR of ``C^T`` (rows full rank)."""
    q, r = linalg.qr(C.T, mode="economic")
    z = linalg.solve_triangular(r.T, b, lower=True)
    return q @ z


def _unit_sum(w):
    """Nudge the largest weight so that ``fsum(w) == 1`` exactly."""
    w = np.array(w, dtype=np.float64)
    for _ in range(4):
        r = 1.0 - math.fsum(w)
        if r == 0.0:
            break
        k = int(np.argmax(np.abs(w)))
        w[k] += r
    return w


def _unit_rows(M):
    norms = np.linalg.norm(M, axis=1)
    norms[norms == 0] = 1.0
    return M / norms[:, None], norms


def solve_weights_exact(cfg: EnsembleConfig, N: int) -> WeightSolution:
    """Minimum-norm weights that annihilate every basis term exactly.

    Raises :class:`InfeasibleError` when the affine system is inconsistent.
    """
    psi, scale = build_constraint_matrix(cfg.basis, cfg.L, N, cfg.L_y)
    pts = cfg.points
    n_pts = len(pts)
    C = np.vstack([np.ones((1, n_pts)), psi])
    b = np.zeros(C.shape[0])
    b[0] = 1.0
    Cn, norms = _unit_rows(C)
    bn = b / norms
    full_rank = C.shape[0] <= n_pts and np.linalg.matrix_rank(Cn) == C.shape[0]
    if full_rank and C.shape[0] == n_pts:
        w = linalg.solve(C, b)      # square: the unique solution
    elif full_rank:
        w = _min_norm_affine(Cn, bn)
        w = w + _min_norm_affine(Cn, bn - Cn @ w)   # one refinement step
    else:
        w = np.linalg.lstsq(Cn, bn, rcond=None)[0]
    w = _unit_sum(w)
    viol = np.abs(Cn @ w - bn)
    gamma = psi @ w
    status = SolverStatus.OPTIMAL if viol.max() < cfg.solver_tol else SolverStatus.INFEASIBLE
    sol = WeightSolution(pts, w, 0.0, None, gamma * scale, status, Program.EXACT, N,
                         cfg.basis.to_dict())
    if status is not SolverStatus.OPTIMAL:
        raise InfeasibleError(
            f"exact weight program infeasible: {C.shape[0]} constraints, {n_pts} weights "
            f"(max residual {viol.max():.3g})", sol)
    return sol


class _BoxQP:
    """``min ||w||^2`` s.t. ``sum w = 1``, ``|A w|_inf <= eps`` via primal active set."""

    def __init__(self, A, w_start):
        self.A_unit, self.norms = _unit_rows(A)
        self.w_start = w_start
        self.n = A.shape[1]
        self.iterations = 0

    def solve(self, eps, tol=1e-12):
        G = np.vstack([self.A_unit, -self.A_unit])
        c = np.concatenate([eps / self.norms, eps / self.norms])
        w = self.w_start.copy()
        active = []
        ones = np.ones((1, self.n))
        for it in range(50 * (len(c) + 1) + 50):
            E = np.vstack([ones, G[active]]) if active else ones
            q, r = linalg.qr(E.T, mode="economic")
            p = -(w - q @ (q.T @ w))
            if np.linalg.norm(p) <= tol * max(1.0, np.linalg.norm(w)):
                lam = -linalg.solve_triangular(r, q.T @ w)
                lam_ineq = lam[1:]
                if not active or lam_ineq.min() >= -tol * max(1.0, np.abs(lam).max()):
                    self.iterations += it + 1
                    return w, active, lam
                active.pop(int(np.argmin(lam_ineq)))
                continue
            gp = G @ p
            slack = c - G @ w
            alpha, block = 1.0, None
            m = len(self.norms)
            for k in np.flatnonzero(gp > 1e-300):
                # a row and its mirror are never both active (rank loss)
                if k in active or (k + m) % (2 * m) in active:
                    continue
                step = max(slack[k], 0.0) / gp[k]
                if step < alpha:
                    alpha, block = step, int(k)
            w = w + alpha * p
            if block is not None:
                active.append(block)
        raise ToleranceNotMet("active-set iteration limit reached")

    def value(self, eps):
        if eps == 0.0:
            # every row is an equality; w_start already solves it with minimum norm
            w = self.w_start
            return float(w @ w), w
        w = self.solve(eps)[0]
        return float(w @ w), w


def _phase_one(A):
    """Smallest achievable ``max |A w|`` under ``sum w = 1`` (LP) and its point."""
    m, n = A.shape
    # variables (w, t): min t s.t. A w - t <= 0, -A w - t <= 0, sum w = 1
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    A_ub = np.block([[A, -np.ones((m, 1))], [-A, -np.ones((m, 1))]])
    res = optimize.linprog(cost, A_ub=A_ub, b_ub=np.zeros(2 * m),
                           A_eq=np.concatenate([np.ones(n), [0.0]])[None, :], b_eq=[1.0],
                           bounds=[(None, None)] * (n + 1), method="highs")
    if not res.success:
        raise ToleranceNotMet(f"phase-one LP failed: {res.message}")
    w = res.x[:n]
    w = w + (1.0 - w.sum()) / n
    return float(np.abs(A @ w).max()), w


def solve_weights_relaxed(cfg: EnsembleConfig, N: int) -> WeightSolution:
    """Minimise the scaled bias slack ``eps`` under the norm cap ``eta``.

    With ``EtaPolicy.EQUAL_EPSILON`` the cap is coupled to the objective
    (``eta = eps``). Raises :class:`InfeasibleError` if a fixed ``eta`` is
    below ``1/|L|``, the smallest squared norm any weight vector summing to
    one can have.
    """
    psi, scale = build_constraint_matrix(cfg.basis, cfg.L, N, cfg.L_y)
    pts = cfg.points
    n_pts = len(pts)
    A = psi * scale[:, None]
    fixed = cfg.eta_policy is EtaPolicy.FIXED
    eta = float(cfg.eta) if fixed else None
    meta = dict(program=Program.RELAXED, N=N, basis=cfg.basis.to_dict())

    if fixed and eta < 1.0 / n_pts * (1 - 1e-12):
        sol = WeightSolution(pts, np.full(n_pts, 1.0 / n_pts), math.inf, eta,
                             A @ np.full(n_pts, 1.0 / n_pts), SolverStatus.INFEASIBLE, **meta)
        raise InfeasibleError(f"eta={eta:g} < 1/|L| = {1.0 / n_pts:g}: no weights sum to one", sol)

    if n_pts == 1 or A.shape[0] == 0:
        w = np.full(n_pts, 1.0 / n_pts) if A.shape[0] == 0 else np.ones(1)
        eps = float(np.abs(A @ w).max()) if A.shape[0] else 0.0
        return WeightSolution(pts, w, eps, eps if not fixed else eta, A @ w,
                              SolverStatus.OPTIMAL, **meta)

    try:
        w0 = solve_weights_exact(EnsembleConfig(cfg.L, cfg.basis, Program.EXACT,
                                                solver_tol=cfg.solver_tol, L_y=cfg.L_y), N).weights
        eps_lo = 0.0
    except InfeasibleError:
        eps_lo, w0 = _phase_one(A)

    qp = _BoxQP(A, w0)
    cap = (lambda e: e) if not fixed else (lambda e: eta)
    f_lo, w_lo = qp.value(eps_lo)
    if f_lo <= cap(eps_lo):
        eps_star, w = eps_lo, w_lo
    else:
        w_bar = np.full(n_pts, 1.0 / n_pts)
        eps_hi = float(np.abs(A @ w_bar).max())
        if not fixed:
            eps_hi = max(eps_hi, 1.0 / n_pts)
        eps_star = optimize.brentq(lambda e: qp.value(e)[0] - cap(e), eps_lo, eps_hi,
                                   xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        w = qp.value(eps_star)[1]

    w = _unit_sum(w)
    res = A @ w
    eta_out = eta if fixed else eps_star
    viol = max(abs(w.sum() - 1.0),
               float(np.max(np.abs(res) - eps_star) / max(1.0, eps_star)),
               float(w @ w - eta_out) / max(1.0, eta_out))
    status = SolverStatus.OPTIMAL if viol <= cfg.solver_tol else SolverStatus.TOLERANCE_NOT_MET
    sol = WeightSolution(pts, w, float(eps_star), float(eta_out), res, status,
                         iterations=qp.iterations, **meta)
    if status is not SolverStatus.OPTIMAL:
        raise ToleranceNotMet(f"relaxed solve stalled (violation {viol:.3g})", sol)
    return sol


@functools.lru_cache(maxsize=256)
def solve_weights(cfg: EnsembleConfig, N: int) -> WeightSolution:
    """Cached dispatch on ``cfg.program``; the solve depends only on ``(cfg, N)``."""
    if cfg.program is Program.EXACT:
        return solve_weights_exact(cfg, N)
    return solve_weights_relaxed(cfg, N)


# Ensemble estimators
# -----------------------------------

def ensemble_estimate_mixed(data: Dataset, cfg: EnsembleConfig,
                            plugin_cfg: PluginConfig) -> EstimateReport:
    """Weighted ensemble for continuous X and discrete Y.

    One offline weight solve, then per-``(l, y)`` plug-in values at
    ``h_X(l) = l N^-a`` and ``h_X|y(l) = l N_y^-a``, combined as
    ``sum_l w(l) sum_y (N_y/N) G_{l,y}``.
    """
    if data.x_cont is None or data.y_disc is None:
        raise MissingParts("mixed ensemble needs x_cont and y_disc")
    if cfg.basis.case.continuous:
        raise ValueError("mixed ensemble needs a mixed basis")
    n = data.n
    sol = solve_weights(cfg, n)
    l = cfg.L.as_array()
    a = cfg.basis.rate
    hx = l * n ** -a
    given = {lab: l * len(idx) ** -a for lab, idx in class_indices(data.y_disc).items()}
    table = mixed_table(data.x_cont, data.y_disc, plugin_cfg.kernel_x, plugin_cfg.functional,
                        hx, given, plugin_cfg.singleton_policy, plugin_cfg.fast,
                        plugin_cfg.count_floor)
    per_l = table.combine()
    _warn_clamped(table.n_clamped, plugin_cfg.functional)
    per_class = {lab: math.fsum(sol.weights * table.values[:, k])
                 for k, lab in enumerate(table.labels)}
    return EstimateReport(value=math.fsum(sol.weights * per_l), case=Case.CONT_DISC,
                          n_samples=n, weights_used=sol, per_class_values=per_class,
                          per_bandwidth_values=per_l, n_clamped=table.n_clamped,
                          skipped_classes=table.skipped)


def ensemble_estimate_cont(data: Dataset, cfg: EnsembleConfig,
                           plugin_cfg: PluginConfig) -> EstimateReport:
    """Weighted ensemble for continuous X and Y over the grid ``L_X x L_Y``."""
    if data.y_cont is None:
        raise MissingContinuousY("continuous ensemble needs y_cont")
    if not cfg.basis.case.continuous:
        raise ValueError("continuous ensemble needs a continuous basis")
    x, y = data.x_cont, data.y_cont
    n = data.n
    sol = solve_weights(cfg, n)
    s = n ** -cfg.basis.rate
    lx = cfg.L.as_array()
    ly = lx if cfg.L_y is None else cfg.L_y.as_array()
    hx, hy = lx * s, ly * s
    kx, ky = plugin_cfg.kernel_x, plugin_cfg.ky
    fx = loo_density(x, kx, hx, fast=plugin_cfg.fast)
    fy = loo_density(y, ky, hy, fast=plugin_cfg.fast)
    sums = loo_sums_joint(x, y, kx, ky, hx, hy, fast=plugin_cfg.fast)
    norm = (n - 1) * hx[:, None] ** x.shape[1] * hy[None, :] ** y.shape[1]
    fz = sums / norm[None]
    fn, cf = plugin_cfg.functional, plugin_cfg.count_floor
    fx, c1 = resolution_floor(fx, n - 1, [hx], [x.shape[1]], [kx], cf, fn)
    fy, c2 = resolution_floor(fy, n - 1, [hy], [y.shape[1]], [ky], cf, fn)
    fz, c3 = resolution_floor(fz, n - 1, [hx[:, None], hy[None, :]],
                              [x.shape[1], y.shape[1]], [kx, ky], cf, fn)
    g, n_clamped = fn.evaluate(fx[:, :, None] * fy[:, None, :], fz)
    n_clamped += c1 + c2 + c3
    per_pair = (g.sum(axis=0) / n).ravel()
    _warn_clamped(n_clamped, plugin_cfg.functional)
    return EstimateReport(value=math.fsum(sol.weights * per_pair), case=Case.CONT_CONT,
                          n_samples=n, weights_used=sol, per_bandwidth_values=per_pair,
                          n_clamped=n_clamped)


# Parameter selection
# -----------------------------------

def _nn_cheb(points, scale_radius=1.0):
    # Largest nearest-neighbour Chebyshev distance over the sample.
    n = points.shape[0]
    worst = 0.0
    step = max(1, (1 << 22) // n)
    for a in range(0, n, step):
        b = min(n, a + step)
        d = cdist(points[a:b], points, metric="chebyshev")
        d[np.arange(b - a), np.arange(a, b)] = np.inf
        worst = max(worst, float(d.min(axis=1).max()))
    return worst / scale_radius


def _diameter(points):
    span = points.max(axis=0) - points.min(axis=0)
    return float(np.sqrt(np.sum(span ** 2)))


def select_parameters(data: Dataset, kernel: KernelSpec = KernelSpec(), L_count: int = 40,
                      basis: Optional[BasisFamily] = None) -> BandwidthSet:
    """Linearly spaced parameters following the usual rules of thumb.

    The smallest ``l`` keeps every leave-one-out density positive (each
    sample has a neighbour inside its window, marginal and class-conditional),
    the largest keeps the marginal bandwidth below the diameter of the data's
    bounding box, and ``L_count`` exceeds the number of basis terms.
    """
    if not 30 <= L_count <= 60:
        raise ValueError("L_count should lie in [30, 60]")
    if basis is not None and L_count <= len(basis):
        raise ValueError(f"L_count={L_count} must exceed |J|={len(basis)}")
    if not kernel.bounded:
        raise ValueError("parameter selection needs a bounded-support kernel")
    r = kernel.support_radius
    # bounded smooth profiles vanish on the window edge
    edge = 1.0 if kernel.profile is Profile.UNIFORM else 1.0 + 1e-9
    n = data.n

    if data.y_disc is not None and data.x_cont is not None:
        if basis is None:
            basis = BasisFamily.mixed_odin1(data.d_x)
        a = basis.rate
        pts = data.x_cont
        lo = _nn_cheb(pts, r) / n ** -a
        for idx in class_indices(data.y_disc).values():
            if len(idx) >= 2:
                lo = max(lo, _nn_cheb(pts[idx], r) / len(idx) ** -a)
        diam = _diameter(pts)
        scale = n ** -a
    elif data.y_cont is not None and data.x_cont is not None:
        if basis is None:
            basis = BasisFamily.cont_odin1(data.d_x, data.d_y)
        a = basis.rate
        ry = r
        pts = np.hstack([data.x_cont / r, data.y_cont / ry])
        lo = _nn_cheb(pts) / n ** -a
        diam = min(_diameter(data.x_cont), _diameter(data.y_cont))
        scale = n ** -a
    else:
        raise MissingParts("parameter selection needs x_cont with y_disc or y_cont")

    if diam == 0.0:
        return BandwidthSet.linspace(*DEFAULT_L_RANGE, L_count)
    lo *= edge * (1 + 1e-9)
    hi = diam / scale * (1 - 1e-9)
    if lo == 0.0:
        lo = min(DEFAULT_L_RANGE[0], hi / 2)
    if lo >= hi:
        raise NoFeasibleRange(f"smallest admissible l={lo:.4g} exceeds largest {hi:.4g}")
    return BandwidthSet.linspace(lo, hi, L_count)

"""Truncated-Gaussian mixtures on the unit cube and their exact MI.

``X | Y=y`` is ``N(mu_y, s2 * I_d)`` restricted to ``[0, 1]^d``. The
covariance is isotropic, so the truncated density factorises over axes and
is normalised with 1-D Gaussian CDFs.

Randomness: every entry point takes a seed (int, ``SeedSequence`` or
``Generator``) and draws from numpy's default PCG64 generator. Monte-Carlo
integration splits its seed with ``SeedSequence.spawn`` into one stream
per (class, chunk).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .core import (Dataset, Functional, OutOfBox, RejectionStall,
                   UnsupportedDimension)

__all__ = [
    "TruncGaussMixtureSpec", "OracleMethod", "OracleResult", "sample",
    "sample_arrays", "exact_density", "oracle_mi", "case1_spec", "case2_spec",
]

_MC_CHUNK = 1 << 18


@dataclass(frozen=True)
class TruncGaussMixtureSpec:
    class_probs: tuple
    means: tuple                     # one d-vector per class
    covariance_scale: float = 0.1    # variance of the untruncated Gaussian
    d: Optional[int] = None

    def __post_init__(self):
        probs = tuple(float(p) for p in self.class_probs)
        means = tuple(tuple(float(v) for v in np.atleast_1d(m)) for m in self.means)
        if len(probs) != len(means) or not probs:
            raise ValueError("need one mean per class")
        d = len(means[0]) if self.d is None else int(self.d)
        if any(len(m) != d for m in means):
            raise ValueError(f"all means must have dimension {d}")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError("class_probs must be nonnegative and sum to 1")
        if any(not (0.0 <= v <= 1.0) for m in means for v in m):
            raise ValueError("means must lie inside the unit cube")
        if not self.covariance_scale > 0:
            raise ValueError("covariance_scale must be positive")
        object.__setattr__(self, "class_probs", probs)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "d", d)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.covariance_scale)

    @property
    def n_classes(self) -> int:
        return len(self.class_probs)

    def mean_array(self) -> np.ndarray:
        return np.asarray(self.means)

    def acceptance(self, k: int) -> float:
        """Probability that an untruncated draw of class ``k`` lands in the cube."""
        return float(np.prod(_axis_mass(self.mean_array()[k], self.sigma)))

    def to_dict(self) -> dict:
        return {"class_probs": list(self.class_probs),
                "means": [list(m) for m in self.means],
                "covariance_scale": self.covariance_scale, "d": self.d}

    @classmethod
    def from_dict(cls, d: dict) -> "TruncGaussMixtureSpec":
        return cls(tuple(d["class_probs"]), tuple(map(tuple, d["means"])),
                   float(d.get("covariance_scale", 0.1)), d.get("d"))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, s: str) -> "TruncGaussMixtureSpec":
        return cls.from_dict(json.loads(s))


def case1_spec(d: int = 4) -> TruncGaussMixtureSpec:
    """Three unequal classes centred at 0.25, 0.75 and 0.5 on the diagonal."""
    ones = np.ones(d)
    return TruncGaussMixtureSpec((0.4, 0.4, 0.2),
                                 (0.25 * ones, 0.75 * ones, 0.5 * ones), 0.1, d)


def case2_spec() -> TruncGaussMixtureSpec:
    """Six classes in six dimensions."""
    c = lambda *blocks: np.concatenate([np.full(n, v) for v, n in blocks])  # noqa: E731
    means = (c((0.25, 6)), c((0.75, 6)), c((0.5, 6)),
             c((0.25, 4), (0.5, 2)), c((0.75, 2), (0.375, 4)), c((0.5, 4), (0.25, 2)))
    return TruncGaussMixtureSpec((0.35, 0.2, 0.15, 0.15, 0.1, 0.05), means, 0.1, 6)


def _axis_mass(mu, sigma):
    mu = np.asarray(mu, dtype=np.float64)
    return special.ndtr((1.0 - mu) / sigma) - special.ndtr((0.0 - mu) / sigma)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _draw_class(rng, mu, sigma, count, acceptance):
    if acceptance < 1e-6:
        raise RejectionStall(f"acceptance rate {acceptance:.2e} < 1e-6")
    d = len(mu)
    out = np.empty((count, d))
    filled = 0
    while filled < count:
        need = count - filled
        batch = int(need / acceptance * 1.1) + 16
        z = rng.normal(mu, sigma, size=(batch, d))
        ok = z[np.all((z >= 0.0) & (z <= 1.0), axis=1)]
        take = min(need, len(ok))
        out[filled:filled + take] = ok[:take]
        filled += take
    return out


def sample_arrays(spec: TruncGaussMixtureSpec, N: int, seed=None):
    """Raw ``(x, labels)`` arrays; ``sample`` wraps them into a ``Dataset``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = _rng(seed)
    labels = rng.choice(spec.n_classes, size=N, p=np.asarray(spec.class_probs))
    x = np.empty((N, spec.d))
    mus = spec.mean_array()
    for k in range(spec.n_classes):
        idx = np.flatnonzero(labels == k)
        if len(idx):
            x[idx] = _draw_class(rng, mus[k], spec.sigma, len(idx), spec.acceptance(k))
    return x, labels


def sample(spec: TruncGaussMixtureSpec, N: int, seed=None) -> Dataset:
    """Draw ``N`` labelled samples: ``Y`` from the class probabilities, then
    ``X | Y`` by rejection into the unit cube. Deterministic given ``seed``."""
    x, labels = sample_arrays(spec, N, seed)
    return Dataset(x_cont=x, y_disc=labels)


def _class_density(points, mu, sigma):
    z = (points - mu) / sigma
    log_pdf = -0.5 * z * z - 0.5 * math.log(2 * math.pi) - math.log(sigma)
    return np.exp(log_pdf.sum(axis=1) - np.log(_axis_mass(mu, sigma)).sum())


def _densities(spec, points):
    # (M, K) class-conditional densities and the (M,) mixture density.
    mus = spec.mean_array()
    cond = np.column_stack([_class_density(points, mus[k], spec.sigma)
                            for k in range(spec.n_classes)])
    marg = np.zeros(points.shape[0])
    for k, p in enumerate(spec.class_probs):
        marg += p * cond[:, k]
    return cond, marg


def exact_density(spec: TruncGaussMixtureSpec, x, y: Optional[int] = None):
    """``f_{X|y}(x)`` or, with ``y=None``, the mixture density ``f_X(x)``.

    Accepts a single point or an ``(M, d)`` array.
    """
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != spec.d:
        raise ValueError(f"points must have dimension {spec.d}")
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise OutOfBox("point outside the unit cube")
    if y is None:
        out = _densities(spec, pts)[1]
    else:
        out = _class_density(pts, spec.mean_array()[y], spec.sigma)
    return float(out[0]) if single else out


class OracleMethod(str, enum.Enum):
    QUADRATURE = "quadrature"
    MONTE_CARLO = "mc"


@dataclass(frozen=True)
class OracleResult:
    value: float
    std_error: float
    method: OracleMethod
    error_bound: float = 0.0
    evaluations: int = 0

    def to_dict(self):
        return {"value": self.value, "std_error": self.std_error,
                "method": self.method.value, "error_bound": self.error_bound,
                "evaluations": self.evaluations}


def _quadrature(spec, functional, n_nodes):
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    t, w = 0.5 * (t + 1.0), 0.5 * w
    grids = np.meshgrid(*([t] * spec.d), indexing="ij")
    wgrid = np.ones_like(grids[0])
    for g in np.meshgrid(*([w] * spec.d), indexing="ij"):
        wgrid = wgrid * g
    pts = np.column_stack([g.ravel() for g in grids])
    cond, marg = _densities(spec, pts)
    wv = wgrid.ravel()
    total = 0.0
    for k, p in enumerate(spec.class_probs):
        g, _ = functional.evaluate(marg, cond[:, k])
        # self-normalised: the rule's own mass error cancels
        mass = wv * cond[:, k]
        total += p * float(np.sum(mass * g) / np.sum(mass))
    return total, pts.shape[0] * spec.n_classes


def oracle_mi(spec: TruncGaussMixtureSpec, functional: Functional,
              method: OracleMethod = OracleMethod.MONTE_CARLO, M: int = 10 ** 7,
              seed=0, n_nodes: int = 96) -> OracleResult:
    """Ground-truth ``sum_y p_y E_{X|y}[ g(f_X(X) / f_{X|y}(X)) ]``.

    Quadrature (``d <= 2``) uses a Gauss-Legendre product rule and reports
    ``|Q(n) - Q(n/2)|`` as ``error_bound``. Monte-Carlo stratifies by class
    (``M_y`` proportional to ``p_y``) and reports the stratified standard
    error.
    """
    method = OracleMethod(method)
    if method is OracleMethod.QUADRATURE:
        if spec.d > 2:
            raise UnsupportedDimension("quadrature oracle supports d <= 2")
        fine, evals = _quadrature(spec, functional, n_nodes)
        coarse, _ = _quadrature(spec, functional, max(2, n_nodes // 2))
        return OracleResult(fine, 0.0, method, abs(fine - coarse), evals)

    if M < 2 * spec.n_classes:
        raise ValueError("M too small")
    mus = spec.mean_array()
    root = np.random.SeedSequence(seed)
    class_seeds = root.spawn(spec.n_classes)
    value, var = 0.0, 0.0
    for k, p in enumerate(spec.class_probs):
        if p == 0:
            continue
        m_k = max(2, int(round(M * p)))
        n_chunks = -(-m_k // _MC_CHUNK)
        total, total_sq = 0.0, 0.0
        for c, ss in enumerate(class_seeds[k].spawn(n_chunks)):
            size = min(_MC_CHUNK, m_k - c * _MC_CHUNK)
            pts = _draw_class(np.random.default_rng(ss), mus[k], spec.sigma, size,
                              spec.acceptance(k))
            cond, marg = _densities(spec, pts)
            g, _ = functional.evaluate(marg, cond[:, k])
            total += float(g.sum())
            total_sq += float(np.dot(g, g))
        mean = total / m_k
        s2 = max(total_sq / m_k - mean * mean, 0.0) * m_k / (m_k - 1)
        value += p * mean
        var += p * p * s2 / m_k
    return OracleResult(value, math.sqrt(var), method, 0.0, M)

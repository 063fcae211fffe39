"""Shared domain types: datasets, kernels, MI functionals and reports."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, Optional, Sequence

import numpy as np

__all__ = [
    "MIEstError", "DegenerateDataset", "MissingContinuousY", "MissingParts",
    "SingletonClass", "NonPositiveArgument", "InfeasibleError",
    "ToleranceNotMet", "TooFewSamples", "NoFeasibleRange", "NonPositiveInput",
    "RejectionStall", "UnsupportedDimension", "OutOfBox", "UnsafeKernelError",
    "Dataset", "Profile", "KernelSpec", "FunctionalKind", "Functional",
    "BandwidthSet", "Case", "EstimateReport", "kernel_eval", "functional_eval",
    "shannon", "renyi", "DEFAULT_FLOOR",
]

DEFAULT_FLOOR = 1e-12


# Errors
# -----------------------------------

class MIEstError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateDataset(MIEstError):
    pass


class MissingContinuousY(MIEstError):
    pass


class MissingParts(MIEstError):
    pass


class SingletonClass(MIEstError):
    pass


class NonPositiveArgument(MIEstError, ArithmeticError):
    pass


class InfeasibleError(MIEstError):
    """Weight program has no feasible point. ``solution`` holds diagnostics."""

    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


class ToleranceNotMet(MIEstError):
    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


class TooFewSamples(MIEstError):
    pass


class NoFeasibleRange(MIEstError):
    pass


class NonPositiveInput(MIEstError, ValueError):
    pass


class RejectionStall(MIEstError):
    pass


class UnsupportedDimension(MIEstError):
    pass


class OutOfBox(MIEstError, ValueError):
    pass


class UnsafeKernelError(MIEstError, ValueError):
    pass


# Dataset
# -----------------------------------

def _as_labels(arr, n, name):
    if arr is None:
        return None
    arr = np.asarray(arr)
    if arr.ndim != 1:
        raise DegenerateDataset(f"{name} must be a 1-D label vector")
    if arr.shape[0] != n:
        raise DegenerateDataset(f"{name} has {arr.shape[0]} rows, expected {n}")
    return arr


def _as_matrix(arr, name):
    if arr is None:
        return None
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise DegenerateDataset(f"{name} must be an (N, d) matrix with d >= 1")
    if not np.all(np.isfinite(arr)):
        raise DegenerateDataset(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired samples ``Z_i = (X_i, Y_i)``.

    ``x_cont`` and ``y_cont`` are ``(N, d)`` float arrays, ``x_disc`` and
    ``y_disc`` are length-``N`` label vectors. Any label dtype works; the
    alphabet is whatever occurs in the data.
    """

    x_cont: Optional[np.ndarray] = None
    y_cont: Optional[np.ndarray] = None
    y_disc: Optional[np.ndarray] = None
    x_disc: Optional[np.ndarray] = None

    def __post_init__(self):
        xc = _as_matrix(self.x_cont, "x_cont")
        yc = _as_matrix(self.y_cont, "y_cont")
        parts = [p for p in (xc, yc, self.y_disc, self.x_disc) if p is not None]
        if not parts:
            raise DegenerateDataset("dataset has no columns")
        n = len(parts[0])
        for name, p in (("x_cont", xc), ("y_cont", yc)):
            if p is not None and p.shape[0] != n:
                raise DegenerateDataset(f"{name} has {p.shape[0]} rows, expected {n}")
        yd = _as_labels(self.y_disc, n, "y_disc")
        xd = _as_labels(self.x_disc, n, "x_disc")
        if yc is None and yd is None:
            raise DegenerateDataset("at least one of y_cont / y_disc is required")
        if xc is None and xd is None:
            raise DegenerateDataset("at least one of x_cont / x_disc is required")
        if n < 2:
            raise DegenerateDataset(f"need N >= 2 samples, got {n}")
        for arr in (xc, yc):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "x_cont", xc)
        object.__setattr__(self, "y_cont", yc)
        object.__setattr__(self, "y_disc", yd)
        object.__setattr__(self, "x_disc", xd)

    @property
    def n(self) -> int:
        for p in (self.x_cont, self.y_cont, self.y_disc, self.x_disc):
            if p is not None:
                return len(p)
        raise AssertionError("unreachable")

    @property
    def d_x(self) -> int:
        return 0 if self.x_cont is None else self.x_cont.shape[1]

    @property
    def d_y(self) -> int:
        return 0 if self.y_cont is None else self.y_cont.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        take = lambda a: None if a is None else a[idx]  # noqa: E731
        return Dataset(take(self.x_cont), take(self.y_cont), take(self.y_disc),
                       take(self.x_disc))


# Kernels
# -----------------------------------

class Profile(str, enum.Enum):
    UNIFORM = "uniform"
    EPANECHNIKOV = "epanechnikov"
    TRIANGULAR = "triangular"
    GAUSSIAN = "gaussian"


_DEFAULT_RADIUS = {
    Profile.UNIFORM: 0.5,
    Profile.EPANECHNIKOV: 1.0,
    Profile.TRIANGULAR: 1.0,
    Profile.GAUSSIAN: math.inf,
}


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric per-axis kernel profile; the product kernel multiplies axes.

    Bounded profiles are rescaled to ``[-support_radius, support_radius]``
    and keep unit mass. The default uniform kernel is the indicator of
    ``[-1/2, 1/2]`` so ``h`` is the full window width per axis.
    Gaussian is only accepted with ``unsafe=True``.
    """

    profile: Profile = Profile.UNIFORM
    support_radius: Optional[float] = None
    unsafe: bool = False

    def __post_init__(self):
        prof = Profile(self.profile)
        object.__setattr__(self, "profile", prof)
        if prof is Profile.GAUSSIAN:
            if not self.unsafe:
                raise UnsafeKernelError(
                    "gaussian kernel has unbounded support; pass unsafe=True")
            object.__setattr__(self, "support_radius", math.inf)
            return
        r = _DEFAULT_RADIUS[prof] if self.support_radius is None else float(self.support_radius)
        if not (r > 0 and math.isfinite(r)):
            raise ValueError("support_radius must be positive and finite")
        object.__setattr__(self, "support_radius", r)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.support_radius)

    @property
    def sup_norm(self) -> float:
        """``||k||_inf`` of the per-axis profile."""
        return float(self.profile_eval(np.zeros(1))[0])

    def profile_eval(self, t) -> np.ndarray:
        """Evaluate the 1-D profile elementwise."""
        t = np.abs(np.asarray(t, dtype=np.float64))
        prof = self.profile
        if prof is Profile.GAUSSIAN:
            return np.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
        r = self.support_radius
        if prof is Profile.UNIFORM:
            # closed window: |t| == r counts
            return np.where(t <= r, 0.5 / r, 0.0)
        s = t / r
        if prof is Profile.EPANECHNIKOV:
            return np.where(s <= 1.0, 0.75 * (1.0 - s * s) / r, 0.0)
        return np.where(s <= 1.0, (1.0 - s) / r, 0.0)

    def product_eval(self, u) -> np.ndarray:
        """Product kernel over the last axis of ``u``."""
        u = np.asarray(u, dtype=np.float64)
        return np.prod(self.profile_eval(u), axis=-1)


def kernel_eval(spec: KernelSpec, u) -> float:
    """Product kernel value ``prod_j k(u_j)`` for a single point ``u``."""
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    return float(spec.product_eval(u))


# Functionals
# -----------------------------------

class FunctionalKind(str, enum.Enum):
    SHANNON = "shannon"
    RENYI = "renyi"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Functional:
    """MI integrand ``g(t1, t2) = g(t1 / t2)``.

    Arguments below ``lipschitz_floor`` are clamped (and counted) unless
    ``strict`` is set, in which case non-positive arguments raise
    :class:`NonPositiveArgument`.
    """

    kind: FunctionalKind
    alpha: Optional[float] = None
    ratio_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_floor: float = DEFAULT_FLOOR
    strict: bool = False
    declared_lipschitz: bool = True

    def __post_init__(self):
        kind = FunctionalKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is FunctionalKind.RENYI and self.alpha is None:
            raise ValueError("renyi functional needs alpha")
        if kind is FunctionalKind.CUSTOM and self.ratio_fn is None:
            raise ValueError("custom functional needs ratio_fn")
        if not self.lipschitz_floor > 0:
            raise ValueError("lipschitz_floor must be positive")

    @property
    def name(self) -> str:
        if self.kind is FunctionalKind.RENYI:
            return f"renyi({self.alpha:g})"
        return self.kind.value

    def of_ratio(self, r: np.ndarray) -> np.ndarray:
        if self.kind is FunctionalKind.SHANNON:
            return np.log(r)
        if self.kind is FunctionalKind.RENYI:
            return np.power(r, self.alpha)
        return np.asarray(self.ratio_fn(r), dtype=np.float64)

    def evaluate(self, t1, t2):
        """Vectorized ``g(t1/t2)``. Returns ``(values, n_clamped)``."""
        t1 = np.asarray(t1, dtype=np.float64)
        t2 = np.asarray(t2, dtype=np.float64)
        floor = self.lipschitz_floor
        if self.strict:
            if np.any(t1 <= 0) or np.any(t2 <= 0):
                raise NonPositiveArgument(
                    "zero density estimate encountered (strict mode); "
                    "increase the smallest bandwidth")
            n_clamped = 0
        else:
            low1 = t1 < floor
            low2 = t2 < floor
            n_clamped = int(np.count_nonzero(low1 | low2))
            if n_clamped:
                t1 = np.where(low1, floor, t1)
                t2 = np.where(low2, floor, t2)
        return self.of_ratio(t1 / t2), n_clamped


def shannon(**kw) -> Functional:
    return Functional(FunctionalKind.SHANNON, **kw)


def renyi(alpha: float, **kw) -> Functional:
    return Functional(FunctionalKind.RENYI, alpha=float(alpha), **kw)


def functional_eval(f: Functional, t1: float, t2: float) -> float:
    vals, n_clamped = f.evaluate(t1, t2)
    if n_clamped:
        warnings.warn(f"{n_clamped} functional argument(s) clamped at "
                      f"{f.lipschitz_floor:g}", RuntimeWarning, stacklevel=2)
    return float(vals)


# Bandwidth parameters and reports
# -----------------------------------

@dataclass(frozen=True)
class BandwidthSet:
    """Ordered, distinct, positive bandwidth parameters ``l``."""

    params: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in np.atleast_1d(np.asarray(self.params, dtype=np.float64)))
        if not p:
            raise ValueError("bandwidth set is empty")
        if any(not (v > 0 and math.isfinite(v)) for v in p):
            raise ValueError("bandwidth parameters must be positive and finite")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ValueError("bandwidth parameters must be strictly increasing")
        object.__setattr__(self, "params", p)

    @classmethod
    def linspace(cls, lo: float, hi: float, count: int) -> "BandwidthSet":
        if count == 1:
            return cls((lo,))
        return cls(tuple(np.linspace(lo, hi, count)))

    def __len__(self):
        return len(self.params)

    def __iter__(self):
        return iter(self.params)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.params)


class Case(str, enum.Enum):
    CONT_CONT = "cont_cont"
    CONT_DISC = "cont_disc"
    MIXED_GENERAL = "mixed_general"


@dataclass
class EstimateReport:
    value: float
    case: Case
    n_samples: int
    weights_used: Optional[object] = None
    per_class_values: Optional[Dict[Hashable, float]] = None
    per_bandwidth_values: Optional[Sequence[float]] = None
    n_clamped: int = 0
    skipped_classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "value": self.value,
            "case": self.case.value,
            "n_samples": self.n_samples,
            "n_clamped": self.n_clamped,
            "skipped_classes": [_jsonable_label(k) for k in self.skipped_classes],
        }
        if self.per_class_values is not None:
            out["per_class_values"] = {str(_jsonable_label(k)): v
                                       for k, v in self.per_class_values.items()}
        if self.per_bandwidth_values is not None:
            out["per_bandwidth_values"] = list(map(float, self.per_bandwidth_values))
        if self.weights_used is not None:
            out["weights"] = self.weights_used.to_dict()
        return out


def _jsonable_label(k):
    if isinstance(k, tuple):
        return [_jsonable_label(v) for v in k]
    if isinstance(k, np.generic):
        return k.item()
    return k

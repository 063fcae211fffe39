"""Normal-approximation confidence intervals and a normality diagnostic.

Resampling randomness comes from numpy's PCG64 generator. A single 64-bit
seed is split with ``SeedSequence(seed).spawn(B)`` into one independent
stream per replicate, so the result does not depend on ``n_jobs``.

The intervals target the estimator's mean, not the true information: the
finite-sample bias of the estimator is not corrected.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .core import Dataset, TooFewSamples
from .kde import class_indices

__all__ = ["VarianceMethod", "ConfidenceReport", "NormalityReport",
           "confidence_interval", "normality_diagnostic", "normal_quantile"]


class VarianceMethod(str, enum.Enum):
    BOOTSTRAP = "bootstrap"
    SUBSAMPLE = "subsample"


@dataclass(frozen=True)
class ConfidenceReport:
    estimate: float
    std_error: float
    level: float
    interval: Tuple[float, float]
    variance_method: VarianceMethod
    replicates: Tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "std_error": self.std_error,
                "level": self.level, "interval": list(self.interval),
                "variance_method": self.variance_method.value,
                "n_replicates": len(self.replicates)}


@dataclass(frozen=True)
class NormalityReport:
    ks_statistic: float
    p_value: float


def normal_quantile(level: float) -> float:
    """Two-sided standard normal critical value ``z_{(1+level)/2}``."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    return float(stats.norm.ppf(0.5 * (1.0 + level)))


def _value(out) -> float:
    return float(getattr(out, "value", out))


def _strata(data: Dataset):
    labels = data.y_disc
    if labels is None:
        return [np.arange(data.n)]
    return list(class_indices(labels).values())


def _resample(strata, rng, method):
    parts = []
    for idx in strata:
        if method is VarianceMethod.BOOTSTRAP:
            parts.append(idx[rng.integers(0, len(idx), size=len(idx))])
        else:
            parts.append(np.sort(rng.choice(idx, size=len(idx) // 2, replace=False)))
    return np.concatenate(parts)


def _replicate(data, estimator, strata, method, seed_seq):
    rng = np.random.default_rng(seed_seq)
    with warnings.catch_warnings():
        # per-replicate floor warnings are noise; the main estimate reports them
        warnings.simplefilter("ignore", RuntimeWarning)
        return _value(estimator(data.subset(_resample(strata, rng, method))))


def confidence_interval(data: Dataset, estimator: Callable[[Dataset], object],
                        level: float = 0.95, method=VarianceMethod.BOOTSTRAP,
                        B: int = 200, seed: Optional[int] = 0,
                        n_jobs: int = 1) -> ConfidenceReport:
    """``estimate +/- z * std_error`` with a resampling standard error.

    Parameters
    ----------
    estimator
        Maps a ``Dataset`` to a number (or to anything with a ``value``).
        It is re-run on every replicate, so class counts and any bandwidths
        derived from them are recomputed per replicate.
    method
        ``bootstrap``: ``B`` resamples with replacement, stratified by the
        discrete label when present. ``subsample``: ``B`` draws without
        replacement of ``floor(N_y / 2)`` points per class; their spread is
        rescaled by ``n / (N - n)`` (variance) to size ``N``.
    """
    z = normal_quantile(level)
    method = VarianceMethod(method)
    if B < 50:
        raise ValueError("B must be at least 50")
    strata = _strata(data)
    smallest = min(len(s) for s in strata)
    need = 2 if method is VarianceMethod.BOOTSTRAP else 4
    if smallest < need:
        raise TooFewSamples(f"a stratum has {smallest} samples; {method.value} needs {need}")

    estimate = _value(estimator(data))
    seeds = np.random.SeedSequence(seed).spawn(B)
    if n_jobs == 1:
        reps = [_replicate(data, estimator, strata, method, s) for s in seeds]
    else:
        reps = Parallel(n_jobs=n_jobs)(
            delayed(_replicate)(data, estimator, strata, method, s) for s in seeds)
    reps = np.asarray(reps, dtype=np.float64)
    if not np.all(np.isfinite(reps)):
        raise FloatingPointError("non-finite replicate estimate")
    var = float(np.var(reps, ddof=1))
    if method is VarianceMethod.SUBSAMPLE:
        n_sub = sum(len(s) // 2 for s in strata)
        var *= n_sub / (data.n - n_sub)
    se = math.sqrt(var)
    half = z * se
    return ConfidenceReport(estimate, se, level, (estimate - half, estimate + half),
                            method, tuple(reps.tolist()))


def normality_diagnostic(trials: Sequence[float]) -> NormalityReport:
    """KS test of the standardized ``trials`` against the standard normal."""
    x = np.asarray(trials, dtype=np.float64)
    if x.size < 100:
        raise TooFewSamples("normality diagnostic needs at least 100 values")
    sd = x.std(ddof=1)
    if sd == 0:
        raise ValueError("trials have zero spread")
    res = stats.kstest((x - x.mean()) / sd, "norm", method="asymp")
    return NormalityReport(float(res.statistic), float(res.pvalue))

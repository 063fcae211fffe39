"""Single-bandwidth KDE plug-in MI estimators."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Dict, Hashable, Mapping, Optional

import numpy as np

from .core import (Case, Dataset, EstimateReport, Functional, KernelSpec,
                   MissingContinuousY, MissingParts, SingletonClass)
from .kde import class_indices, loo_density, loo_sums_joint

__all__ = [
    "SingletonPolicy", "PluginConfig", "resolution_floor", "plugin_mi_cont", "plugin_mi_mixed",
    "plugin_mi_mixed_general", "mixed_table",
]


class SingletonPolicy(str, enum.Enum):
    SKIP = "skip"
    ERROR = "error"


@dataclass(frozen=True)
class PluginConfig:
    functional: Functional
    kernel_x: KernelSpec = KernelSpec()
    kernel_y: Optional[KernelSpec] = None
    h_x: Optional[float] = None
    h_y: Optional[float] = None
    h_x_given_y: Optional[Mapping[Hashable, float]] = None
    singleton_policy: SingletonPolicy = SingletonPolicy.SKIP
    fast: bool = True
    count_floor: float = 1.0    # empty windows count as this many neighbours

    @property
    def ky(self) -> KernelSpec:
        return self.kernel_y or self.kernel_x


def plugin_mi_cont(data: Dataset, cfg: PluginConfig) -> EstimateReport:
    """Plug-in estimate for continuous X and continuous Y.

    Averages ``g(f_X(X_i) f_Y(Y_i) / f_XY(X_i, Y_i))`` over the samples,
    every density being a leave-one-out KDE at sample ``i``.
    """
    if data.y_cont is None:
        raise MissingContinuousY("continuous-continuous estimate needs y_cont")
    if data.x_cont is None:
        raise MissingParts("continuous-continuous estimate needs x_cont")
    if cfg.h_x is None or cfg.h_y is None:
        raise ValueError("h_x and h_y are required")
    x, y = data.x_cont, data.y_cont
    n = data.n
    dx, dy = x.shape[1], y.shape[1]
    fn = cfg.functional
    fx = loo_density(x, cfg.kernel_x, [cfg.h_x], fast=cfg.fast)[:, 0]
    fy = loo_density(y, cfg.ky, [cfg.h_y], fast=cfg.fast)[:, 0]
    sums = loo_sums_joint(x, y, cfg.kernel_x, cfg.ky, [cfg.h_x], [cfg.h_y],
                          fast=cfg.fast)[:, 0, 0]
    fz = sums / ((n - 1) * cfg.h_x ** dx * cfg.h_y ** dy)
    fx, c1 = resolution_floor(fx, n - 1, [cfg.h_x], [dx], [cfg.kernel_x], cfg.count_floor, fn)
    fy, c2 = resolution_floor(fy, n - 1, [cfg.h_y], [dy], [cfg.ky], cfg.count_floor, fn)
    fz, c3 = resolution_floor(fz, n - 1, [cfg.h_x, cfg.h_y], [dx, dy],
                              [cfg.kernel_x, cfg.ky], cfg.count_floor, fn)
    vals, n_clamped = fn.evaluate(fx * fy, fz)
    n_clamped += c1 + c2 + c3
    _warn_clamped(n_clamped, cfg.functional)
    return EstimateReport(value=float(vals.sum() / n), case=Case.CONT_CONT,
                          n_samples=n, n_clamped=n_clamped)


@dataclass
class MixedTable:
    """Per-(bandwidth, class) plug-in values of the continuous-X / discrete-Y case."""

    labels: list          # retained class labels, sorted
    counts: np.ndarray    # N_y of retained classes
    values: np.ndarray    # (L, K) class-conditional averages
    skipped: list
    n_clamped: int

    def combine(self) -> np.ndarray:
        """Class-mass weighted sum per bandwidth, renormalised to retained mass."""
        mass = self.counts / self.counts.sum()
        # correctly rounded sums do not depend on class order
        terms = self.values * mass[None, :]
        return np.array([math.fsum(row) for row in terms])


def _resolve_singletons(groups, policy, what="class"):
    kept, skipped = {}, []
    for lab, idx in groups.items():
        if len(idx) >= 2:
            kept[lab] = idx
            continue
        if policy is SingletonPolicy.ERROR:
            raise SingletonClass(f"{what} {lab!r} has a single sample")
        skipped.append(lab)
    if skipped:
        warnings.warn(f"skipping singleton {what}(es) {skipped}; outer weights renormalised",
                      RuntimeWarning, stacklevel=3)
    if not kept:
        raise SingletonClass(f"every {what} is a singleton")
    return kept, skipped


def resolution_floor(f, m, widths, dims, kernels, count_floor, functional):
    """Replace exact-zero density estimates by ``count_floor`` neighbours at
    the kernel peak, ``count_floor * prod ||K||_inf / (m * prod h^d)``.

    ``widths`` and ``dims``/``kernels`` are parallel sequences (one entry
    per continuous block); each width array broadcasts against ``f``.
    Skipped in strict mode so the functional can reject the zero.
    Returns ``(f, n_replaced)``.
    """
    if count_floor <= 0 or functional.strict:
        return f, 0
    zero = f == 0
    n = int(np.count_nonzero(zero))
    if n:
        level = np.asarray(count_floor / m, dtype=np.float64)
        for h, d, k in zip(widths, dims, kernels):
            level = level * (k.sup_norm / np.asarray(h, dtype=np.float64)) ** d
        f = np.where(zero, np.broadcast_to(level, f.shape), f)
    return f, n


def _warn_clamped(n_clamped, functional):
    if n_clamped:
        warnings.warn(f"{n_clamped} zero density estimate(s) floored; the smallest "
                      "bandwidth leaves some kernel windows empty",
                      RuntimeWarning, stacklevel=3)


def mixed_table(x, labels, kernel: KernelSpec, functional: Functional,
                widths_x, widths_given: Mapping[Hashable, np.ndarray],
                policy: SingletonPolicy = SingletonPolicy.SKIP,
                fast: bool = True, count_floor: float = 1.0) -> MixedTable:
    """Evaluate ``G_{h_X(l), h_{X|y}(l)}`` for every bandwidth index and class.

    ``widths_x`` has one marginal bandwidth per index; ``widths_given[y]``
    the matching class-conditional bandwidths. Empty kernel windows are
    handled by :func:`resolution_floor`.
    """
    groups, skipped = _resolve_singletons(class_indices(labels), policy)
    widths_x = np.atleast_1d(np.asarray(widths_x, dtype=np.float64))
    d = x.shape[1]
    fx = loo_density(x, kernel, widths_x, fast=fast)
    fx, n_clamped = resolution_floor(fx, x.shape[0] - 1, [widths_x], [d], [kernel],
                                     count_floor, functional)
    labs = list(groups)
    values = np.empty((len(widths_x), len(labs)))
    for k, lab in enumerate(labs):
        idx = groups[lab]
        wc = np.asarray(widths_given[lab], dtype=np.float64)
        fc = loo_density(x[idx], kernel, wc, fast=fast)
        fc, c1 = resolution_floor(fc, len(idx) - 1, [wc], [d], [kernel],
                                  count_floor, functional)
        g, nc = functional.evaluate(fx[idx], fc)
        n_clamped += nc + c1
        values[:, k] = g.sum(axis=0) / len(idx)
    counts = np.array([len(groups[lab]) for lab in labs], dtype=np.float64)
    return MixedTable(labs, counts, values, skipped, n_clamped)


def plugin_mi_mixed(data: Dataset, cfg: PluginConfig) -> EstimateReport:
    """Plug-in estimate for continuous X and discrete Y.

    ``sum_y (N_y/N) * mean_{X in class y} g(f_X(X) / f_{X|y}(X))``.
    """
    if data.x_cont is None or data.y_disc is None:
        raise MissingParts("mixed estimate needs x_cont and y_disc")
    if cfg.h_x is None:
        raise ValueError("h_x is required")
    given = {}
    for lab in class_indices(data.y_disc):
        h = cfg.h_x if cfg.h_x_given_y is None else cfg.h_x_given_y.get(lab)
        if h is None:
            raise ValueError(f"no conditional bandwidth for class {lab!r}")
        given[lab] = np.array([h])
    table = mixed_table(data.x_cont, data.y_disc, cfg.kernel_x, cfg.functional,
                        [cfg.h_x], given, cfg.singleton_policy, cfg.fast, cfg.count_floor)
    _warn_clamped(table.n_clamped, cfg.functional)
    return EstimateReport(
        value=float(table.combine()[0]), case=Case.CONT_DISC, n_samples=data.n,
        per_class_values={lab: float(table.values[0, k]) for k, lab in enumerate(table.labels)},
        n_clamped=table.n_clamped, skipped_classes=table.skipped)


def _cell_keys(data):
    xd, yd = data.x_disc, data.y_disc
    if xd is not None and yd is not None:
        return [(a, b) for a, b in zip(xd.tolist(), yd.tolist())]
    return (yd if yd is not None else xd).tolist()


def _group_density(points, kernel, h, groups, n_total, cfg):
    # Leave-one-out density of `points` within each group; 1 when absent.
    out = np.ones(n_total)
    n_floored = 0
    if points is None:
        return out, 0
    for idx in groups.values():
        if len(idx) >= 2:
            f = loo_density(points[idx], kernel, [h], fast=cfg.fast)[:, 0]
            out[idx], c = resolution_floor(f, len(idx) - 1, [h], [points.shape[1]],
                                           [kernel], cfg.count_floor, cfg.functional)
            n_floored += c
    return out, n_floored


def plugin_mi_mixed_general(data: Dataset, cfg: PluginConfig) -> EstimateReport:
    """Plug-in estimate when X and/or Y mix discrete and continuous parts.

    Discrete marginals and the joint discrete cell use empirical frequencies
    ``N_x1/N``, ``N_y1/N`` and ``N_z1/N``; continuous factors are
    leave-one-out KDEs conditioned on the discrete value (on the joint cell
    for the joint density). Cells with a single sample follow the singleton
    policy; the outer average is over the retained cells, weighted by their
    empirical mass.
    """
    if data.x_disc is None and data.y_disc is None:
        raise MissingParts("no discrete component; use plugin_mi_cont")
    if data.x_cont is None and data.y_cont is None:
        raise MissingParts("no continuous component")
    n = data.n
    x2, y2 = data.x_cont, data.y_cont
    if x2 is not None and cfg.h_x is None:
        raise ValueError("h_x is required when x_cont is present")
    if y2 is not None and cfg.h_y is None:
        raise ValueError("h_y is required when y_cont is present")

    all_idx = {None: np.arange(n)}
    x_groups = class_indices(data.x_disc) if data.x_disc is not None else all_idx
    y_groups = class_indices(data.y_disc) if data.y_disc is not None else all_idx
    keys = _cell_keys(data)
    cell_codes = np.empty(n, dtype=np.int64)
    uniq = sorted(set(keys))
    pos = {k: c for c, k in enumerate(uniq)}
    for i, k in enumerate(keys):
        cell_codes[i] = pos[k]
    cells = {uniq[c]: idx for c, idx in class_indices(cell_codes).items()}
    cells, skipped = _resolve_singletons(cells, cfg.singleton_policy, what="cell")

    n_x1 = np.full(n, n, dtype=np.int64)
    for idx in x_groups.values():
        n_x1[idx] = len(idx)
    n_y1 = np.full(n, n, dtype=np.int64)
    for idx in y_groups.values():
        n_y1[idx] = len(idx)

    fx, c1 = _group_density(x2, cfg.kernel_x, cfg.h_x, x_groups, n, cfg)
    fy, c2 = _group_density(y2, cfg.ky, cfg.h_y, y_groups, n, cfg)

    per_cell, counts, n_clamped = {}, [], c1 + c2
    for key, idx in cells.items():
        m = len(idx)
        hx = cfg.h_x
        if cfg.h_x_given_y is not None and key in cfg.h_x_given_y:
            hx = cfg.h_x_given_y[key]
        if x2 is not None and y2 is not None:
            s = loo_sums_joint(x2[idx], y2[idx], cfg.kernel_x, cfg.ky, [hx], [cfg.h_y],
                               fast=cfg.fast)[:, 0, 0]
            fz = s / ((m - 1) * hx ** x2.shape[1] * cfg.h_y ** y2.shape[1])
            blocks = ([hx, cfg.h_y], [x2.shape[1], y2.shape[1]], [cfg.kernel_x, cfg.ky])
        elif x2 is not None:
            fz = loo_density(x2[idx], cfg.kernel_x, [hx], fast=cfg.fast)[:, 0]
            blocks = ([hx], [x2.shape[1]], [cfg.kernel_x])
        else:
            fz = loo_density(y2[idx], cfg.ky, [cfg.h_y], fast=cfg.fast)[:, 0]
            blocks = ([cfg.h_y], [y2.shape[1]], [cfg.ky])
        fz, c = resolution_floor(fz, m - 1, *blocks, cfg.count_floor, cfg.functional)
        n_clamped += c
        # integer products are exact, so the pmf ratio is exactly 1 when it should be
        pmf = (n_x1[idx] * n_y1[idx]) / (n * np.full(m, m, dtype=np.int64))
        # (m, 1) columns keep the reduction order identical to mixed_table
        g, nc = cfg.functional.evaluate((pmf * fx[idx] * fy[idx])[:, None], fz[:, None])
        n_clamped += nc
        per_cell[key] = float(g.sum(axis=0)[0] / m)
        counts.append(m)

    counts = np.asarray(counts, dtype=np.float64)
    mass = counts / counts.sum()
    value = math.fsum(mass[k] * v for k, v in enumerate(per_cell.values()))
    _warn_clamped(n_clamped, cfg.functional)
    return EstimateReport(value=float(value), case=Case.MIXED_GENERAL, n_samples=n,
                          per_class_values=per_cell, n_clamped=n_clamped,
                          skipped_classes=skipped)

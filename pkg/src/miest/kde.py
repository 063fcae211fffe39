"""Leave-one-out kernel density estimates at sample points.

Two evaluation routes share every public function:

* a general route that forms ``K((x_j - x_i) / h)`` explicitly (any kernel),
* a counting route for the uniform kernel: the product window is the
  Chebyshev ball, so the kernel sum is a neighbour count. Thresholds are
  snapped to the last double ``T`` with ``fl(T / h) <= r`` so both routes
  select exactly the same neighbours.

Estimators call the batched ``loo_sums*`` helpers, which evaluate many
bandwidths from a single pass over the pairwise distances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Hashable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .core import (DegenerateDataset, KernelSpec, MissingContinuousY, Profile,
                   SingletonClass, Dataset)

__all__ = [
    "KdeContext", "kde_marginal_x", "kde_marginal_y", "kde_joint",
    "kde_conditional_x_given_y", "class_counts", "class_indices",
    "loo_sums", "loo_sums_joint", "loo_density", "kde_grid",
]

# Max number of float64 entries materialised per block.
_BLOCK_ELEMS = 1 << 22


@dataclass(frozen=True)
class KdeContext:
    data: Dataset
    kernel_x: KernelSpec = KernelSpec()
    kernel_y: Optional[KernelSpec] = None
    h_x: Optional[float] = None
    h_y: Optional[float] = None
    h_x_given_y: Optional[Dict[Hashable, float]] = None

    def __post_init__(self):
        for name in ("h_x", "h_y"):
            h = getattr(self, name)
            if h is not None and not h > 0:
                raise ValueError(f"{name} must be positive")
        if self.h_x_given_y is not None:
            if any(not h > 0 for h in self.h_x_given_y.values()):
                raise ValueError("h_x_given_y values must be positive")
            if self.data.y_disc is not None:
                missing = set(class_counts(self.data)) - set(self.h_x_given_y)
                if missing:
                    raise ValueError(f"h_x_given_y lacks labels {sorted(map(str, missing))}")


def class_counts(data: Dataset) -> Dict[Hashable, int]:
    """Number of samples per discrete label of ``y_disc``."""
    if data.y_disc is None:
        raise ValueError("dataset has no discrete Y")
    labels, counts = np.unique(data.y_disc, return_counts=True)
    return {lab.item() if isinstance(lab, np.generic) else lab: int(c)
            for lab, c in zip(labels, counts)}


def class_indices(labels) -> Dict[Hashable, np.ndarray]:
    """Sorted label -> sample indices (ascending)."""
    labels = np.asarray(labels)
    uniq, inv = np.unique(labels, return_inverse=True)
    order = np.argsort(inv, kind="stable")
    bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
    out = {}
    for k, lab in enumerate(uniq):
        key = lab.item() if isinstance(lab, np.generic) else lab
        out[key] = order[bounds[k]:bounds[k + 1]]
    return out


def _check_n(n):
    if n < 2:
        raise DegenerateDataset(f"leave-one-out KDE needs N >= 2, got {n}")


def _single_sum(points, j, kernel, h):
    # Kernel sum at points[j] over i != j.
    u = (points[j] - points) / h
    k = kernel.product_eval(u)
    k[j] = 0.0
    return float(k.sum())


def kde_marginal_x(ctx: KdeContext, j: int) -> float:
    """``(1/(M h^d)) sum_{i != j} K((X_j - X_i)/h_X)`` with ``M = N - 1``."""
    x = ctx.data.x_cont
    n, d = x.shape
    _check_n(n)
    return _single_sum(x, j, ctx.kernel_x, ctx.h_x) / ((n - 1) * ctx.h_x ** d)


def kde_marginal_y(ctx: KdeContext, j: int) -> float:
    y = ctx.data.y_cont
    if y is None:
        raise MissingContinuousY("dataset has no continuous Y")
    n, d = y.shape
    _check_n(n)
    ky = ctx.kernel_y or ctx.kernel_x
    return _single_sum(y, j, ky, ctx.h_y) / ((n - 1) * ctx.h_y ** d)


def kde_joint(ctx: KdeContext, j: int) -> float:
    """Leave-one-out joint KDE under the product kernel ``K_X * K_Y``."""
    data = ctx.data
    if data.y_cont is None:
        raise MissingContinuousY("dataset has no continuous Y")
    if ctx.h_x is None or ctx.h_y is None:
        raise ValueError("joint KDE needs both h_x and h_y")
    x, y = data.x_cont, data.y_cont
    n = x.shape[0]
    _check_n(n)
    ky = ctx.kernel_y or ctx.kernel_x
    k = (ctx.kernel_x.product_eval((x[j] - x) / ctx.h_x)
         * ky.product_eval((y[j] - y) / ctx.h_y))
    k[j] = 0.0
    norm = (n - 1) * ctx.h_x ** x.shape[1] * ctx.h_y ** y.shape[1]
    return float(k.sum()) / norm


def kde_conditional_x_given_y(ctx: KdeContext, j: int) -> float:
    """Leave-one-out KDE of ``f_{X|y}`` at ``X_j`` using only class ``y = Y_j``."""
    data = ctx.data
    if data.y_disc is None:
        raise ValueError("dataset has no discrete Y")
    label = data.y_disc[j]
    members = np.flatnonzero(data.y_disc == label)
    n_y = len(members)
    if n_y < 2:
        raise SingletonClass(f"class {label!r} has a single sample")
    key = label.item() if isinstance(label, np.generic) else label
    h = ctx.h_x_given_y[key] if ctx.h_x_given_y is not None else ctx.h_x
    pts = data.x_cont[members]
    pos = int(np.searchsorted(members, j))
    return _single_sum(pts, pos, ctx.kernel_x, h) / ((n_y - 1) * h ** pts.shape[1])


# Batched evaluation
# -----------------------------------

def _snap_thresholds(widths, radius):
    """Largest doubles ``T`` with ``fl(T / h) <= radius`` for each ``h``."""
    out = np.empty(len(widths))
    for k, h in enumerate(widths):
        t = radius * h
        while t / h > radius:
            t = np.nextafter(t, -np.inf)
        while np.nextafter(t, np.inf) / h <= radius:
            t = np.nextafter(t, np.inf)
        out[k] = t
    return out


def _row_blocks(n_rows, row_cost):
    step = max(1, _BLOCK_ELEMS // max(1, row_cost))
    for start in range(0, n_rows, step):
        yield start, min(n_rows, start + step)


def _uniform_counts(points, thresholds):
    # counts[j, k] = #{i != j : max_a |x_ja - x_ia| <= thresholds[k]}
    n = points.shape[0]
    order = np.argsort(thresholds, kind="stable")
    t_sorted = thresholds[order]
    nl = len(t_sorted)
    out = np.empty((n, nl), dtype=np.int64)
    for a, b in _row_blocks(n, n):
        dist = cdist(points[a:b], points, metric="chebyshev")
        bins = np.searchsorted(t_sorted, dist, side="left")
        rows = np.arange(b - a)[:, None] * (nl + 1)
        hist = np.bincount((rows + bins).ravel(), minlength=(b - a) * (nl + 1))
        cum = np.cumsum(hist.reshape(b - a, nl + 1), axis=1)[:, :nl]
        out[a:b, order] = cum - 1  # drop the self pair (distance 0)
    return out


def _general_sums(points, kernel, widths):
    n, d = points.shape
    out = np.empty((n, len(widths)))
    diag_block = None
    for a, b in _row_blocks(n, n * d):
        diff = points[a:b, None, :] - points[None, :, :]
        diag_block = (np.arange(b - a), np.arange(a, b))
        for k, h in enumerate(widths):
            kv = kernel.product_eval(diff / h)
            kv[diag_block] = 0.0
            out[a:b, k] = kv.sum(axis=1)
    return out


def loo_sums(points, kernel: KernelSpec, widths: Sequence[float],
             fast: bool = True) -> np.ndarray:
    """Leave-one-out kernel sums at every sample, one column per bandwidth.

    Returns an ``(N, len(widths))`` array of ``sum_{i != j} K((x_j - x_i)/h)``.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    widths = np.atleast_1d(np.asarray(widths, dtype=np.float64))
    _check_n(points.shape[0])
    if fast and kernel.profile is Profile.UNIFORM:
        height = (0.5 / kernel.support_radius) ** points.shape[1]
        counts = _uniform_counts(points, _snap_thresholds(widths, kernel.support_radius))
        return counts * height
    return _general_sums(points, kernel, widths)


def loo_density(points, kernel: KernelSpec, widths, fast: bool = True) -> np.ndarray:
    """Leave-one-out densities ``(N, L)`` for each bandwidth in ``widths``."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    widths = np.atleast_1d(np.asarray(widths, dtype=np.float64))
    n, d = points.shape
    sums = loo_sums(points, kernel, widths, fast=fast)
    return sums / ((n - 1) * widths ** d)


def loo_sums_joint(x, y, kernel_x: KernelSpec, kernel_y: KernelSpec,
                   widths_x, widths_y, fast: bool = True) -> np.ndarray:
    """Leave-one-out product-kernel sums on the bandwidth grid.

    Returns ``(N, Lx, Ly)``: entry ``[j, a, b]`` uses ``(widths_x[a], widths_y[b])``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    wx = np.atleast_1d(np.asarray(widths_x, dtype=np.float64))
    wy = np.atleast_1d(np.asarray(widths_y, dtype=np.float64))
    n = x.shape[0]
    _check_n(n)
    lx, ly = len(wx), len(wy)
    if fast and kernel_x.profile is Profile.UNIFORM and kernel_y.profile is Profile.UNIFORM:
        tx = _snap_thresholds(wx, kernel_x.support_radius)
        ty = _snap_thresholds(wy, kernel_y.support_radius)
        ox, oy = np.argsort(tx, kind="stable"), np.argsort(ty, kind="stable")
        tx, ty = tx[ox], ty[oy]
        height = ((0.5 / kernel_x.support_radius) ** x.shape[1]
                  * (0.5 / kernel_y.support_radius) ** y.shape[1])
        cells = (lx + 1) * (ly + 1)
        out = np.empty((n, lx, ly), dtype=np.int64)
        for a, b in _row_blocks(n, max(2 * n, cells)):
            bx = np.searchsorted(tx, cdist(x[a:b], x, metric="chebyshev"), side="left")
            by = np.searchsorted(ty, cdist(y[a:b], y, metric="chebyshev"), side="left")
            flat = (np.arange(b - a)[:, None] * cells + bx * (ly + 1) + by).ravel()
            hist = np.bincount(flat, minlength=(b - a) * cells).reshape(b - a, lx + 1, ly + 1)
            cum = hist.cumsum(axis=1).cumsum(axis=2)[:, :lx, :ly] - 1
            out[a:b] = cum[:, np.argsort(ox)][:, :, np.argsort(oy)]
        return out * height

    out = np.empty((n, lx, ly))
    for a, b in _row_blocks(n, n * (x.shape[1] + y.shape[1])):
        dx = x[a:b, None, :] - x[None, :, :]
        dy = y[a:b, None, :] - y[None, :, :]
        diag = (np.arange(b - a), np.arange(a, b))
        kx = [kernel_x.product_eval(dx / h) for h in wx]
        ky = [kernel_y.product_eval(dy / h) for h in wy]
        for ia in range(lx):
            for ib in range(ly):
                kv = kx[ia] * ky[ib]
                kv[diag] = 0.0
                out[a:b, ia, ib] = kv.sum(axis=1)
    return out


def kde_grid(points, kernel: KernelSpec, h: float, grid) -> np.ndarray:
    """Ordinary (not leave-one-out) KDE evaluated at arbitrary ``grid`` points."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 1:
        grid = grid[:, None]
    n, d = points.shape
    out = np.empty(grid.shape[0])
    for a, b in _row_blocks(grid.shape[0], n * d):
        u = (grid[a:b, None, :] - points[None, :, :]) / h
        out[a:b] = kernel.product_eval(u).sum(axis=1)
    return out / (n * h ** d)


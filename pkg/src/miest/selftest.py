"""Fast internal consistency checks behind ``miest selftest``."""

from __future__ import annotations

import tempfile
from pathlib import Path
from typing import Callable

import numpy as np

from .core import BandwidthSet, Dataset, KernelSpec, Profile, renyi, shannon
from .ensemble import BasisFamily, EnsembleConfig, Program, solve_weights_exact
from .io import read_dataset, write_binary
from .kde import loo_sums
from .plugin import PluginConfig, plugin_mi_mixed
from .synthetic import TruncGaussMixtureSpec, oracle_mi

__all__ = ["run_selftest"]


def _kde_matches_brute_force():
    rng = np.random.default_rng(0)
    pts = rng.random((25, 2))
    widths = [0.2, 0.5, 0.9]
    for kernel in (KernelSpec(), KernelSpec(Profile.EPANECHNIKOV)):
        got = loo_sums(pts, kernel, widths)
        for k, h in enumerate(widths):
            for j in range(len(pts)):
                ref = sum(kernel.product_eval((pts[i] - pts[j]) / h)
                          for i in range(len(pts)) if i != j)
                if abs(got[j, k] - ref) > 1e-12 * max(1.0, abs(ref)):
                    return False
    return True


def _hand_weights():
    cfg = EnsembleConfig(BandwidthSet([1.0, 2.0]), BasisFamily.mixed_odin1(1),
                         program=Program.EXACT)
    w = solve_weights_exact(cfg, 100).weights
    return np.allclose(w, [2.0, -1.0], rtol=0, atol=1e-12)


def _single_class_identity():
    x = np.random.default_rng(1).random((60, 2))
    data = Dataset(x_cont=x, y_disc=np.zeros(60, dtype=int))
    ok = True
    for f, want in ((shannon(), 0.0), (renyi(0.5), 1.0)):
        rep = plugin_mi_mixed(data, PluginConfig(f, h_x=0.4, h_x_given_y={0: 0.4}))
        ok &= rep.value == want
    return ok


def _oracle_identity():
    spec = TruncGaussMixtureSpec((1.0,), ((0.3, 0.6),))
    return oracle_mi(spec, renyi(0.5), "quadrature", n_nodes=16).value == 1.0


def _binary_roundtrip():
    rng = np.random.default_rng(2)
    data = Dataset(x_cont=rng.random((10, 3)), y_disc=rng.integers(0, 3, 10))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "d.bin"
        write_binary(data, path)
        back = read_dataset(path)
    return (np.array_equal(back.x_cont, data.x_cont)
            and np.array_equal(back.y_disc, data.y_disc))


CHECKS = (
    ("kde matches brute force", _kde_matches_brute_force),
    ("exact weights (2, -1)", _hand_weights),
    ("single-class plug-in identity", _single_class_identity),
    ("single-class oracle identity", _oracle_identity),
    ("binary dataset round trip", _binary_roundtrip),
)


def run_selftest(report: Callable[[str], None] = print) -> bool:
    ok = True
    for name, check in CHECKS:
        passed = bool(check())
        ok &= passed
        report(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok

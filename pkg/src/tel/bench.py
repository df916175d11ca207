"""Timing harness for the pipeline stages.

Per grid size: MST construction, filter forward, filter backward, and
(small grids only) the dense reference.  Timings are best-of-repeats
wall clock.  The optional backend comparison reruns every size on each
available kernel backend.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import backend
from .filter import (dense_distance, dense_filter, transmittances,
                     tree_filter, tree_filter_backward, tree_filter_forward)
from .grid import weighted_grid
from .mst import mst_tree

DENSE_SIDE_LIMIT = 64


@dataclass(frozen=True)
class BenchRow:
    size: int
    ms_mst: float
    ms_fwd: float
    ms_bwd: float
    ms_dense: float | None
    backend: str


def _best_of(repeats, fn):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best * 1000.0


def time_pipeline(size, channels=21, seed=0, repeats=3, threads=1):
    """One BenchRow on a random size x size image, current backend."""
    rng = np.random.default_rng([seed, size])
    img = rng.random((3, size, size))
    values = rng.random((channels, size * size))
    edges = weighted_grid(img)
    ms_mst = _best_of(repeats, lambda: mst_tree(edges))
    tree = mst_tree(edges)
    trans = transmittances(tree, 0.02)
    if threads > 1:
        ms_fwd = _best_of(repeats, lambda: tree_filter(values, tree, trans,
                                                       threads=threads))
    else:
        ms_fwd = _best_of(repeats, lambda: tree_filter_forward(values, tree, trans))
    _, ws = tree_filter_forward(values, tree, trans)
    g = rng.standard_normal(values.shape)
    ms_bwd = _best_of(repeats, lambda: tree_filter_backward(g, ws))
    ms_dense = None
    if size <= DENSE_SIDE_LIMIT:
        ms_dense = _best_of(
            repeats, lambda: dense_filter(values, dense_distance(tree), 0.02))
    return BenchRow(size, ms_mst, ms_fwd, ms_bwd, ms_dense,
                    backend.active_name())


def run_bench(sizes, channels=21, seed=0, repeats=3, threads=1,
              compare_backends=False, report=None):
    """BenchRows for every size (and every backend when comparing)."""
    names = [backend.active_name()]
    if compare_backends:
        names = (["compiled"] if backend.HAVE_COMPILED else []) + ["python"]
    rows = []
    previous = backend.active_name()
    try:
        for name in names:
            backend.set_backend(name)
            for size in sizes:
                row = time_pipeline(size, channels, seed, repeats, threads)
                rows.append(row)
                if report is not None:
                    dense = "NA" if row.ms_dense is None else f"{row.ms_dense:.1f}"
                    report(f"{name:>8} {size:>4}: mst {row.ms_mst:8.1f} ms, "
                           f"fwd {row.ms_fwd:8.1f} ms, bwd {row.ms_bwd:8.1f} ms, "
                           f"dense {dense}")
    finally:
        backend.set_backend(previous)
    return rows


def write_bench_csv(rows, path, with_backend=False):
    """Pinned column layout; the backend column only when asked."""
    with open(path, "w") as fh:
        header = "size,ms_mst,ms_fwd,ms_bwd,ms_dense_or_NA"
        fh.write(header + (",backend\n" if with_backend else "\n"))
        for r in rows:
            dense = "NA" if r.ms_dense is None else f"{r.ms_dense:.3f}"
            line = f"{r.size},{r.ms_mst:.3f},{r.ms_fwd:.3f},{r.ms_bwd:.3f},{dense}"
            fh.write(line + (f",{r.backend}\n" if with_backend else "\n"))


def scaling_exponent(sizes, times_ms):
    """Least-squares slope of log time vs log pixel count."""
    n = np.log(np.asarray(sizes, dtype=float) ** 2)
    t = np.log(np.asarray(times_ms, dtype=float))
    return float(np.polyfit(n, t, 1)[0])

"""Self-contained oracle checks.

Three families: the linear-time filter against its dense quadratic
form, Borůvka against a sorted-edge Kruskal, and analytic gradients
against central finite differences (both the bare filter backward and
the full composite loss).  Each check reruns with fresh seeded
instances and reports its worst relative error; failures name the
trial so they can be replayed.
"""

import time

import numpy as np

from .filter import (Transmittances, dense_distance, dense_filter,
                     transmittances, tree_filter_backward, tree_filter_forward)
from .grid import weighted_grid
from .losses import LossConfig, total_loss
from .mst import boruvka_mst, kruskal_mst, mst_tree
from .tensors import IGNORE, LabelMap

FD_STEP = 1e-4
FD_RTOL = 1e-4
FD_ATOL = 1e-7


def _rel_err(a, b):
    return float(np.max(np.abs(a - b) / (np.abs(b) + 1e-12)))


def _random_grid_tree(rng, max_size, channels=3):
    h = int(rng.integers(2, max_size + 1))
    w = int(rng.integers(2, max_size + 1))
    img = rng.random((channels, h, w))
    return h, w, mst_tree(weighted_grid(img))


def check_filter_vs_dense(trials=100, max_size=64, seed=0, report=None):
    """Fast path vs dense exp(-D/sigma) quadratic form."""
    worst = 0.0
    failures = []
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        h, w, tree = _random_grid_tree(rng, max_size)
        sigma = float(rng.uniform(0.005, 1.0))
        values = rng.random((int(rng.integers(1, 5)), h * w))
        fast = tree_filter_forward(values, tree, transmittances(tree, sigma))[0]
        ref = dense_filter(values, dense_distance(tree), sigma)
        err = _rel_err(fast, ref)
        worst = max(worst, err)
        if err > 1e-5:
            failures.append((trial, err))
    _emit(report, "filter vs dense", not failures,
          f"max rel err {worst:.2e} over {trials} grids up to "
          f"{max_size}x{max_size}", failures)
    return not failures, worst


def check_mst(trials=100, max_size=64, seed=0, report=None):
    """Borůvka totals vs Kruskal, and edge-set equality."""
    worst = 0.0
    failures = []
    for trial in range(trials):
        rng = np.random.default_rng([seed, 1, trial])
        h = int(rng.integers(2, max_size + 1))
        w = int(rng.integers(2, max_size + 1))
        edges = weighted_grid(rng.random((3, h, w)))
        if trial % 2:
            # Heavy duplication: a handful of distinct weight values.
            edges = edges.with_weights(
                rng.choice([0.0, 0.1, 0.2, 0.5], size=edges.num_edges))
        chosen = boruvka_mst(edges.num_nodes, edges)
        ref_total, ref_chosen = kruskal_mst(edges.num_nodes, edges)
        gap = abs(float(edges.weights[chosen].sum()) - ref_total)
        worst = max(worst, gap)
        distinct = np.unique(edges.weights).size == edges.num_edges
        if gap > 1e-9 or (distinct and not np.array_equal(chosen, ref_chosen)):
            failures.append((trial, gap))
    _emit(report, "boruvka vs kruskal", not failures,
          f"max total-weight gap {worst:.2e} over {trials} grids "
          "(half with duplicated weights)", failures)
    return not failures, worst


def check_filter_gradients(trials=100, seed=0, report=None):
    """Filter backward vs central differences, every coordinate."""
    worst = 0.0
    failures = []
    for trial in range(trials):
        rng = np.random.default_rng([seed, 2, trial])
        tree = mst_tree(weighted_grid(rng.random((3, 5, 5))))
        trans = transmittances(tree, float(rng.uniform(0.05, 1.0)))
        values = rng.random((3, 25))
        g = rng.standard_normal((3, 25))
        out, ws = tree_filter_forward(values, tree, trans)
        grad_v, grad_t = tree_filter_backward(g, ws)

        def objective(v, t):
            return float(
                (tree_filter_forward(v, tree, Transmittances(t, trans.sigma))[0]
                 * g).sum())

        err = 0.0
        for c in range(3):
            for i in range(25):
                vp = values.copy(); vp[c, i] += FD_STEP
                vm = values.copy(); vm[c, i] -= FD_STEP
                fd = (objective(vp, trans.per_node)
                      - objective(vm, trans.per_node)) / (2 * FD_STEP)
                err = max(err, _fd_gap(fd, grad_v[c, i]))
        for v in range(25):
            if v == tree.root:
                continue
            tp = trans.per_node.copy(); tp[v] += FD_STEP
            tm = trans.per_node.copy(); tm[v] -= FD_STEP
            fd = (objective(values, tp) - objective(values, tm)) / (2 * FD_STEP)
            err = max(err, _fd_gap(fd, grad_t[v]))
        worst = max(worst, err)
        if err > FD_RTOL:
            failures.append((trial, err))
    _emit(report, "filter gradients vs finite differences", not failures,
          f"max rel err {worst:.2e} over {trials} 5x5 instances", failures)
    return not failures, worst


def check_composite_gradients(trials=100, seed=0, report=None):
    """Total-loss gradients (through the cascade) vs central differences.

    The default assignment is the absolute difference, which has a kink
    at P = pseudo; instances whose smallest margin on unlabeled pixels
    is within 20 FD steps of the kink are redrawn deterministically.
    """
    worst = 0.0
    failures = []
    for trial in range(trials):
        for attempt in range(50):
            rng = np.random.default_rng([seed, 3, trial, attempt])
            inst = _composite_instance(rng)
            if inst is not None:
                break
        else:
            failures.append((trial, float("nan")))
            continue
        probs, labels, low_tree, low_trans, high_tree, high_trans, cfg = inst
        res = total_loss(probs, labels, low_tree, low_trans, high_tree,
                         high_trans, cfg)

        def value(p, tl, th):
            return total_loss(
                p, labels, low_tree, Transmittances(tl, low_trans.sigma),
                high_tree, Transmittances(th, high_trans.sigma), cfg).total

        err = 0.0
        tl, th = low_trans.per_node, high_trans.per_node
        for c in range(probs.shape[0]):
            for i in range(25):
                pp = probs.copy(); pp[c, i // 5, i % 5] += FD_STEP
                pm = probs.copy(); pm[c, i // 5, i % 5] -= FD_STEP
                fd = (value(pp, tl, th) - value(pm, tl, th)) / (2 * FD_STEP)
                err = max(err, _fd_gap(fd, res.grad_probs[c, i // 5, i % 5]))
        for vec, grad in ((tl, res.grad_t_low), (th, res.grad_t_high)):
            tree = low_tree if vec is tl else high_tree
            for v in range(25):
                if v == tree.root:
                    continue
                vp = vec.copy(); vp[v] += FD_STEP
                vm = vec.copy(); vm[v] -= FD_STEP
                if vec is tl:
                    fd = (value(probs, vp, th) - value(probs, vm, th)) / (2 * FD_STEP)
                else:
                    fd = (value(probs, tl, vp) - value(probs, tl, vm)) / (2 * FD_STEP)
                err = max(err, _fd_gap(fd, grad[v]))
        worst = max(worst, err)
        if err > FD_RTOL:
            failures.append((trial, err))
    _emit(report, "composite loss gradients vs finite differences",
          not failures,
          f"max rel err {worst:.2e} over {trials} 5x5 3-class instances",
          failures)
    return not failures, worst


def _composite_instance(rng):
    """One 5x5 3-class total-loss instance, or None if kink-marginal.

    Probabilities are kept away from 0 (blend toward uniform) so the
    curvature of -log(p) stays far below the FD tolerance at h=1e-4.
    """
    probs = rng.dirichlet(np.ones(3), size=25).T.reshape(3, 5, 5)
    probs = (probs + 0.2) / 1.6
    lab = np.where(rng.random((5, 5)) < 0.3,
                   rng.integers(0, 3, (5, 5)), IGNORE).astype(np.uint8)
    if (lab == IGNORE).all() or (lab != IGNORE).all():
        return None
    labels = LabelMap.from_array(lab, 3)
    low_tree = mst_tree(weighted_grid(rng.random((3, 5, 5))))
    high_tree = mst_tree(weighted_grid(rng.random((4, 5, 5))))
    low_trans = transmittances(low_tree, 0.2)
    high_trans = transmittances(high_tree, 1.0)
    cfg = LossConfig()
    res = total_loss(probs, labels, low_tree, low_trans, high_tree, high_trans,
                     cfg)
    unlabeled = lab == IGNORE
    margin = min(np.abs(probs - p)[:, unlabeled].min() for _, p in res.pseudo)
    if margin < 20 * FD_STEP:
        return None
    return probs, labels, low_tree, low_trans, high_tree, high_trans, cfg


def _fd_gap(fd, analytic):
    return abs(fd - analytic) / max(abs(fd), abs(analytic), FD_ATOL / FD_RTOL)


def _emit(report, name, ok, detail, failures):
    if report is None:
        return
    status = "PASS" if ok else "FAIL"
    report(f"[{status}] {name}: {detail}")
    for trial, err in failures[:5]:
        report(f"       trial {trial} err {err:.3e}")


def run_verification(max_size=64, trials=100, seed=0, report=print):
    """All checks; True iff everything passed."""
    started = time.perf_counter()
    results = [
        check_filter_vs_dense(trials, max_size, seed, report)[0],
        check_mst(trials, max_size, seed, report)[0],
        check_filter_gradients(trials, seed, report)[0],
        check_composite_gradients(trials, seed, report)[0],
    ]
    ok = all(results)
    if report is not None:
        report(f"{'all checks passed' if ok else 'CHECKS FAILED'} "
               f"({time.perf_counter() - started:.1f} s, seed {seed})")
    return ok

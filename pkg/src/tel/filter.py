"""Tree-structured affinity filtering.

The affinity between two pixels is exp(-D/sigma) where D sums the edge
weights on their tree path.  Filtering every channel against every
pixel is quadratic done naively; the production path is the standard
two-sweep dynamic program (leafward aggregation, then rootward
redistribution), linear in the pixel count.  dense_distance and
dense_filter materialise the quadratic form for small grids and serve
as the reference the fast path is checked against.

The backward pass reuses the same sweeps: with u = g/z and m = g*out/z
the gradient w.r.t. the input is the unnormalised aggregate of u, and
the gradient w.r.t. a transmittance splits into subtree/complement
aggregates of u, m, the input, and the all-ones field.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ArgumentError, CapacityError, ContractError, ValidationError

DENSE_NODE_LIMIT = 4096
_T_FLOOR = 1e-300


@dataclass(frozen=True)
class Transmittances:
    """Per-node edge attenuation exp(-w/sigma) toward the parent.

    Entries lie in (0, 1]; the root entry is fixed at 1 and never used.
    """

    per_node: np.ndarray
    sigma: float


@dataclass(frozen=True)
class FilterWorkspace:
    """Saved sweeps of one forward call, consumed by the backward pass."""

    tree: object
    trans: Transmittances
    shape: tuple
    up: np.ndarray = field(repr=False)
    full: np.ndarray = field(repr=False)
    out: np.ndarray = field(repr=False)


def transmittances(tree, sigma):
    """Attenuation per parent edge of a rooted tree."""
    if sigma <= 0:
        raise ArgumentError(f"sigma must be positive, got {sigma}")
    t = np.exp(-tree.parent_edge_weight / sigma)
    t = np.maximum(t, _T_FLOOR)
    t[tree.root] = 1.0
    return Transmittances(t, float(sigma))


def _flatten(values, num_nodes):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim < 2:
        raise ValidationError(f"expected (channels, ...) values, got {values.shape}")
    flat = values.reshape(values.shape[0], -1)
    if flat.shape[1] != num_nodes:
        raise ValidationError(
            f"values cover {flat.shape[1]} pixels, tree has {num_nodes}")
    if not np.isfinite(flat).all():
        raise ValidationError("values contain non-finite entries")
    return flat


def tree_filter_forward(values, tree, trans):
    """Normalised affinity filtering of (channels, ...) values.

    Returns (filtered, workspace); filtered has the input shape and the
    workspace feeds tree_filter_backward.
    """
    if trans.per_node.shape[0] != tree.num_nodes:
        raise ContractError("transmittances do not match the tree")
    flat = _flatten(values, tree.num_nodes)
    nc = flat.shape[0]
    x = np.empty((tree.num_nodes, nc + 1), dtype=np.float64)
    x[:, :nc] = flat.T
    x[:, nc] = 1.0
    up, full = backend.active().tree_pass(
        tree.parent, tree.order, trans.per_node, x, tree.level_starts)
    out = full[:, :nc] / full[:, nc:]
    filtered = out.T.reshape(np.asarray(values).shape)
    return filtered, FilterWorkspace(tree, trans, np.asarray(values).shape, up, full, out)


def tree_filter(values, tree, trans, threads=1):
    """Filtered values only; channels run in parallel when threads > 1.

    The output is identical for any thread count: the normaliser is
    computed once and each channel chunk runs the same sweeps.
    """
    if threads <= 1:
        return tree_filter_forward(values, tree, trans)[0]
    if trans.per_node.shape[0] != tree.num_nodes:
        raise ContractError("transmittances do not match the tree")
    flat = _flatten(values, tree.num_nodes)
    nc = flat.shape[0]
    kern = backend.active()

    def run(cols):
        return kern.tree_pass(tree.parent, tree.order, trans.per_node,
                              np.ascontiguousarray(cols), tree.level_starts)[1]

    z = run(np.ones((tree.num_nodes, 1)))
    chunks = np.array_split(np.arange(nc), min(threads, nc))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda ix: run(flat[ix].T), chunks))
    out = np.concatenate(parts, axis=1) / z
    return out.T.reshape(np.asarray(values).shape)


def tree_filter_backward(grad_out, workspace, tree=None, trans=None):
    """Gradients of a scalar loss w.r.t. the forward inputs.

    Returns (grad_values, grad_t) where grad_t is per node (zero at the
    root).  tree/trans, when given, must be the objects the workspace
    was built with.
    """
    if tree is not None and tree is not workspace.tree:
        raise ContractError("workspace was built for a different tree")
    if trans is not None and trans is not workspace.trans:
        raise ContractError("workspace was built for different transmittances")
    tree = workspace.tree
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != workspace.shape:
        raise ContractError(
            f"grad shape {g.shape} does not match forward shape {workspace.shape}")
    nc = workspace.out.shape[1]
    n = tree.num_nodes
    gf = g.reshape(nc, n).T
    z = workspace.full[:, nc:]
    u = gf / z
    m = gf * workspace.out / z
    stacked = np.empty((n, 2 * nc), dtype=np.float64)
    stacked[:, :nc] = u
    stacked[:, nc:] = m
    up, full = backend.active().tree_pass(
        tree.parent, tree.order, workspace.trans.per_node, stacked,
        tree.level_starts)
    grad_values = full[:, :nc].T.reshape(workspace.shape)

    nodes = tree.order[1:]
    par = tree.parent[nodes]
    tv = workspace.trans.per_node[nodes][:, None]
    up_g, full_g = up[:, :nc], full[:, :nc]
    up_m, full_m = up[:, nc:], full[:, nc:]
    up_p, full_p = workspace.up[:, :nc], workspace.full[:, :nc]
    up_1, full_1 = workspace.up[:, nc:], workspace.full[:, nc:]
    out_g = full_g[par] - tv * up_g[nodes]
    out_p = full_p[par] - tv * up_p[nodes]
    out_m = full_m[par] - tv * up_m[nodes]
    out_1 = full_1[par] - tv * up_1[nodes]
    per_node = (out_g * up_p[nodes] + up_g[nodes] * out_p
                - out_m * up_1[nodes] - up_m[nodes] * out_1)
    grad_t = np.zeros(n, dtype=np.float64)
    grad_t[nodes] = per_node.sum(axis=1)
    return grad_values, grad_t


def dense_distance(tree):
    """Full pairwise tree-path distance matrix (reference path).

    Quadratic in memory, refused above DENSE_NODE_LIMIT nodes.  Built
    incrementally in traversal order: a new node sits one parent edge
    beyond every node added before it.
    """
    n = tree.num_nodes
    if n > DENSE_NODE_LIMIT:
        raise CapacityError(
            f"dense distances need {n}x{n} entries; limit is "
            f"{DENSE_NODE_LIMIT} nodes")
    pos = np.empty(n, dtype=np.int64)
    pos[tree.order] = np.arange(n)
    d = np.zeros((n, n), dtype=np.float64)
    for k in range(1, n):
        i = tree.order[k]
        row = d[pos[tree.parent[i]], :k] + tree.parent_edge_weight[i]
        d[k, :k] = row
        d[:k, k] = row
    out = np.empty_like(d)
    out[np.ix_(tree.order, tree.order)] = d
    return out


def dense_filter(values, dist, sigma):
    """Quadratic-form reference for tree_filter_forward."""
    if sigma <= 0:
        raise ArgumentError(f"sigma must be positive, got {sigma}")
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ValidationError(f"distance matrix must be square, got {dist.shape}")
    flat = _flatten(values, dist.shape[0])
    affinity = np.exp(-dist / sigma)
    out = (affinity @ flat.T) / (affinity @ np.ones(dist.shape[0]))[:, None]
    return out.T.reshape(np.asarray(values).shape)

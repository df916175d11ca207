"""Minimum spanning tree construction and rooting.

boruvka_mst is the production path (compiled when available).  Ties are
broken by edge-list index, so the chosen set is the unique MST of the
total order (weight, index); kruskal_mst exists as an independent
check and uses the same order.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import backend
from .errors import ArgumentError, StructuralError


@dataclass(frozen=True)
class RootedTree:
    """A spanning tree with parent pointers and a breadth-first order.

    parent[root] is -1 and parent_edge_weight[root] is 0.  order starts
    at the root and lists every node before its children; level_starts
    delimits the breadth-first levels inside order.
    """

    num_nodes: int
    root: int
    parent: np.ndarray
    parent_edge_weight: np.ndarray
    order: np.ndarray
    level_starts: np.ndarray = field(repr=False)

    @cached_property
    def children(self):
        """List of child-index arrays, ascending, one per node."""
        nodes = np.arange(self.num_nodes, dtype=np.int64)
        mask = nodes != self.root
        by_parent = np.argsort(self.parent[mask], kind="stable")
        kids = nodes[mask][by_parent]
        counts = np.bincount(self.parent[mask], minlength=self.num_nodes)
        splits = np.cumsum(counts)[:-1]
        return [np.sort(a) for a in np.split(kids, splits)]


def boruvka_mst(num_nodes, edges):
    """Chosen MST edge indices (ascending) for a weighted edge list."""
    if edges.weights is None:
        raise ArgumentError("edge list has no weights; attach them first")
    chosen = backend.active().boruvka(
        num_nodes,
        np.ascontiguousarray(edges.u, dtype=np.int64),
        np.ascontiguousarray(edges.v, dtype=np.int64),
        np.ascontiguousarray(edges.weights, dtype=np.float64),
    )
    if chosen.shape[0] != num_nodes - 1:
        raise StructuralError(
            f"graph is disconnected: spanning forest has {chosen.shape[0]} "
            f"edges for {num_nodes} nodes")
    return chosen


def kruskal_mst(num_nodes, edges):
    """Sorted-edge reference MST; returns (total weight, chosen indices)."""
    if edges.weights is None:
        raise ArgumentError("edge list has no weights; attach them first")
    w = edges.weights
    order = np.lexsort((np.arange(w.shape[0]), w))
    label = list(range(num_nodes))

    def find(x):
        while label[x] != x:
            label[x] = label[label[x]]
            x = label[x]
        return x

    chosen = []
    total = 0.0
    for e in order:
        ru, rv = find(int(edges.u[e])), find(int(edges.v[e]))
        if ru != rv:
            label[max(ru, rv)] = min(ru, rv)
            chosen.append(int(e))
            total += float(w[e])
            if len(chosen) == num_nodes - 1:
                break
    if len(chosen) != num_nodes - 1:
        raise StructuralError(
            f"graph is disconnected: spanning forest has {len(chosen)} "
            f"edges for {num_nodes} nodes")
    return total, np.sort(np.asarray(chosen, dtype=np.int64))


def root_tree(num_nodes, u, v, w, root=0):
    """Root an explicit tree edge set via breadth-first traversal.

    Children are visited in ascending node order, so the traversal is
    deterministic.  Raises StructuralError unless the edges form a
    spanning tree of the num_nodes nodes.
    """
    u = np.ascontiguousarray(u, dtype=np.int64)
    v = np.ascontiguousarray(v, dtype=np.int64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if not 0 <= root < num_nodes:
        raise ArgumentError(f"root {root} outside [0, {num_nodes})")
    if u.shape[0] != num_nodes - 1:
        raise StructuralError(
            f"{u.shape[0]} edges cannot span {num_nodes} nodes")
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    ww = np.concatenate([w, w])
    perm = np.lexsort((dst, src))
    counts = np.bincount(src, minlength=num_nodes)
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    parent, pw, order, level_starts, visited = backend.active().bfs_tree(
        indptr, dst[perm], ww[perm], root)
    if visited != num_nodes:
        raise StructuralError(
            f"edge set is not a spanning tree: reached {visited} of "
            f"{num_nodes} nodes from the root")
    return RootedTree(num_nodes, root, parent, pw, order, level_starts)


def mst_tree(edges, root=0):
    """MST of a weighted edge list, rooted; the main entry point."""
    chosen = boruvka_mst(edges.num_nodes, edges)
    return root_tree(edges.num_nodes, edges.u[chosen], edges.v[chosen],
                     edges.weights[chosen], root)

"""Pure numpy kernels.

Fallback implementations of the three hot loops (minimum spanning tree,
tree rooting, two-pass filtering).  Same signatures and dtypes as the
compiled module ``tel._kernels``; everything is vectorised per BFS level
or per round, so the worst python-level loop count is the tree depth.
"""

import numpy as np

COMPILED = False


def tree_pass(parent, order, t, values, level_starts):
    """Run the two aggregation sweeps over a rooted tree.

    values has shape (n, channels).  Returns (up, full) where up[i] is
    the aggregate of the subtree below i and full[i] the aggregate of
    the whole tree as seen from i, both weighted by products of the
    per-node transmittances t.
    """
    up = values.astype(np.float64, copy=True)
    n_levels = level_starts.shape[0] - 1
    tc = t[:, None]
    for li in range(n_levels - 1, 0, -1):
        nodes = order[level_starts[li]:level_starts[li + 1]]
        np.add.at(up, parent[nodes], tc[nodes] * up[nodes])
    full = up.copy()
    for li in range(1, n_levels):
        nodes = order[level_starts[li]:level_starts[li + 1]]
        tn = tc[nodes]
        full[nodes] = up[nodes] + tn * (full[parent[nodes]] - tn * up[nodes])
    return up, full


def boruvka(num_nodes, eu, ev, w):
    """Minimum spanning forest by rounds of cheapest outgoing edges.

    Ties are broken toward the smaller edge index, which makes the
    selected set unique.  Returns chosen edge indices in ascending
    order; fewer than num_nodes - 1 entries means the graph is
    disconnected.
    """
    m = eu.shape[0]
    comp = np.arange(num_nodes, dtype=np.int64)
    label = np.arange(num_nodes, dtype=np.int64)
    alive = np.ones(m, dtype=bool)
    edge_ids = np.arange(m, dtype=np.int64)
    chosen = []
    while True:
        cu = comp[eu]
        cv = comp[ev]
        alive &= cu != cv
        cand = edge_ids[alive]
        if cand.size == 0:
            break
        # One interleaved descending pass so the final write per
        # component is its (weight, index) minimum over both endpoints.
        both = np.concatenate([cand, cand])
        sides = np.concatenate([cu[cand], cv[cand]])
        desc = np.lexsort((both, w[both]))[::-1]
        best = np.full(num_nodes, -1, dtype=np.int64)
        best[sides[desc]] = both[desc]
        sel = np.unique(best[best >= 0])
        merged = False
        for e in sel:
            ru = _find(label, comp[eu[e]])
            rv = _find(label, comp[ev[e]])
            if ru != rv:
                label[max(ru, rv)] = min(ru, rv)
                chosen.append(e)
                merged = True
        if not merged:
            break
        while True:
            nxt = label[label]
            if np.array_equal(nxt, label):
                break
            label = nxt
        comp = label[comp]
    return np.sort(np.asarray(chosen, dtype=np.int64))


def _find(label, x):
    while label[x] != x:
        label[x] = label[label[x]]
        x = label[x]
    return x


def bfs_tree(indptr, indices, ew, root):
    """Breadth-first rooting over a CSR adjacency (neighbours pre-sorted).

    Returns (parent, parent_weight, order, level_starts, visited) with
    parent[root] = -1.  visited < n means the edge set is disconnected.
    """
    n = indptr.shape[0] - 1
    parent = np.full(n, -1, dtype=np.int64)
    pw = np.zeros(n, dtype=np.float64)
    order = np.empty(n, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    order[0] = root
    seen[root] = True
    count = 1
    frontier = np.array([root], dtype=np.int64)
    starts_list = [0, 1]
    while True:
        s = indptr[frontier]
        lengths = indptr[frontier + 1] - s
        total = int(lengths.sum())
        if total == 0:
            break
        # Ragged gather: consecutive positions of every frontier slice.
        offs = np.repeat(s - np.concatenate(([0], np.cumsum(lengths)[:-1])), lengths)
        pos = offs + np.arange(total)
        nbr = indices[pos]
        src = np.repeat(frontier, lengths)
        fresh = ~seen[nbr]
        nbr, src, wts = nbr[fresh], src[fresh], ew[pos[fresh]]
        # On a cyclic edge set one node can surface twice in a level;
        # keep the first discovery so the queue semantics hold.
        first = np.sort(np.unique(nbr, return_index=True)[1])
        nbr, src, wts = nbr[first], src[first], wts[first]
        parent[nbr] = src
        pw[nbr] = wts
        seen[nbr] = True
        if nbr.size == 0:
            break
        order[count:count + nbr.size] = nbr
        count += nbr.size
        starts_list.append(count)
        frontier = nbr
    level_starts = np.asarray(starts_list, dtype=np.int64)
    return parent, pw, order[:count], level_starts, count

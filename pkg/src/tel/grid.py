"""4-connected pixel grid as an edge list.

Pixels are numbered row major (index = row * width + col).  Edges are
enumerated horizontals first, then verticals, each in row-major order
of their first endpoint; this order is what tie-breaking by edge index
refers to everywhere else.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ArgumentError, ValidationError
from .tensors import DenseTensor


@dataclass(frozen=True)
class EdgeList:
    """Undirected grid edges with u < v; weights attach later."""

    height: int
    width: int
    u: np.ndarray
    v: np.ndarray
    weights: np.ndarray | None = None

    @property
    def num_nodes(self):
        return self.height * self.width

    @property
    def num_edges(self):
        return self.u.shape[0]

    def with_weights(self, weights):
        if weights.shape != self.u.shape:
            raise ValidationError(
                f"{weights.shape[0]} weights for {self.num_edges} edges")
        return replace(self, weights=np.ascontiguousarray(weights, dtype=np.float64))


def build_edges(height, width):
    """Enumerate the 4-neighbour edges of a height x width grid."""
    if height < 1 or width < 1:
        raise ArgumentError(f"grid dims must be positive, got ({height}, {width})")
    idx = np.arange(height * width, dtype=np.int64).reshape(height, width)
    hu = idx[:, :-1].ravel()
    hv = idx[:, 1:].ravel()
    vu = idx[:-1, :].ravel()
    vv = idx[1:, :].ravel()
    u = np.concatenate([hu, vu])
    v = np.concatenate([hv, vv])
    return EdgeList(height, width, u, v)


def edge_weights(features, edges):
    """Squared euclidean feature distance per edge.

    features is a DenseTensor or a (channels, height, width) array.
    """
    if isinstance(features, DenseTensor):
        features = features.data
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3 or features.shape[1:] != (edges.height, edges.width):
        raise ValidationError(
            f"features shape {features.shape} does not match "
            f"({edges.height}, {edges.width}) grid")
    flat = features.reshape(features.shape[0], -1)
    diff = flat[:, edges.u] - flat[:, edges.v]
    return np.einsum("ce,ce->e", diff, diff)


def weighted_grid(features):
    """Build the grid for a (C, H, W) feature field with weights attached."""
    if isinstance(features, DenseTensor):
        features = features.data
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ValidationError(f"expected (C, H, W) features, got {features.shape}")
    edges = build_edges(features.shape[1], features.shape[2])
    return edges.with_weights(edge_weights(features, edges))

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from tel import (
    ArgumentError,
    DenseTensor,
    ValidationError,
    build_edges,
    edge_weights,
    weighted_grid,
)


class TestBuildEdges:
    def test_two_by_two_order(self):
        """Horizontal edges in row-major order, then vertical edges."""

        e = build_edges(2, 2)
        assert_array_equal(e.u, [0, 2, 0, 1])
        assert_array_equal(e.v, [1, 3, 2, 3])

    def test_counts(self):
        e = build_edges(5, 7)
        assert e.num_nodes == 35
        assert e.num_edges == 5 * 6 + 4 * 7

    def test_three_by_three_horizontals_first(self):
        e = build_edges(3, 3)
        assert_array_equal(e.u[:6], [0, 1, 3, 4, 6, 7])
        assert_array_equal(e.v[:6], [1, 2, 4, 5, 7, 8])
        assert_array_equal(e.u[6:], [0, 1, 2, 3, 4, 5])
        assert_array_equal(e.v[6:], [3, 4, 5, 6, 7, 8])

    def test_single_pixel_has_no_edges(self):
        e = build_edges(1, 1)
        assert e.num_edges == 0

    def test_degenerate_dims_rejected(self):
        with pytest.raises(ArgumentError):
            build_edges(0, 4)


class TestEdgeWeights:
    def test_squared_difference_across_channels(self):
        data = np.zeros((2, 1, 2))
        data[:, 0, 0] = [1.0, 2.0]
        data[:, 0, 1] = [4.0, 0.5]
        feats = DenseTensor(2, 1, 2, data)
        w = edge_weights(feats, build_edges(1, 2))
        assert_allclose(w, [3.0**2 + 1.5**2])

    def test_constant_image_gives_zero_weights(self):
        feats = DenseTensor(3, 4, 4, np.full((3, 4, 4), 0.7))
        e = weighted_grid(feats)
        assert_allclose(e.weights, 0.0)

    def test_weights_nonnegative(self, rng):
        feats = DenseTensor(3, 6, 5, rng.standard_normal((3, 6, 5)))
        e = weighted_grid(feats)
        assert e.weights.shape == (e.num_edges,)
        assert np.all(e.weights >= 0.0)

    def test_grid_shape_must_match_features(self):
        feats = DenseTensor(1, 2, 2, np.zeros((1, 2, 2)))
        with pytest.raises(ValidationError):
            edge_weights(feats, build_edges(3, 3))

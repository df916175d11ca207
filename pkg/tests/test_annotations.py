import numpy as np
import pytest
from numpy.testing import assert_array_equal
from scipy import ndimage

from tel import (
    IGNORE,
    ArgumentError,
    LabelMap,
    SparsityConfig,
    boundary_distance,
    sample_point_annotation,
    sample_scribble_annotation,
    synth_block_annotation,
    synthesize,
)


from oracles import peel_distance, random_label_map


class TestBoundaryDistance:
    def test_matches_peeling_oracle(self, rng):
        for trial in range(5):
            full = random_label_map(rng, 18, 22)
            assert_array_equal(boundary_distance(full),
                               peel_distance(full.labels))

    def test_single_class_map_distance_is_border_depth(self):
        full = LabelMap(100, 100, 1, np.zeros((100, 100), dtype=np.uint8))
        r = np.arange(100)
        edge = np.minimum(r, 99 - r)
        expected = np.minimum(edge[:, None], edge[None, :]) + 1
        assert_array_equal(boundary_distance(full), expected)

    def test_ignore_pixels_are_zero(self):
        labels = np.array([[0, IGNORE], [0, 0]], dtype=np.uint8)
        dist = boundary_distance(LabelMap(2, 2, 1, labels))
        assert dist[0, 1] == 0
        assert np.all(dist[labels != IGNORE] >= 1)


class TestBlockAnnotation:
    def test_four_by_four_half(self):
        """Two vertical stripes, every distance 1: removal follows index order."""
        labels = np.tile(np.array([0, 0, 1, 1], dtype=np.uint8), (4, 1))
        full = LabelMap(4, 4, 2, labels)
        sparse = synth_block_annotation(full, 0.5)
        assert_array_equal(sparse.labels[:2], IGNORE)
        assert_array_equal(sparse.labels[2:], labels[2:])

    def test_keep_count_is_rounded_fraction(self, rng):
        full = random_label_map(rng, 30, 40)
        labeled = int((full.labels != IGNORE).sum())
        for ratio in (0.1, 0.2, 0.5, 0.73):
            sparse = synth_block_annotation(full, ratio)
            kept = int((sparse.labels != IGNORE).sum())
            assert kept == round(ratio * labeled)
            assert abs(kept / labeled - ratio) <= 0.01

    def test_kept_sets_are_nested(self, rng):
        full = random_label_map(rng, 25, 25)
        masks = [synth_block_annotation(full, r).labels != IGNORE
                 for r in (0.1, 0.2, 0.5)]
        assert np.all(~masks[0] | masks[1])
        assert np.all(~masks[1] | masks[2])

    def test_kept_pixels_are_deepest(self, rng):
        """Against the peeling oracle: every removed (depth, index) pair
        precedes every kept one."""
        full = random_label_map(rng, 20, 24)
        depth = peel_distance(full.labels).ravel()
        sparse = synth_block_annotation(full, 0.3)
        was = full.labels.ravel() != IGNORE
        now = sparse.labels.ravel() != IGNORE
        removed = np.nonzero(was & ~now)[0]
        kept = np.nonzero(now)[0]
        cut = max(zip(depth[removed], removed))
        assert min(zip(depth[kept], kept)) > cut

    def test_kept_labels_unchanged(self, rng):
        full = random_label_map(rng, 15, 15)
        sparse = synth_block_annotation(full, 0.4)
        mask = sparse.labels != IGNORE
        assert_array_equal(sparse.labels[mask], full.labels[mask])

    def test_full_ratio_is_identity(self, rng):
        full = random_label_map(rng, 12, 12)
        assert_array_equal(synth_block_annotation(full, 1.0).labels, full.labels)

    def test_deterministic(self, rng):
        full = random_label_map(rng, 16, 16)
        a = synth_block_annotation(full, 0.25, seed=0)
        b = synth_block_annotation(full, 0.25, seed=99)
        assert_array_equal(a.labels, b.labels)

    def test_bad_ratio_rejected(self, rng):
        full = random_label_map(rng, 8, 8)
        for ratio in (0.0, -0.2, 1.5):
            with pytest.raises(ArgumentError):
                synth_block_annotation(full, ratio)


class TestPointAnnotation:
    def test_per_region_counts(self, rng):
        full = random_label_map(rng, 20, 20, ignore_frac=0.0)
        sparse = sample_point_annotation(full, 3, seed=1)
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
        for cls in np.unique(full.labels):
            lab, count = ndimage.label(full.labels == cls, structure=structure)
            for region in range(1, count + 1):
                inside = lab == region
                kept = int((sparse.labels[inside] == cls).sum())
                assert 1 <= kept <= 3
                assert kept == min(3, int(inside.sum()))

    def test_kept_pixels_match_source_class(self, rng):
        full = random_label_map(rng, 14, 14)
        sparse = sample_point_annotation(full, 2, seed=5)
        mask = sparse.labels != IGNORE
        assert mask.any()
        assert_array_equal(sparse.labels[mask], full.labels[mask])

    def test_same_seed_same_output(self, rng):
        full = random_label_map(rng, 14, 14)
        a = sample_point_annotation(full, 2, seed=3)
        b = sample_point_annotation(full, 2, seed=3)
        assert_array_equal(a.labels, b.labels)

    def test_different_seed_differs(self, rng):
        full = random_label_map(rng, 20, 20, ignore_frac=0.0)
        a = sample_point_annotation(full, 1, seed=0)
        b = sample_point_annotation(full, 1, seed=1)
        assert np.any(a.labels != b.labels)


class TestScribbleAnnotation:
    def test_walks_stay_inside_their_class(self, rng):
        full = random_label_map(rng, 18, 18)
        sparse = sample_scribble_annotation(full, 12, seed=2)
        mask = sparse.labels != IGNORE
        assert mask.any()
        assert_array_equal(sparse.labels[mask], full.labels[mask])

    def test_walks_are_connected_paths(self, rng):
        full = random_label_map(rng, 18, 18, ignore_frac=0.0)
        sparse = sample_scribble_annotation(full, 10, seed=4)
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
        for cls in np.unique(full.labels):
            regions, count = ndimage.label(full.labels == cls, structure=structure)
            for region in range(1, count + 1):
                scribble = (regions == region) & (sparse.labels == cls)
                if not scribble.any():
                    continue
                _, pieces = ndimage.label(scribble, structure=structure)
                assert pieces == 1
                assert 1 <= int(scribble.sum()) <= 10

    def test_same_seed_same_output(self, rng):
        full = random_label_map(rng, 15, 15)
        a = sample_scribble_annotation(full, 8, seed=6)
        b = sample_scribble_annotation(full, 8, seed=6)
        assert_array_equal(a.labels, b.labels)


class TestSynthesizeDispatch:
    def test_modes_route_to_the_matching_sampler(self, rng):
        full = random_label_map(rng, 12, 12)
        block = synthesize(full, SparsityConfig(mode="block", ratio=0.3))
        assert_array_equal(block.labels, synth_block_annotation(full, 0.3).labels)
        point = synthesize(full, SparsityConfig(mode="point",
                                                points_per_region=2, seed=9))
        assert_array_equal(point.labels,
                           sample_point_annotation(full, 2, seed=9).labels)
        scribble = synthesize(full, SparsityConfig(mode="scribble",
                                                   walk_length=5, seed=9))
        assert_array_equal(scribble.labels,
                           sample_scribble_annotation(full, 5, seed=9).labels)

    def test_config_validation(self):
        with pytest.raises(ArgumentError):
            SparsityConfig(mode="stripes")
        with pytest.raises(ArgumentError):
            SparsityConfig(ratio=0.0)
        with pytest.raises(ArgumentError):
            SparsityConfig(points_per_region=0)
        with pytest.raises(ArgumentError):
            SparsityConfig(walk_length=0)

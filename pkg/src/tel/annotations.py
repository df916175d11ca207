"""Synthetic sparse annotations from a fully labeled map.

Three sparsification modes: block keeps the interior-most fraction of
each class region (peeling from the boundaries inward), point keeps a
few sampled pixels per connected region, scribble keeps short
self-avoiding walks.  Block synthesis is deterministic; the sampling
modes consume a single seeded generator in a canonical order (classes
ascending, regions in label order), so equal seeds give equal outputs.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ArgumentError
from .tensors import IGNORE, LabelMap

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class SparsityConfig:
    """How to thin a full label map."""

    mode: str = "block"
    ratio: float = 0.2
    points_per_region: int = 1
    walk_length: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("block", "point", "scribble"):
            raise ArgumentError(f"mode {self.mode!r} not one of block/point/scribble")
        if not 0 < self.ratio <= 1:
            raise ArgumentError(f"ratio must lie in (0, 1], got {self.ratio}")
        if self.points_per_region < 1:
            raise ArgumentError(
                f"points_per_region must be at least 1, got {self.points_per_region}")
        if self.walk_length < 1:
            raise ArgumentError(f"walk_length must be at least 1, got {self.walk_length}")


def synthesize(full, config):
    """Dispatch on config.mode."""
    if config.mode == "block":
        return synth_block_annotation(full, config.ratio, config.seed)
    if config.mode == "point":
        return sample_point_annotation(full, config.points_per_region, config.seed)
    return sample_scribble_annotation(full, config.walk_length, config.seed)


def boundary_distance(full):
    """Steps to the nearest pixel of another class, of the ignore value,
    or off the image, in 4-neighbour taxicab metric.

    Labeled pixels get distance >= 1; ignore pixels get 0.
    """
    dist = np.zeros((full.height, full.width), dtype=np.int64)
    for cls in np.unique(full.labels):
        if cls == IGNORE:
            continue
        mask = np.zeros((full.height + 2, full.width + 2), dtype=bool)
        mask[1:-1, 1:-1] = full.labels == cls
        d = ndimage.distance_transform_cdt(mask, metric="taxicab")
        dist[mask[1:-1, 1:-1]] = d[1:-1, 1:-1][mask[1:-1, 1:-1]]
    return dist


def synth_block_annotation(full, ratio, seed=0):
    """Keep the fraction of labeled pixels farthest from class boundaries.

    Pixels are removed in ascending (distance, linear index) order, so
    every kept pixel is at least as deep as every removed one and the
    kept sets are nested across ratios.  The image border counts as a
    boundary.  seed is accepted for interface symmetry; the result is
    deterministic.
    """
    if not 0 < ratio <= 1:
        raise ArgumentError(f"ratio must lie in (0, 1], got {ratio}")
    dist = boundary_distance(full).ravel()
    labeled = np.nonzero(full.labels.ravel() != IGNORE)[0]
    keep_count = int(round(ratio * labeled.size))
    by_depth = labeled[np.lexsort((labeled, dist[labeled]))]
    removed = by_depth[:labeled.size - keep_count]
    out = full.labels.copy().ravel()
    out[removed] = IGNORE
    return LabelMap.from_array(out.reshape(full.height, full.width),
                               full.num_classes)


def _regions(full):
    """Connected 4-neighbour regions per class, canonical order."""
    for cls in np.unique(full.labels):
        if cls == IGNORE:
            continue
        lab, count = ndimage.label(full.labels == cls, structure=_FOUR)
        for region in range(1, count + 1):
            rows, cols = np.nonzero(lab == region)
            yield int(cls), rows, cols


def sample_point_annotation(full, points_per_region, seed=0):
    """Keep points_per_region uniformly sampled pixels per region
    (fewer if the region is smaller)."""
    if points_per_region < 1:
        raise ArgumentError(
            f"points_per_region must be at least 1, got {points_per_region}")
    rng = np.random.default_rng(seed)
    out = np.full_like(full.labels, IGNORE)
    for cls, rows, cols in _regions(full):
        take = min(points_per_region, rows.size)
        pick = rng.choice(rows.size, size=take, replace=False)
        out[rows[pick], cols[pick]] = cls
    return LabelMap.from_array(out, full.num_classes)


def sample_scribble_annotation(full, walk_length, seed=0):
    """Keep one self-avoiding random walk per region.

    The walk starts at an interior pixel when the region has one (all
    four neighbours in the region) and stops early when boxed in.
    """
    if walk_length < 1:
        raise ArgumentError(f"walk_length must be at least 1, got {walk_length}")
    rng = np.random.default_rng(seed)
    h, w = full.height, full.width
    out = np.full_like(full.labels, IGNORE)
    for cls, rows, cols in _regions(full):
        inside = np.zeros((h, w), dtype=bool)
        inside[rows, cols] = True
        interior = inside.copy()
        interior[rows, cols] = (
            (rows > 0) & (rows < h - 1) & (cols > 0) & (cols < w - 1))
        interior &= (np.roll(inside, 1, 0) & np.roll(inside, -1, 0)
                     & np.roll(inside, 1, 1) & np.roll(inside, -1, 1))
        cand = np.nonzero(interior.ravel())[0]
        if cand.size == 0:
            cand = rows * w + cols
        start = int(cand[rng.integers(cand.size)])
        r, c = divmod(start, w)
        visited = {(r, c)}
        out[r, c] = cls
        for _ in range(walk_length - 1):
            steps = [(r + dr, c + dc)
                     for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
                     if 0 <= r + dr < h and 0 <= c + dc < w
                     and inside[r + dr, c + dc]
                     and (r + dr, c + dc) not in visited]
            if not steps:
                break
            r, c = steps[rng.integers(len(steps))]
            visited.add((r, c))
            out[r, c] = cls
    return LabelMap.from_array(out, full.num_classes)

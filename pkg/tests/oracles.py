"""Slow reference implementations shared by the test modules."""

import numpy as np

from tel import IGNORE, LabelMap


def peel_distance(labels):
    """Reference boundary distance by literal peeling.

    Round k removes every remaining pixel whose 4-neighbourhood leaves
    its class region (image border, another class, ignore, or a pixel
    peeled in an earlier round).
    """
    h, w = labels.shape
    alive = labels != IGNORE
    dist = np.zeros((h, w), dtype=np.int64)
    rounds = 0
    while alive.any():
        rounds += 1
        peel = []
        for r in range(h):
            for c in range(w):
                if not alive[r, c]:
                    continue
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if not (0 <= rr < h and 0 <= cc < w):
                        peel.append((r, c))
                        break
                    if labels[rr, cc] != labels[r, c] or not alive[rr, cc]:
                        peel.append((r, c))
                        break
        for r, c in peel:
            alive[r, c] = False
            dist[r, c] = rounds
    return dist


def random_label_map(rng, height, width, num_classes=4, ignore_frac=0.05):
    """Voronoi cells of random seed points, plus scattered ignore pixels."""
    rows = np.arange(height)[:, None, None]
    cols = np.arange(width)[None, :, None]
    centers = rng.integers(0, [height, width], size=(num_classes + 2, 2))
    owner = rng.integers(0, num_classes, size=num_classes + 2)
    d = (rows - centers[:, 0]) ** 2 + (cols - centers[:, 1]) ** 2
    labels = owner[np.argmin(d, axis=2)].astype(np.uint8)
    labels[rng.random((height, width)) < ignore_frac] = IGNORE
    return LabelMap(height, width, num_classes, labels)

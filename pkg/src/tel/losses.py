"""Supervision terms for sparsely labeled grids.

The segmentation term is cross entropy restricted to labeled pixels.
The tree term compares predictions against pseudo targets obtained by
filtering the predictions through two minimum spanning trees: a
low-level tree built from image colors and a high-level tree built
from learned features (whose affinity uses exp(-D) directly, no
bandwidth).  Both terms and their gradients are computed here without
any autodiff framework; the filter backward supplies the chain through
the pseudo targets unless they are detached.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ValidationError
from .filter import tree_filter_backward, tree_filter_forward
from .tensors import IGNORE

SIGMA_HIGH = 1.0

ASSIGNMENTS = ("l1", "l2", "cross_entropy", "dot_product")
AGGREGATIONS = ("lh_cascade", "hl_cascade", "lh_parallel")

_EPS = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """Knobs of the total loss.

    lam scales the tree term.  naive_threshold switches the pseudo
    targets to confidence-thresholded hard predictions (a baseline that
    uses no trees); it must lie in (0.5, 1].
    """

    lam: float = 0.4
    sigma_low: float = 0.02
    assignment: str = "l1"
    aggregation: str = "lh_cascade"
    detach: bool = False
    naive_threshold: float | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ArgumentError(f"lam must be non-negative, got {self.lam}")
        if self.sigma_low <= 0:
            raise ArgumentError(f"sigma_low must be positive, got {self.sigma_low}")
        if self.assignment not in ASSIGNMENTS:
            raise ArgumentError(
                f"assignment {self.assignment!r} not one of {ASSIGNMENTS}")
        if self.aggregation not in AGGREGATIONS:
            raise ArgumentError(
                f"aggregation {self.aggregation!r} not one of {AGGREGATIONS}")
        if self.naive_threshold is not None and not 0.5 < self.naive_threshold <= 1:
            raise ArgumentError(
                f"naive_threshold must lie in (0.5, 1], got {self.naive_threshold}")


@dataclass(frozen=True)
class LossResult:
    """Total loss with its parts, pseudo targets, and gradients."""

    total: float
    seg: float
    tree: float
    pseudo: list = field(repr=False)
    grad_probs: np.ndarray = field(repr=False)
    grad_t_low: np.ndarray = field(repr=False)
    grad_t_high: np.ndarray = field(repr=False)

    def combined_pseudo(self):
        """Weight-averaged pseudo target, for inspection and metrics."""
        if not self.pseudo:
            return None
        return sum(w * y for w, y in self.pseudo)


def _check_probs_labels(probs, labels):
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 3:
        raise ValidationError(f"expected (classes, H, W) probabilities, got {probs.shape}")
    if probs.shape[1:] != (labels.height, labels.width):
        raise ValidationError(
            f"probabilities cover {probs.shape[1:]}, labels are "
            f"({labels.height}, {labels.width})")
    if labels.num_classes > probs.shape[0]:
        raise ValidationError(
            f"{labels.num_classes} classes in labels but only "
            f"{probs.shape[0]} probability channels")
    return probs


def partial_cross_entropy(probs, labels):
    """Mean negative log likelihood over labeled pixels (0 if none)."""
    probs = _check_probs_labels(probs, labels)
    value, _ = _pce_with_grad(probs.reshape(probs.shape[0], -1),
                              labels.labels.ravel())
    return value


def _pce_with_grad(flat, lab):
    labeled = np.nonzero(lab != IGNORE)[0]
    grad = np.zeros_like(flat)
    if labeled.size == 0:
        return 0.0, grad
    picked = flat[lab[labeled], labeled]
    clamped = np.maximum(picked, _EPS)
    value = float(-np.log(clamped).mean())
    live = picked >= _EPS
    grad[lab[labeled[live]], labeled[live]] = -1.0 / (clamped[live] * labeled.size)
    return value, grad


def _delta_with_grads(p, q, assignment):
    """Per-pixel assignment cost, channel-summed, with both partials."""
    if assignment == "l1":
        diff = p - q
        s = np.sign(diff)
        return np.abs(diff).sum(axis=0), s, -s
    if assignment == "l2":
        diff = p - q
        return (diff * diff).sum(axis=0), 2 * diff, -2 * diff
    if assignment == "cross_entropy":
        clamped = np.maximum(p, _EPS)
        dp = np.where(p >= _EPS, -q / clamped, 0.0)
        return -(q * np.log(clamped)).sum(axis=0), dp, -np.log(clamped)
    return -(p * q).sum(axis=0), -q, -p


def tree_energy_loss(probs, pseudo, labels, assignment="l1"):
    """Mean assignment cost between predictions and pseudo targets over
    unlabeled pixels (0 if none)."""
    if assignment not in ASSIGNMENTS:
        raise ArgumentError(f"assignment {assignment!r} not one of {ASSIGNMENTS}")
    probs = _check_probs_labels(probs, labels)
    pseudo = np.asarray(pseudo, dtype=np.float64)
    if pseudo.shape != probs.shape:
        raise ValidationError(
            f"pseudo shape {pseudo.shape} does not match {probs.shape}")
    unlabeled = ~labels.labeled_mask()
    if not unlabeled.any():
        return 0.0
    cost, _, _ = _delta_with_grads(probs, pseudo, assignment)
    return float(cost[unlabeled].mean())


def cascaded_pseudo_label(probs, labels, low_tree, low_trans, high_tree,
                          high_trans, aggregation="lh_cascade"):
    """Pseudo targets as (weight, field) pairs; weights sum to 1."""
    if aggregation not in AGGREGATIONS:
        raise ArgumentError(f"aggregation {aggregation!r} not one of {AGGREGATIONS}")
    probs = _check_probs_labels(probs, labels)
    flat = probs.reshape(probs.shape[0], -1)
    terms = _pseudo_chains(flat, low_tree, low_trans, high_tree, high_trans,
                           aggregation)
    return [(w, chain[-1][1].reshape(probs.shape)) for w, chain in terms]


def _pseudo_chains(flat, low_tree, low_trans, high_tree, high_trans, aggregation):
    """Run the filter chains; each term is (weight, [(tag, out, ws), ...])."""
    low = ("low", low_tree, low_trans)
    high = ("high", high_tree, high_trans)
    if aggregation == "lh_cascade":
        plans = [(1.0, [low, high])]
    elif aggregation == "hl_cascade":
        plans = [(1.0, [high, low])]
    else:
        plans = [(0.5, [low]), (0.5, [high])]
    terms = []
    for weight, stages in plans:
        x = flat
        chain = []
        for tag, tree, trans in stages:
            out, ws = tree_filter_forward(x, tree, trans)
            chain.append((tag, out, ws))
            x = out
        terms.append((weight, chain))
    return terms


def total_loss(probs, labels, low_tree, low_trans, high_tree, high_trans,
               config=LossConfig()):
    """Segmentation term plus lam times the tree term, with gradients.

    Gradients cover the predictions and both transmittance vectors; the
    filter chains are differentiated unless config.detach is set.  With
    naive_threshold set the pseudo targets are hard argmax predictions
    kept only where the peak probability clears the threshold.
    """
    probs = _check_probs_labels(probs, labels)
    nc = probs.shape[0]
    flat = probs.reshape(nc, -1)
    lab = labels.labels.ravel()
    seg, grad = _pce_with_grad(flat, lab)
    grad_t_low = np.zeros(low_tree.num_nodes)
    grad_t_high = np.zeros(high_tree.num_nodes)
    unlabeled = lab == IGNORE

    if config.naive_threshold is not None:
        pseudo_flat, tree_val, dtree = _naive_term(flat, unlabeled, config)
        pseudo_terms = [(1.0, pseudo_flat.reshape(probs.shape))]
    else:
        terms = _pseudo_chains(flat, low_tree, low_trans, high_tree,
                               high_trans, config.aggregation)
        pseudo_terms = []
        tree_val = 0.0
        dtree = np.zeros_like(flat)
        denom = unlabeled.sum()
        for weight, chain in terms:
            pseudo = chain[-1][1]
            pseudo_terms.append((weight, pseudo.reshape(probs.shape)))
            if denom == 0:
                continue
            cost, dp, dq = _delta_with_grads(flat, pseudo, config.assignment)
            tree_val += weight * float(cost[unlabeled].mean())
            scale = config.lam * weight / denom
            mask = unlabeled[None, :]
            dtree += np.where(mask, scale * dp, 0.0)
            if not config.detach and scale != 0.0:
                g = np.where(mask, scale * dq, 0.0)
                for tag, _, ws in reversed(chain):
                    g, gt = tree_filter_backward(g, ws)
                    if tag == "low":
                        grad_t_low += gt
                    else:
                        grad_t_high += gt
                dtree += g

    total = seg + config.lam * tree_val
    grad = grad + dtree
    return LossResult(float(total), float(seg), float(tree_val),
                      [(w, p) for w, p in pseudo_terms],
                      grad.reshape(probs.shape), grad_t_low, grad_t_high)


def _naive_term(flat, unlabeled, config):
    """Confidence-thresholded hard targets; no trees involved."""
    peak = flat.max(axis=0)
    arg = flat.argmax(axis=0)
    confident = unlabeled & (peak >= config.naive_threshold)
    onehot = np.zeros_like(flat)
    onehot[arg, np.arange(flat.shape[1])] = 1.0
    pseudo = np.where(confident[None, :], onehot, flat)
    dtree = np.zeros_like(flat)
    if not confident.any():
        return pseudo, 0.0, dtree
    cost, dp, _ = _delta_with_grads(flat, onehot, config.assignment)
    value = float(cost[confident].mean())
    scale = config.lam / confident.sum()
    dtree += np.where(confident[None, :], scale * dp, 0.0)
    return pseudo, value, dtree

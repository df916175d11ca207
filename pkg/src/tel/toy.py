"""Desk-scale self-training loop.

A per-pixel MLP on (color, normalized coordinates) stands in for a
segmentation network: one hidden tanh layer feeds a softmax class head
and a linear feature head.  Training minimises the combined loss with
exact hand-derived gradients; the low-level tree is built once from
the image, the high-level tree is rebuilt from the current features
every step, and gradients flow through the high-level transmittances
(the tree topology itself is held fixed within a step).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ValidationError
from .grid import weighted_grid
from .losses import SIGMA_HIGH, LossConfig, total_loss
from .mst import mst_tree
from .tensors import IGNORE, DenseTensor, LabelMap, load_tensor, save_tensor
from .filter import transmittances

_DESC_DIM = 5


@dataclass
class ToyModel:
    """Two-headed per-pixel MLP; all parameters train."""

    num_classes: int
    hidden: int
    feat_dim: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray

    def params(self):
        return [self.w1, self.b1, self.w2, self.b2, self.w3]

    @property
    def param_count(self):
        return sum(p.size for p in self.params())


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 500
    learning_rate: float = 2.0
    momentum: float = 0.0
    seed: int = 0
    eval_interval: int = 1
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if self.steps < 1:
            raise ArgumentError(f"steps must be at least 1, got {self.steps}")
        if self.learning_rate <= 0:
            raise ArgumentError(
                f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ArgumentError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.eval_interval < 1:
            raise ArgumentError(
                f"eval_interval must be at least 1, got {self.eval_interval}")


@dataclass(frozen=True)
class StepMetrics:
    """Loss parts and accuracies of one training step (before update).

    pseudo_acc and pred_acc compare pseudo targets and predictions
    against the full ground truth on unlabeled pixels only.
    """

    step: int
    seg: float
    tree: float
    total: float
    pixel_acc: float | None = None
    miou: float | None = None
    pseudo_acc: float | None = None
    pred_acc: float | None = None


@dataclass(frozen=True)
class EvalResult:
    pixel_acc: float
    miou: float
    valid: bool


def init_model(num_classes, hidden=16, feat_dim=8, seed=0):
    """Uniform [-0.1, 0.1] parameters from one seeded generator."""
    if num_classes < 2 or hidden < 1 or feat_dim < 1:
        raise ArgumentError(
            f"bad dims: num_classes={num_classes}, hidden={hidden}, "
            f"feat_dim={feat_dim}")
    rng = np.random.default_rng(seed)

    def draw(*shape):
        return rng.uniform(-0.1, 0.1, size=shape)

    return ToyModel(num_classes, hidden, feat_dim,
                    draw(hidden, _DESC_DIM), draw(hidden),
                    draw(num_classes, hidden), draw(num_classes),
                    draw(feat_dim, hidden))


def descriptors(image):
    """(5, n) per-pixel inputs: color channels then x/width, y/height."""
    data = image.data if isinstance(image, DenseTensor) else np.asarray(image)
    c, h, w = data.shape
    if c == 1:
        data = np.repeat(data, 3, axis=0)
    elif c != 3:
        raise ValidationError(f"image must have 1 or 3 channels, got {c}")
    cols, rows = np.meshgrid(np.arange(w), np.arange(h))
    d = np.empty((_DESC_DIM, h * w))
    d[:3] = data.reshape(3, -1)
    d[3] = (cols / w).ravel()
    d[4] = (rows / h).ravel()
    return d


def forward(model, image):
    """Class probabilities and features, each flattened to (dim, n)."""
    probs, feats, _, _ = _forward_cached(model, descriptors(image))
    return probs, feats


def _forward_cached(model, d):
    pre = model.w1 @ d + model.b1[:, None]
    hid = np.tanh(pre)
    logits = model.w2 @ hid + model.b2[:, None]
    logits -= logits.max(axis=0, keepdims=True)
    e = np.exp(logits)
    probs = e / e.sum(axis=0, keepdims=True)
    feats = model.w3 @ hid
    return probs, feats, hid, d


def evaluate(probs, full_labels):
    """Pixel accuracy and mean IoU of argmax(probs) against a LabelMap.

    IoU is averaged over the classes present in the ground truth.
    """
    probs = np.asarray(probs)
    pred = probs.reshape(probs.shape[0], -1).argmax(axis=0)
    gt = full_labels.labels.ravel()
    valid = gt != IGNORE
    if not valid.any():
        return EvalResult(0.0, 0.0, False)
    pred, gt = pred[valid], gt[valid]
    acc = float((pred == gt).mean())
    ious = []
    for cls in np.unique(gt):
        inter = ((pred == cls) & (gt == cls)).sum()
        union = ((pred == cls) | (gt == cls)).sum()
        ious.append(inter / union if union else 0.0)
    return EvalResult(acc, float(np.mean(ious)), True)


def build_low_stage(image, loss_config):
    """Static tree and transmittances from image colors; built once."""
    data = image.data if isinstance(image, DenseTensor) else np.asarray(image)
    tree = mst_tree(weighted_grid(data))
    return tree, transmittances(tree, loss_config.sigma_low)


def train_step(model, image, sparse_labels, config, low=None, full_labels=None,
               step=0):
    """One gradient update; returns (loss value, model, StepMetrics).

    The model is updated in place.  low caches (tree, transmittances)
    of the static stage; metrics beyond the losses need full_labels.
    """
    d = descriptors(image)
    probs, feats, hid, _ = _forward_cached(model, d)
    h, w = sparse_labels.height, sparse_labels.width
    if d.shape[1] != h * w:
        raise ValidationError(
            f"image has {d.shape[1]} pixels, labels {h * w}")
    if low is None:
        low = build_low_stage(image, config.loss)
    low_tree, low_trans = low
    high_tree = mst_tree(weighted_grid(feats.reshape(model.feat_dim, h, w)))
    high_trans = transmittances(high_tree, SIGMA_HIGH)

    result = total_loss(probs.reshape(model.num_classes, h, w), sparse_labels,
                        low_tree, low_trans, high_tree, high_trans, config.loss)
    if not np.isfinite(result.total):
        raise ValidationError(
            "non-finite loss; diagnostics: "
            f"P in [{probs.min():.3e}, {probs.max():.3e}], "
            f"F in [{feats.min():.3e}, {feats.max():.3e}], "
            f"t_low in [{low_trans.per_node.min():.3e}, {low_trans.per_node.max():.3e}], "
            f"t_high in [{high_trans.per_node.min():.3e}, {high_trans.per_node.max():.3e}]")

    grads = _parameter_grads(model, d, probs, feats, hid, high_tree, high_trans,
                             result)
    _apply_update(model, grads, config)

    metrics = _step_metrics(step, result, probs, sparse_labels, full_labels)
    return result.total, model, metrics


def _parameter_grads(model, d, probs, feats, hid, high_tree, high_trans, result):
    gp = result.grad_probs.reshape(model.num_classes, -1)
    g_logits = probs * (gp - (gp * probs).sum(axis=0, keepdims=True))

    g_feats = np.zeros_like(feats)
    gt = result.grad_t_high
    if np.any(gt):
        nodes = high_tree.order[1:]
        par = high_tree.parent[nodes]
        # dL/dw of a parent edge: t = exp(-w), so -t * dL/dt; the edge
        # weight is the squared feature distance of its endpoints.
        gw = -high_trans.per_node[nodes] * gt[nodes]
        diff = feats[:, nodes] - feats[:, par]
        contrib = 2.0 * gw * diff
        np.add.at(g_feats.T, nodes, contrib.T)
        np.add.at(g_feats.T, par, -contrib.T)

    g_hid = model.w2.T @ g_logits + model.w3.T @ g_feats
    g_pre = g_hid * (1.0 - hid * hid)
    return {
        "w1": g_pre @ d.T,
        "b1": g_pre.sum(axis=1),
        "w2": g_logits @ hid.T,
        "b2": g_logits.sum(axis=1),
        "w3": g_feats @ hid.T,
    }


def _apply_update(model, grads, config):
    if config.momentum > 0:
        if not hasattr(model, "_velocity"):
            model._velocity = {k: np.zeros_like(v) for k, v in grads.items()}
        for name, g in grads.items():
            v = model._velocity[name]
            v *= config.momentum
            v += g
            getattr(model, name)[...] -= config.learning_rate * v
    else:
        for name, g in grads.items():
            getattr(model, name)[...] -= config.learning_rate * g


def _step_metrics(step, result, probs, sparse_labels, full_labels):
    if full_labels is None:
        return StepMetrics(step, result.seg, result.tree, result.total)
    ev = evaluate(probs, full_labels)
    pseudo = result.combined_pseudo()
    pseudo_acc = pred_acc = None
    gt = full_labels.labels.ravel()
    unlabeled = (sparse_labels.labels.ravel() == IGNORE) & (gt != IGNORE)
    if pseudo is not None and unlabeled.any():
        flat = probs.reshape(probs.shape[0], -1)
        pflat = pseudo.reshape(pseudo.shape[0], -1)
        pseudo_acc = float((pflat.argmax(axis=0)[unlabeled] == gt[unlabeled]).mean())
        pred_acc = float((flat.argmax(axis=0)[unlabeled] == gt[unlabeled]).mean())
    return StepMetrics(step, result.seg, result.tree, result.total,
                       ev.pixel_acc, ev.miou, pseudo_acc, pred_acc)


def run_training(image, sparse_labels, config, full_labels=None):
    """Full loop; returns (model, [StepMetrics]).

    Metrics are recorded at every eval_interval-th step and at the
    final step.  Deterministic for a given config.
    """
    model = init_model(sparse_labels.num_classes, seed=config.seed)
    low = build_low_stage(image, config.loss)
    history = []
    for step in range(1, config.steps + 1):
        record = step % config.eval_interval == 0 or step == config.steps
        _, model, metrics = train_step(
            model, image, sparse_labels, config, low=low,
            full_labels=full_labels if record else None, step=step)
        if record:
            history.append(metrics)
    return model, history


def write_metrics_csv(history, path):
    """CSV with the step, both loss parts, and the tracked accuracies."""
    def fmt(x):
        return "" if x is None else f"{x:.6f}"

    with open(path, "w") as fh:
        fh.write("step,L_seg,L_tree,pixel_acc,mIoU,pseudo_label_acc\n")
        for m in history:
            fh.write(f"{m.step},{m.seg:.6f},{m.tree:.6f},{fmt(m.pixel_acc)},"
                     f"{fmt(m.miou)},{fmt(m.pseudo_acc)}\n")


def save_checkpoint(model, path):
    """Pack all parameters into one flat tensor file."""
    flat = np.concatenate([p.ravel() for p in model.params()])
    header = np.array([model.num_classes, model.hidden, model.feat_dim],
                      dtype=np.float64)
    payload = np.concatenate([header, flat])
    save_tensor(DenseTensor.from_array(payload.reshape(1, 1, -1)), path)


def load_checkpoint(path):
    """Rebuild a ToyModel from save_checkpoint output."""
    payload = load_tensor(path).data.ravel()
    if payload.size < 3:
        raise ValidationError(f"checkpoint too short: {payload.size} values")
    num_classes, hidden, feat_dim = (int(round(x)) for x in payload[:3])
    model = init_model(num_classes, hidden, feat_dim, seed=0)
    if payload.size - 3 != model.param_count:
        raise ValidationError(
            f"checkpoint has {payload.size - 3} values, expected "
            f"{model.param_count}")
    offset = 3
    for p in model.params():
        p[...] = payload[offset:offset + p.size].reshape(p.shape)
        offset += p.size
    return model


def two_region_fixture(size=32, noise=0.02, seed=0):
    """Left half one color, right half another, plus Gaussian noise.

    Returns (image, full_labels) with classes 0 (left) and 1 (right).
    """
    rng = np.random.default_rng(seed)
    img = np.empty((3, size, size))
    img[:, :, :size // 2] = np.array([0.9, 0.1, 0.1])[:, None, None]
    img[:, :, size // 2:] = np.array([0.1, 0.1, 0.9])[:, None, None]
    img += rng.normal(0.0, noise, img.shape)
    img = np.clip(img, 0.0, 1.0)
    labels = np.zeros((size, size), dtype=np.uint8)
    labels[:, size // 2:] = 1
    return DenseTensor.from_array(img), LabelMap.from_array(labels, 2)


def checkerboard_fixture(size=32, tiles=4, noise=0.02, seed=0):
    """tiles x tiles alternating two-class board with Gaussian noise."""
    if size % tiles:
        raise ArgumentError(f"tiles {tiles} must divide size {size}")
    rng = np.random.default_rng(seed)
    cell = size // tiles
    rows, cols = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    labels = (((rows // cell) + (cols // cell)) % 2).astype(np.uint8)
    palette = np.array([[0.9, 0.1, 0.1], [0.1, 0.1, 0.9]])
    img = palette[labels].transpose(2, 0, 1).astype(np.float64)
    img += rng.normal(0.0, noise, img.shape)
    img = np.clip(img, 0.0, 1.0)
    return DenseTensor.from_array(img), LabelMap.from_array(labels, 2)

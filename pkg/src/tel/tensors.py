"""Value types and file formats.

Two in-memory types (DenseTensor for channel-major float fields,
LabelMap for integer class maps with an ignore value) plus their disk
formats: PNG through Pillow and a small raw tensor container.

Tensor container layout, little endian:

    bytes 0..3    magic b"TELT"
    bytes 4..15   three uint32: channels, height, width
    bytes 16..    channels*height*width float32, row major (C, H, W)
"""

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ArgumentError, FormatError, ValidationError

IGNORE = 255

_MAGIC = b"TELT"
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class DenseTensor:
    """A (channels, height, width) float64 field with finite entries."""

    channels: int
    height: int
    width: int
    data: np.ndarray

    def __post_init__(self):
        if self.channels < 1 or self.height < 1 or self.width < 1:
            raise ValidationError(
                f"tensor dims must be positive, got "
                f"({self.channels}, {self.height}, {self.width})")
        if self.data.shape != (self.channels, self.height, self.width):
            raise ValidationError(
                f"data shape {self.data.shape} does not match dims "
                f"({self.channels}, {self.height}, {self.width})")
        bad = ~np.isfinite(self.data)
        if bad.any():
            c, r, col = (int(x[0]) for x in np.nonzero(bad))
            raise ValidationError(
                f"non-finite value at channel {c}, pixel ({r}, {col})")

    @classmethod
    def from_array(cls, data):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3:
            raise ValidationError(f"expected 2 or 3 axes, got {data.ndim}")
        return cls(data.shape[0], data.shape[1], data.shape[2], data)


@dataclass(frozen=True)
class LabelMap:
    """A (height, width) class map; entries are class ids below
    num_classes or IGNORE (255) for unlabeled pixels."""

    height: int
    width: int
    num_classes: int
    labels: np.ndarray

    def __post_init__(self):
        if not 1 <= self.num_classes < IGNORE:
            raise ValidationError(
                f"num_classes must be in [1, {IGNORE}), got {self.num_classes}")
        if self.labels.shape != (self.height, self.width):
            raise ValidationError(
                f"labels shape {self.labels.shape} does not match "
                f"({self.height}, {self.width})")
        bad = (self.labels >= self.num_classes) & (self.labels != IGNORE)
        if bad.any():
            r, c = (int(x[0]) for x in np.nonzero(bad))
            raise ValidationError(
                f"label {int(self.labels[r, c])} at pixel ({r}, {c}) is outside "
                f"[0, {self.num_classes}) and is not the ignore value {IGNORE}")

    @classmethod
    def from_array(cls, labels, num_classes):
        labels = np.ascontiguousarray(labels, dtype=np.uint8)
        if labels.ndim != 2:
            raise ValidationError(f"expected 2 axes, got {labels.ndim}")
        return cls(labels.shape[0], labels.shape[1], num_classes, labels)

    def labeled_mask(self):
        return self.labels != IGNORE


def save_tensor(tensor, path):
    """Write a DenseTensor to the raw container (float32 payload)."""
    header = _HEADER.pack(_MAGIC, tensor.channels, tensor.height, tensor.width)
    payload = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def _open_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror or exc}") from None


def load_tensor(path):
    """Read a DenseTensor from the raw container."""
    blob = _open_bytes(str(path))
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, c, h, w = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 4 * c * h * w
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload is {len(blob) - _HEADER.size} bytes, "
            f"expected {expected - _HEADER.size}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    data = data.reshape(c, h, w).astype(np.float64)
    return DenseTensor(c, h, w, data)


def load_image(path):
    """Read a PNG as a DenseTensor scaled to [0, 1].

    Only grayscale (mode L) and RGB images are accepted.
    """
    with _open_pil(path) as img:
        if img.mode == "L":
            arr = np.asarray(img, dtype=np.float64)[None]
        elif img.mode == "RGB":
            arr = np.asarray(img, dtype=np.float64).transpose(2, 0, 1)
        else:
            raise FormatError(
                f"{path}: unsupported image mode {img.mode!r} (want L or RGB)")
    return DenseTensor.from_array(arr / 255.0)


def save_image(tensor, path):
    """Write a 1- or 3-channel DenseTensor as a PNG, clamping to [0, 1]."""
    if tensor.channels not in (1, 3):
        raise ArgumentError(
            f"can only save 1- or 3-channel tensors as images, "
            f"got {tensor.channels}")
    arr = np.clip(tensor.data, 0.0, 1.0)
    arr = np.rint(arr * 255.0).astype(np.uint8)
    if tensor.channels == 1:
        Image.fromarray(arr[0], mode="L").save(path)
    else:
        Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(path)


def _open_pil(path):
    # UnidentifiedImageError is an OSError subclass, so this covers
    # both missing files and non-image bytes.
    try:
        return Image.open(path)
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_label_map(path, num_classes):
    """Read a label PNG (palette or grayscale) as a LabelMap."""
    with _open_pil(path) as img:
        if img.mode not in ("L", "P"):
            raise FormatError(
                f"{path}: unsupported label mode {img.mode!r} (want L or P)")
        arr = np.asarray(img, dtype=np.uint8)
    return LabelMap.from_array(arr, num_classes)


def save_label_map(label_map, path):
    """Write a LabelMap as a grayscale PNG (ignore pixels stay 255)."""
    Image.fromarray(label_map.labels, mode="L").save(path)

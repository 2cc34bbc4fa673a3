"""Datasets for the reference trainer.

Two sources:

* ``mnist`` — IDX files (optionally gzipped) read from a local directory,
  preprocessed by global mean subtraction;
* ``synthetic`` (alias ``custom``) — a deterministic generated 10-class
  image set for environments without the real data. Each class renders a
  distinct bright square plus an orientation stripe on a noisy canvas, so a
  small CNN separates the classes within a couple of epochs.

Desk scale holds out 5000 training and 1000 validation samples by default;
the split is seeded and the validation images never appear in training.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DESK_TRAIN = 5000
DESK_VAL = 1000


class DataError(RuntimeError):
    pass


@dataclass
class Split:
    train_x: np.ndarray  # (N, C, H, W) float32, preprocessed
    train_y: np.ndarray  # (N,) int64
    val_x: np.ndarray
    val_y: np.ndarray
    classes: int

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return tuple(self.train_x.shape[1:])


def _read_idx(path: Path) -> np.ndarray:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        magic, = struct.unpack(">I", fh.read(4))
        ndim = magic & 0xFF
        dims = struct.unpack(">" + "I" * ndim, fh.read(4 * ndim))
        data = np.frombuffer(fh.read(), dtype=np.uint8)
    return data.reshape(dims)


def _find_idx(data_dir: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        p = data_dir / name
        if p.exists():
            return p
    raise DataError(f"missing {stem}[.gz] under {data_dir}")


def load_mnist(data_dir: str | Path, train_size: int, val_size: int,
               seed: int = 0) -> Split:
    data_dir = Path(data_dir)
    images = _read_idx(_find_idx(data_dir, "train-images-idx3-ubyte"))
    labels = _read_idx(_find_idx(data_dir, "train-labels-idx1-ubyte"))
    if images.shape[0] != labels.shape[0]:
        raise DataError("image/label count mismatch")
    x = images.astype(np.float32)[:, None, :, :] / 255.0
    return _split(x, labels.astype(np.int64), train_size, val_size, seed)


def make_synthetic(train_size: int, val_size: int, seed: int = 0) -> Split:
    rng = np.random.default_rng(seed)
    n = train_size + val_size
    y = rng.integers(0, 10, size=n).astype(np.int64)
    x = rng.normal(0.0, 0.25, size=(n, 1, 28, 28)).astype(np.float32)
    for i, cls in enumerate(y):
        r = (cls % 5) * 5 + 1
        c = (cls // 5) * 12 + 4
        x[i, 0, r:r + 5, c:c + 5] += 1.5
        if cls % 2:
            x[i, 0, 24, 2:26] += 1.0
        else:
            x[i, 0, 2:26, 24] += 1.0
    return _split(x, y, train_size, val_size, seed + 1)


def _split(x: np.ndarray, y: np.ndarray, train_size: int, val_size: int,
           seed: int) -> Split:
    total = train_size + val_size
    if x.shape[0] < total:
        raise DataError(f"need {total} samples, dataset has {x.shape[0]}")
    order = np.random.default_rng(seed).permutation(x.shape[0])[:total]
    x, y = x[order], y[order]
    train_x, val_x = x[:train_size], x[train_size:]
    train_y, val_y = y[:train_size], y[train_size:]
    mean = float(train_x.mean())  # global mean subtraction
    return Split(
        train_x - mean, train_y.copy(), val_x - mean, val_y.copy(),
        classes=10,
    )


def load_dataset(name: str, data_dir: str | Path | None,
                 train_size: int = DESK_TRAIN, val_size: int = DESK_VAL,
                 seed: int = 0) -> Split:
    name = name.lower()
    if name in ("synthetic", "custom"):
        return make_synthetic(train_size, val_size, seed)
    if name == "mnist":
        if data_dir is None:
            raise DataError("mnist requires --data-dir with IDX files")
        return load_mnist(data_dir, train_size, val_size, seed)
    raise DataError(f"dataset unavailable: {name}")

"""Writers for the pipeline's binary interchange files.

Independent implementation of the interface formats (all little-endian,
4-byte magic + uint32 version 1):

  MCHF  n u64, d u32, n*d float32 row-major
  MCHR  n u64, d u32, per item: m u16, m*d float32, m*4 float32 rects
  MCHL  n u64, c u32, n rows of ceil(c/8) bytes, label j at bit j%8 of
        byte j//8
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Sequence

import numpy as np

VERSION = 1


def _header(fh: BinaryIO, magic: bytes, n: int, second: int) -> None:
    fh.write(magic)
    fh.write(struct.pack("<I", VERSION))
    fh.write(struct.pack("<QI", n, second))


def write_features(path: str, feats: np.ndarray) -> None:
    feats = np.ascontiguousarray(feats, dtype="<f4")
    with open(path, "wb") as fh:
        _header(fh, b"MCHF", feats.shape[0], feats.shape[1])
        fh.write(feats.tobytes())


def write_regions(
    path: str, blocks: Sequence[np.ndarray], rects: Sequence[np.ndarray]
) -> None:
    d = np.asarray(blocks[0]).shape[1]
    with open(path, "wb") as fh:
        _header(fh, b"MCHR", len(blocks), d)
        for block, rect in zip(blocks, rects):
            block = np.ascontiguousarray(block, dtype="<f4")
            rect = np.ascontiguousarray(rect, dtype="<f4")
            if block.shape[1] != d or rect.shape != (block.shape[0], 4):
                raise ValueError("inconsistent region/rectangle block shapes")
            fh.write(struct.pack("<H", block.shape[0]))
            fh.write(block.tobytes())
            fh.write(rect.tobytes())


def write_labels(path: str, rows: np.ndarray) -> None:
    rows = (np.asarray(rows) != 0).astype(np.uint8)
    packed = np.packbits(rows, axis=1, bitorder="little")
    with open(path, "wb") as fh:
        _header(fh, b"MCHL", rows.shape[0], rows.shape[1])
        fh.write(packed.tobytes())

"""Binary file formats shared across the pipeline.

All multi-byte fields are little-endian; every file opens with a 4-byte
magic and a uint32 format version.  Codes are stored as ceil(q/8)-byte
blocks in the same little-endian bit order the in-memory codes use, so a
block is exactly ``HashCode.bits``.

  MCHF  features:  n u64, d u32, then n*d float32 row-major
  MCHR  regions:   n u64, d u32, then per item: m u16, m*d float32,
                   m*4 float32 crop rectangles (x, y, w, h in [0,1];
                   zeros for synthetic data)
  MCHL  labels:    n u64, c u32, then n rows of ceil(c/8) multi-hot bytes
                   (label j of a row in byte j//8, bit j%8)
  MCHB  model:     d u32, q u32, relaxation u8, loss kind u8,
                   weight scheme u8, alpha/gamma/margin_h/epsilon float64,
                   then d*q float64 row-major weights
  MCHP  policy:    layer count u32, widths (count+1) u32, per layer W then
                   b float64, then per hidden layer running mean/var float64
  MCHI  index:     q u16, item count u64, then per item: id u64,
                   code count u16, codes as ceil(q/8)-byte blocks
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Sequence

import numpy as np

from mch.basemodel import BaseHashModel
from mch.agent import PolicyNetwork
from mch.encoder import MultiCodeEntry
from mch.hamming import HashCode, n_bytes
from mch.index import BucketIndex, build
from mch.loss import LOSS_KINDS, WEIGHT_SCHEMES, LossSpec

FORMAT_VERSION = 1

_RELAXATIONS = ("smoothing", "continuous")


class FormatError(RuntimeError):
    """Malformed, truncated, or wrong-magic file."""


def _read_exact(fh: BinaryIO, size: int, what: str) -> bytes:
    buf = fh.read(size)
    if len(buf) != size:
        raise FormatError(f"truncated file while reading {what}")
    return buf


def _read_header(fh: BinaryIO, magic: bytes) -> None:
    got = fh.read(4)
    if got != magic:
        raise FormatError(
            f"bad magic {got!r} (expected {magic.decode('ascii')})"
        )
    (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")


def _write_header(fh: BinaryIO, magic: bytes) -> None:
    fh.write(magic)
    fh.write(struct.pack("<I", FORMAT_VERSION))


# -- MCHF ------------------------------------------------------------------


def write_features(path: str, feats: np.ndarray) -> None:
    feats = np.ascontiguousarray(feats, dtype="<f4")
    if feats.ndim != 2:
        raise ValueError("features must be an (n, d) matrix")
    with open(path, "wb") as fh:
        _write_header(fh, b"MCHF")
        fh.write(struct.pack("<QI", feats.shape[0], feats.shape[1]))
        fh.write(feats.tobytes())


def read_features(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        _read_header(fh, b"MCHF")
        n, d = struct.unpack("<QI", _read_exact(fh, 12, "feature header"))
        data = _read_exact(fh, 4 * n * d, "feature rows")
    return np.frombuffer(data, dtype="<f4").reshape(n, d).copy()


# -- MCHR ------------------------------------------------------------------


def write_regions(
    path: str,
    regions: Sequence[np.ndarray],
    rects: Sequence[np.ndarray] | None = None,
) -> None:
    """Per item an (m_i, d) float block plus m_i crop rectangles."""
    if not regions:
        raise ValueError("no region blocks")
    d = np.asarray(regions[0]).shape[1]
    with open(path, "wb") as fh:
        _write_header(fh, b"MCHR")
        fh.write(struct.pack("<QI", len(regions), d))
        for i, block in enumerate(regions):
            block = np.ascontiguousarray(block, dtype="<f4")
            if block.ndim != 2 or block.shape[1] != d:
                raise ValueError(f"region block {i} is not (m, {d})")
            m = block.shape[0]
            fh.write(struct.pack("<H", m))
            fh.write(block.tobytes())
            if rects is None:
                rect = np.zeros((m, 4), dtype="<f4")
            else:
                rect = np.ascontiguousarray(rects[i], dtype="<f4")
                if rect.shape != (m, 4):
                    raise ValueError(f"rectangle block {i} is not (m, 4)")
            fh.write(rect.tobytes())


def read_regions(path: str) -> tuple[list[np.ndarray], list[np.ndarray]]:
    with open(path, "rb") as fh:
        _read_header(fh, b"MCHR")
        n, d = struct.unpack("<QI", _read_exact(fh, 12, "region header"))
        blocks: list[np.ndarray] = []
        rects: list[np.ndarray] = []
        for i in range(n):
            (m,) = struct.unpack("<H", _read_exact(fh, 2, f"region count {i}"))
            raw = _read_exact(fh, 4 * m * d, f"region block {i}")
            blocks.append(np.frombuffer(raw, dtype="<f4").reshape(m, d).copy())
            raw = _read_exact(fh, 16 * m, f"rect block {i}")
            rects.append(np.frombuffer(raw, dtype="<f4").reshape(m, 4).copy())
    return blocks, rects


# -- MCHL ------------------------------------------------------------------


def write_labels(path: str, labels: np.ndarray) -> None:
    labels = (np.asarray(labels) != 0).astype(np.uint8)
    if labels.ndim != 2:
        raise ValueError("labels must be an (n, c) multi-hot matrix")
    n, c = labels.shape
    packed = np.packbits(labels, axis=1, bitorder="little")
    with open(path, "wb") as fh:
        _write_header(fh, b"MCHL")
        fh.write(struct.pack("<QI", n, c))
        fh.write(packed.tobytes())


def read_labels(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        _read_header(fh, b"MCHL")
        n, c = struct.unpack("<QI", _read_exact(fh, 12, "label header"))
        row_bytes = (c + 7) // 8
        raw = _read_exact(fh, n * row_bytes, "label rows")
    packed = np.frombuffer(raw, dtype=np.uint8).reshape(n, row_bytes)
    return np.unpackbits(packed, axis=1, bitorder="little")[:, :c].copy()


# -- MCHB ------------------------------------------------------------------


def write_model(path: str, model: BaseHashModel) -> None:
    spec = model.spec
    with open(path, "wb") as fh:
        _write_header(fh, b"MCHB")
        fh.write(
            struct.pack(
                "<IIBBB",
                model.d,
                model.q,
                _RELAXATIONS.index(model.mode),
                LOSS_KINDS.index(spec.kind),
                WEIGHT_SCHEMES.index(spec.weight_scheme),
            )
        )
        fh.write(
            struct.pack(
                "<dddd", spec.alpha, spec.gamma, spec.margin_h, spec.epsilon
            )
        )
        fh.write(np.ascontiguousarray(model.w, dtype="<f8").tobytes())


def read_model(path: str) -> BaseHashModel:
    with open(path, "rb") as fh:
        _read_header(fh, b"MCHB")
        d, q, relax, kind, scheme = struct.unpack(
            "<IIBBB", _read_exact(fh, 11, "model header")
        )
        try:
            mode = _RELAXATIONS[relax]
            kind_name = LOSS_KINDS[kind]
            scheme_name = WEIGHT_SCHEMES[scheme]
        except IndexError as exc:
            raise FormatError("unknown relaxation/kind/scheme tag") from exc
        alpha, gamma, margin_h, epsilon = struct.unpack(
            "<dddd", _read_exact(fh, 32, "model hyperparameters")
        )
        raw = _read_exact(fh, 8 * d * q, "weight matrix")
    spec = LossSpec(
        kind=kind_name, q=q, alpha=alpha, gamma=gamma, margin_h=margin_h,
        weight_scheme=scheme_name, epsilon=epsilon,
    )
    w = np.frombuffer(raw, dtype="<f8").reshape(d, q).copy()
    return BaseHashModel(w, mode, spec)


# -- MCHP ------------------------------------------------------------------


def write_policy(path: str, net: PolicyNetwork) -> None:
    with open(path, "wb") as fh:
        _write_header(fh, b"MCHP")
        fh.write(struct.pack("<I", net.n_layers))
        fh.write(struct.pack(f"<{len(net.widths)}I", *net.widths))
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
        for mean, var in zip(net.running_mean, net.running_var):
            fh.write(np.ascontiguousarray(mean, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(var, dtype="<f8").tobytes())


def read_policy(path: str) -> PolicyNetwork:
    with open(path, "rb") as fh:
        _read_header(fh, b"MCHP")
        (n_layers,) = struct.unpack("<I", _read_exact(fh, 4, "layer count"))
        widths = list(
            struct.unpack(
                f"<{n_layers + 1}I",
                _read_exact(fh, 4 * (n_layers + 1), "layer widths"),
            )
        )
        net = PolicyNetwork(widths)
        for l in range(n_layers):
            fan_in, fan_out = widths[l], widths[l + 1]
            raw = _read_exact(fh, 8 * fan_in * fan_out, f"layer {l} weights")
            net.weights[l] = np.frombuffer(raw, dtype="<f8").reshape(
                fan_in, fan_out
            ).copy()
            raw = _read_exact(fh, 8 * fan_out, f"layer {l} bias")
            net.biases[l] = np.frombuffer(raw, dtype="<f8").copy()
        for l in range(n_layers - 1):
            width = widths[l + 1]
            raw = _read_exact(fh, 8 * width, f"layer {l} running mean")
            net.running_mean[l] = np.frombuffer(raw, dtype="<f8").copy()
            raw = _read_exact(fh, 8 * width, f"layer {l} running var")
            net.running_var[l] = np.frombuffer(raw, dtype="<f8").copy()
    net.training = False
    return net


# -- MCHI ------------------------------------------------------------------


def write_index(path: str, index: BucketIndex) -> None:
    with open(path, "wb") as fh:
        _write_header(fh, b"MCHI")
        fh.write(struct.pack("<HQ", index.q, index.n_items))
        for item in sorted(index.entries):
            codes = index.entries[item]
            fh.write(struct.pack("<QH", item, len(codes)))
            for code in codes:
                fh.write(code.bits)


def write_entries(
    path: str, q: int, entries: Sequence[MultiCodeEntry]
) -> None:
    """Persist encoded entries' kept codes in the index format."""
    with open(path, "wb") as fh:
        _write_header(fh, b"MCHI")
        fh.write(struct.pack("<HQ", q, len(entries)))
        for entry in sorted(entries, key=lambda e: e.item):
            codes = entry.codes
            fh.write(struct.pack("<QH", entry.item, len(codes)))
            for code in codes:
                fh.write(code.bits)


def read_index(path: str) -> BucketIndex:
    with open(path, "rb") as fh:
        _read_header(fh, b"MCHI")
        q, n = struct.unpack("<HQ", _read_exact(fh, 10, "index header"))
        if not 1 <= q <= 256:
            raise FormatError(f"code length {q} out of range")
        block = n_bytes(q)
        entries = []
        for i in range(n):
            item, count = struct.unpack(
                "<QH", _read_exact(fh, 10, f"entry header {i}")
            )
            codes = []
            for _ in range(count):
                raw = _read_exact(fh, block, f"code block of item {item}")
                try:
                    codes.append(HashCode(q, raw))
                except ValueError as exc:
                    raise FormatError(str(exc)) from exc
            entries.append((item, codes))
    try:
        return build(entries)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc

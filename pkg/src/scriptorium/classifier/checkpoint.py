"""Versioned little-endian binary checkpoint.

Layout (all integers little-endian)::

    magic         4s   b"SCRB"
    version       u16  1
    in_channels   u32
    in_height     u32
    in_width      u32
    num_classes   u32
    seed          u64
    mode          u8   0=RGB 1=GS 2=GS_MASK
    mask_thresh   u8
    n_conv        u32
      n_conv x (out_channels u32, kernel u32, stride u32, pool u8)
    n_fc          u32
      n_fc x width u32
    n_names       u32  0 or num_classes
      n_names x (len u16, utf-8 bytes)
    mean          f64
    std           f64
    n_values      u64  total parameter count
    values        n_values x f64, tensors in declaration order, C order
"""
from __future__ import annotations

import struct

import numpy as np

from ..imaging import PreprocessMode
from .config import ConvLayer, ModelConfig
from .model import ModelParams

MAGIC = b"SCRB"
VERSION = 1
_MODES = [PreprocessMode.RGB, PreprocessMode.GS, PreprocessMode.GS_MASK]


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


def save_checkpoint(params: ModelParams) -> bytes:
    params.check()
    cfg = params.config
    out = [MAGIC, struct.pack("<H", VERSION)]
    out.append(struct.pack("<IIIIQBB", cfg.input_channels, cfg.input_height, cfg.input_width,
                           cfg.num_classes, cfg.seed & 0xFFFFFFFFFFFFFFFF,
                           _MODES.index(cfg.mode), cfg.mask_threshold))
    out.append(struct.pack("<I", len(cfg.conv_layers)))
    for layer in cfg.conv_layers:
        out.append(struct.pack("<IIIB", layer.out_channels, layer.kernel_size, layer.stride, int(layer.pool)))
    out.append(struct.pack("<I", len(cfg.fc_layers)))
    out.extend(struct.pack("<I", w) for w in cfg.fc_layers)
    out.append(struct.pack("<I", len(cfg.class_names)))
    for name in cfg.class_names:
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
    out.append(struct.pack("<dd", params.mean, params.std))
    out.append(struct.pack("<Q", params.size))
    out.extend(np.ascontiguousarray(t, dtype="<f8").tobytes() for t in params.tensors)
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError(f"checkpoint truncated at byte {len(self.data)} (needed {self.pos + n})")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(data: bytes) -> ModelParams:
    """Parse a checkpoint, raising a specific :class:`CheckpointError` subclass on damage."""
    r = _Reader(bytes(data))
    if len(data) >= 4 and bytes(r.data[:4]) != MAGIC:
        raise BadMagicError(f"bad magic {bytes(r.data[:4])!r}, expected {MAGIC!r}")
    r.take(4)
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise VersionMismatchError(f"checkpoint version {version}, this build reads {VERSION}")
    cin, h, w, k, seed, mode_idx, thresh = r.unpack("<IIIIQBB")
    if mode_idx >= len(_MODES):
        raise ShapeMismatchError(f"unknown preprocessing mode code {mode_idx}")
    (n_conv,) = r.unpack("<I")
    conv = []
    for _ in range(n_conv):
        oc, ks, st, pool = r.unpack("<IIIB")
        conv.append(ConvLayer(oc, ks, st, bool(pool)))
    (n_fc,) = r.unpack("<I")
    fc = [r.unpack("<I")[0] for _ in range(n_fc)]
    (n_names,) = r.unpack("<I")
    names = []
    for _ in range(n_names):
        (ln,) = r.unpack("<H")
        try:
            names.append(bytes(r.take(ln)).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise ShapeMismatchError(f"class name is not valid utf-8: {exc}") from None
    mean, std = r.unpack("<dd")
    (n_values,) = r.unpack("<Q")
    try:
        cfg = ModelConfig(cin, h, w, k, tuple(conv), tuple(fc), seed, _MODES[mode_idx], thresh, tuple(names))
    except ValueError as exc:
        raise ShapeMismatchError(f"inconsistent model configuration: {exc}") from None
    shapes = cfg.param_shapes()
    expected = sum(int(np.prod(s)) for s in shapes)
    if n_values != expected:
        raise ShapeMismatchError(f"checkpoint declares {n_values} values, configuration needs {expected}")
    flat = np.frombuffer(r.take(8 * expected), dtype="<f8").astype(np.float64)
    if r.pos != len(r.data):
        raise ShapeMismatchError(f"{len(r.data) - r.pos} trailing bytes after the weights")
    tensors = []
    pos = 0
    for s in shapes:
        size = int(np.prod(s))
        tensors.append(flat[pos:pos + size].reshape(s).copy())
        pos += size
    params = ModelParams(cfg, tensors, mean, std)
    try:
        params.check()
    except ValueError as exc:
        raise ShapeMismatchError(str(exc)) from None
    return params

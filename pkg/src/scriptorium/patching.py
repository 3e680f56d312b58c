"""Patch scanning: resize a line to the network height, then crop it left to right."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .imaging import BACKGROUND, check_raster, write_png

STD_FLOOR = 1e-6


@dataclass(frozen=True)
class PatchSpec:
    target_height: int
    target_width: int

    def __post_init__(self):
        if self.target_height < 8 or self.target_width < 8:
            raise ValueError(f"patch dimensions must be >= 8, got {self.target_height}x{self.target_width}")

    @classmethod
    def parse(cls, text: str) -> "PatchSpec":
        """Parse ``"HxW"`` (e.g. ``"227x227"``)."""
        h, _, w = text.lower().partition("x")
        return cls(int(h), int(w or h))

    def __str__(self):
        return f"{self.target_height}x{self.target_width}"


@dataclass
class Patch:
    values: np.ndarray  # (H, W) or (H, W, C)
    line_id: str
    x: int


def resize_to_height(img: np.ndarray, target_height: int) -> np.ndarray:
    """Bilinear resize to ``target_height`` keeping the aspect ratio."""
    img = check_raster(img)
    height, width = img.shape[:2]
    new_width = max(1, math.floor(width * target_height / height + 0.5))
    if (height, width) == (target_height, new_width):
        return img
    resized = Image.fromarray(img).resize((new_width, target_height), Image.Resampling.BILINEAR)
    return np.asarray(resized, dtype=np.uint8)


def patch_offsets(width: int, patch_width: int) -> list[int]:
    """Left x-offsets of the windows covering a line of ``width`` pixels."""
    if width <= patch_width:
        return [0]
    offsets = list(range(0, width - patch_width + 1, patch_width))
    if width % patch_width:
        offsets.append(width - patch_width)
    return offsets


def extract_patches(img: np.ndarray, spec: PatchSpec, line_id: str = "") -> list[Patch]:
    """Non-overlapping windows plus one end-anchored window for the remainder.

    Lines narrower than one window are right-padded with background.
    """
    img = check_raster(img)
    height, width = img.shape[:2]
    if height != spec.target_height:
        raise ValueError(f"line height {height} != patch height {spec.target_height}; resize first")
    w = spec.target_width
    if width < w:
        pad = [(0, 0), (0, w - width)] + [(0, 0)] * (img.ndim - 2)
        return [Patch(np.pad(img, pad, constant_values=BACKGROUND), line_id, 0)]
    return [Patch(img[:, x:x + w].copy(), line_id, x) for x in patch_offsets(width, w)]


def line_patch_array(img: np.ndarray, spec: PatchSpec) -> np.ndarray:
    """Resize + extract as one ``(N, C, H, W)`` uint8 array, ready for batching."""
    line = resize_to_height(img, spec.target_height)
    patches = extract_patches(line, spec)
    arr = np.stack([p.values for p in patches])
    if arr.ndim == 3:
        return arr[:, None, :, :]
    return np.ascontiguousarray(arr.transpose(0, 3, 1, 2))


def normalize(values: np.ndarray, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
    """Scale raw intensities to [0, 1] and standardize with dataset constants."""
    scaled = np.asarray(values, dtype=np.float64) / 255.0
    return (scaled - mean) / max(std, STD_FLOOR)


def dump_patches(patches: list[Patch], out_dir: str | Path) -> list[Path]:
    """Write patches as ``<lineid>_<index>_<xoffset>.png`` for inspection."""
    out_dir = Path(out_dir)
    paths = []
    for i, p in enumerate(patches):
        path = out_dir / f"{p.line_id}_{i}_{p.x}.png"
        write_png(p.values, path)
        paths.append(path)
    return paths


def expected_patch_count(width: int, patch_width: int) -> int:
    return max(1, math.ceil(width / patch_width))

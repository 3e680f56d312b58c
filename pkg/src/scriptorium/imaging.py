"""Line-image ingestion and preprocessing.

Raster images are plain ``uint8`` numpy arrays: ``(H, W)`` for grayscale and
``(H, W, 3)`` for RGB.
"""
from __future__ import annotations

import enum
from pathlib import Path

import numpy as np
from PIL import Image

INK_THRESHOLD = 135
MIN_ASPECT_RATIO = 5.0
BACKGROUND = 255

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


class PreprocessMode(str, enum.Enum):
    RGB = "RGB"
    GS = "GS"
    GS_MASK = "GS_MASK"

    @property
    def channels(self) -> int:
        return 3 if self is PreprocessMode.RGB else 1


def check_raster(img: np.ndarray) -> np.ndarray:
    """Validate a raster image and return it as ``uint8``."""
    img = np.asarray(img)
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] not in (1, 3)):
        raise ValueError(f"expected (H, W) or (H, W, 3) raster, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"empty raster {img.shape}")
    if img.dtype != np.uint8:
        if np.any(img < 0) or np.any(img > 255):
            raise ValueError("intensities must lie in [0, 255]")
        img = img.astype(np.uint8)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    return img


def is_informative(img: np.ndarray) -> bool:
    """True for wide line images; ``width / height <= 5`` marks a snippet to skip."""
    height, width = np.shape(img)[:2]
    return width / height > MIN_ASPECT_RATIO


def to_grayscale(img: np.ndarray) -> np.ndarray:
    img = check_raster(img)
    if img.ndim != 3:
        raise ValueError("to_grayscale needs a 3-channel image; input is already grayscale")
    gray = np.rint(img.astype(np.float64) @ _LUMA)
    return np.clip(gray, 0, 255).astype(np.uint8)


def mask(img: np.ndarray, threshold: int = INK_THRESHOLD) -> np.ndarray:
    """Keep ink (intensity <= threshold) as is and paint parchment white.

    The result is still a grayscale image, not a binarization.
    """
    img = check_raster(img)
    if img.ndim != 2:
        raise ValueError("mask needs a single-channel image")
    return np.where(img <= threshold, img, np.uint8(BACKGROUND)).astype(np.uint8)


def preprocess(img: np.ndarray, mode: PreprocessMode | str, threshold: int = INK_THRESHOLD) -> np.ndarray:
    mode = PreprocessMode(mode)
    img = check_raster(img)
    if img.ndim != 3:
        raise ValueError("preprocess expects an RGB line image")
    if mode is PreprocessMode.RGB:
        return img
    gray = to_grayscale(img)
    if mode is PreprocessMode.GS:
        return gray
    return mask(gray, threshold)


def read_image(path: str | Path) -> np.ndarray:
    """Read a PNG/JPEG line image as RGB ``uint8``."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_png(img: np.ndarray, path: str | Path) -> None:
    """Write an image as PNG; grayscale rasters are stored as 8-bit ``L``."""
    img = check_raster(img)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img, mode="L" if img.ndim == 2 else "RGB").save(path, format="PNG")

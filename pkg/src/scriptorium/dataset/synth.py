"""Procedural pseudo-manuscripts for desk-scale experiments.

Scribes differ only in how they write (stroke width, slant, spacing, letter
size) over a shared pseudo-alphabet. Codices differ only in nuisance: the
parchment tint, its noise level, the ink colour and the left margin. Every
codex belongs to one scribe, so in the training codices the tint is a
perfect (and spurious) class cue.
"""
from __future__ import annotations

import json
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from ..imaging import INK_THRESHOLD, to_grayscale
from .manifest import LineRecord, write_manifest

ALPHABET_SIZE = 16
MIN_PARCHMENT_GRAY = 165
MAX_INK_GRAY = 100
NOISE_CLIP = 20
INK_NOISE_CLIP = 12


@dataclass(frozen=True)
class ScribeStyle:
    stroke_width: int
    slant: float  # horizontal shear per pixel above the baseline
    spacing: int  # gap between letters, px
    x_height: int  # letter body height, px


@dataclass(frozen=True)
class CodexLook:
    tint: tuple[int, int, int]
    ink: tuple[int, int, int]
    noise: float
    margin: int


@dataclass
class SynthConfig:
    num_classes: int = 7
    codices_per_class: int = 3
    lines_per_codex: int = 60
    lines_per_page: int = 10
    line_height: int = 40
    line_width: tuple[int, int] = (280, 360)
    margin_range: tuple[int, int] = (0, 40)
    noise_range: tuple[float, float] = (2.0, 8.0)
    styles: tuple[ScribeStyle, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.codices_per_class < 2:
            raise ValueError("need >= 2 codices per class so a codex-disjoint test set exists")
        if self.lines_per_codex < 1 or self.lines_per_page < 1:
            raise ValueError("line counts must be positive")
        if self.styles is not None and len(self.styles) != self.num_classes:
            raise ValueError("one style per class required")

    @property
    def num_lines(self) -> int:
        return self.num_classes * self.codices_per_class * self.lines_per_codex

    def to_dict(self) -> dict:
        return asdict(self)


def _stream(seed: int, *key) -> np.random.Generator:
    words = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key]
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=words))


def make_alphabet(seed: int) -> list[list[np.ndarray]]:
    """Shared pseudo-letters: each is 1-3 polylines in the unit box (y up)."""
    rng = _stream(seed, "alphabet")
    letters = []
    for _ in range(ALPHABET_SIZE):
        strokes = []
        for _ in range(rng.integers(1, 4)):
            n = rng.integers(2, 5)
            pts = rng.uniform(0.0, 1.0, size=(n, 2))
            if rng.random() < 0.25:  # ascender
                pts[rng.integers(n), 1] = 1.6
            strokes.append(pts)
        letters.append(strokes)
    return letters


def make_styles(num_classes: int, seed: int) -> tuple[ScribeStyle, ...]:
    """Distinct styles from a small grid; any two differ in >= 2 attributes."""
    widths, slants, spacings, heights = (1, 2, 3), (-0.4, 0.0, 0.4), (1, 5, 10), (11, 15, 19)
    grid = [(a, b, c, d) for a in range(3) for b in range(3) for c in range(3) for d in range(3)]
    rng = _stream(seed, "styles")
    picked: list[tuple[int, ...]] = []
    for i in rng.permutation(len(grid)):
        cand = grid[i]
        if all(sum(x != y for x, y in zip(cand, p)) >= 2 for p in picked):
            picked.append(cand)
        if len(picked) == num_classes:
            break
    if len(picked) < num_classes:
        raise ValueError(f"cannot build {num_classes} distinct styles")
    return tuple(ScribeStyle(widths[a], slants[b], spacings[c], heights[d]) for a, b, c, d in picked)


def codex_look(cfg: SynthConfig, codex: str) -> CodexLook:
    """Nuisance appearance of a codex, drawn from a stream keyed only by codex id."""
    rng = _stream(cfg.seed, "tint", codex)
    while True:
        lightness = rng.uniform(185, 235)
        sat = rng.uniform(10, 45)
        hue = rng.uniform(0, 2 * np.pi)
        phases = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
        tint = np.clip(np.rint(lightness + sat * np.cos(hue - phases)), 0, 255).astype(int)
        if to_grayscale(tint.reshape(1, 1, 3).astype(np.uint8))[0, 0] >= MIN_PARCHMENT_GRAY:
            break
    while True:
        ink = rng.integers(10, 90, size=3)
        if to_grayscale(ink.reshape(1, 1, 3).astype(np.uint8))[0, 0] <= MAX_INK_GRAY - INK_NOISE_CLIP:
            break
    noise = rng.uniform(*cfg.noise_range)
    margin = int(rng.integers(cfg.margin_range[0], cfg.margin_range[1] + 1))
    return CodexLook(tuple(int(v) for v in tint), tuple(int(v) for v in ink), float(noise), margin)


def render_line(style: ScribeStyle, look: CodexLook, alphabet, rng: np.random.Generator,
                height: int = 40, width: int = 320) -> tuple[np.ndarray, np.ndarray]:
    """Render one RGB line; also returns the boolean ink mask."""
    canvas = Image.new("L", (width, height), 0)
    draw = ImageDraw.Draw(canvas)
    baseline = height * 0.68 + rng.uniform(-2, 2)
    x = float(look.margin) + rng.uniform(0, 4)
    while True:
        letter = alphabet[rng.integers(len(alphabet))]
        lw = style.x_height * rng.uniform(0.55, 0.9)
        if x + lw + 2 * style.stroke_width > width:
            break
        for stroke in letter:
            jitter = rng.normal(0, 0.04, size=stroke.shape)
            pts = stroke + jitter
            ys = baseline - pts[:, 1] * style.x_height
            xs = x + pts[:, 0] * lw + style.slant * (baseline - ys)
            draw.line(list(zip(xs.tolist(), ys.tolist())), fill=255, width=style.stroke_width)
        x += lw + style.spacing + rng.uniform(0, 2)
        if rng.random() < 0.15:  # word gap
            x += style.x_height * 0.6
    ink = np.asarray(canvas) > 0

    bg_noise = np.clip(rng.normal(0, look.noise, size=(height, width, 1)), -NOISE_CLIP, NOISE_CLIP)
    bg = np.asarray(look.tint, dtype=np.float64) + bg_noise
    ink_noise = np.clip(rng.normal(0, 4, size=(height, width, 1)), -INK_NOISE_CLIP, INK_NOISE_CLIP)
    fg = np.asarray(look.ink, dtype=np.float64) + ink_noise
    rgb = np.where(ink[..., None], fg, bg)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8), ink


def codex_ids(cfg: SynthConfig) -> list[tuple[str, int]]:
    """(codex id, class index) for every codex."""
    return [(f"C{c * cfg.codices_per_class + j:03d}", c)
            for c in range(cfg.num_classes) for j in range(cfg.codices_per_class)]


def class_names(cfg: SynthConfig) -> list[str]:
    return [f"S{c:02d}" for c in range(cfg.num_classes)]


def _render_codex(cfg: SynthConfig, codex: str, cls: int, style: ScribeStyle, alphabet, out_dir: Path):
    look = codex_look(cfg, codex)
    rng = _stream(cfg.seed, "lines", codex)
    scribe = class_names(cfg)[cls]
    records = []
    for i in range(cfg.lines_per_codex):
        page = f"p{i // cfg.lines_per_page:03d}"
        line_id = f"{codex}-{page}-l{i % cfg.lines_per_page:02d}"
        width = int(rng.integers(cfg.line_width[0], cfg.line_width[1] + 1))
        rgb, _ = render_line(style, look, alphabet, rng, cfg.line_height, width)
        path = out_dir / codex / page / f"{line_id}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(rgb, "RGB").save(path, format="PNG")
        records.append(LineRecord(line_id, path.relative_to(out_dir), scribe, codex, page))
    return records


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SCRIPTORIUM_THREADS", "1")))
    except ValueError:
        return 1


def generate_synthetic(cfg: SynthConfig, out_dir: str | Path) -> Path:
    """Render the corpus to ``out_dir/<codex>/<page>/<line_id>.png`` and write ``manifest.csv``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir} is not writable")
    styles = cfg.styles or make_styles(cfg.num_classes, cfg.seed)
    alphabet = make_alphabet(cfg.seed)
    jobs = codex_ids(cfg)
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        parts = pool.map(lambda job: _render_codex(cfg, job[0], job[1], styles[job[1]], alphabet, out_dir), jobs)
        records = [r for part in parts for r in part]
    manifest = out_dir / "manifest.csv"
    write_manifest(records, manifest)
    meta = {"config": cfg.to_dict(), "styles": [asdict(s) for s in styles],
            "classes": class_names(cfg), "ink_threshold": INK_THRESHOLD}
    (out_dir / "synth.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return manifest

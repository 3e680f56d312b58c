"""Glue between manifests, preprocessing, patching, training and evaluation."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import partial

import numpy as np

from .classifier import ModelConfig, ModelParams, TrainConfig, predict_proba, train
from .classifier.config import ConvLayer
from .dataset import LineRecord, SplitManifest
from .evaluation import LineSample, evaluate_multilevel
from .imaging import INK_THRESHOLD, PreprocessMode, is_informative, preprocess, read_image
from .patching import PatchSpec, line_patch_array

log = logging.getLogger(__name__)

DEFAULT_PATCH = PatchSpec(32, 32)


def line_patches(img: np.ndarray, mode: PreprocessMode | str, spec: PatchSpec,
                 threshold: int = INK_THRESHOLD) -> np.ndarray | None:
    """Raw ``(N, C, H, W)`` uint8 patches of one RGB line, or None for an uninformative snippet."""
    if not is_informative(img):
        return None
    return line_patch_array(preprocess(img, mode, threshold), spec)


def load_line_samples(records: list[LineRecord], class_index: dict[str, int], mode, spec: PatchSpec,
                      threshold: int = INK_THRESHOLD) -> tuple[list[LineSample], int]:
    """Labeled line samples in record order; returns ``(samples, skipped)``."""
    samples, skipped = [], 0
    for r in records:
        patches = line_patches(read_image(r.image_path), mode, spec, threshold)
        if patches is None:
            skipped += 1
            continue
        samples.append(LineSample(r.line_id, class_index[r.scribe], patches, r.page_key))
    if skipped:
        log.info("skipped %d uninformative lines", skipped)
    return samples, skipped


def stack_samples(samples: list[LineSample], channels: int, spec: PatchSpec) -> tuple[np.ndarray, np.ndarray]:
    if not samples:
        return np.zeros((0, channels, spec.target_height, spec.target_width), np.uint8), np.zeros(0, np.intp)
    x = np.concatenate([s.patches for s in samples])
    y = np.concatenate([np.full(len(s.patches), s.label, dtype=np.intp) for s in samples])
    return x, y


def default_model_config(mode, spec: PatchSpec, class_names, seed: int = 0) -> ModelConfig:
    """Three conv blocks (ReLU + 2x2 max-pool) and two dense layers, sized for ``spec``."""
    mode = PreprocessMode(mode)
    return ModelConfig(
        input_channels=mode.channels,
        input_height=spec.target_height,
        input_width=spec.target_width,
        num_classes=len(class_names),
        conv_layers=(ConvLayer(8), ConvLayer(16), ConvLayer(16)),
        fc_layers=(32,),
        seed=seed,
        mode=mode,
        class_names=tuple(class_names),
    )


@dataclass
class Experiment:
    """Records of one corpus plus its split, with per-mode sample caching."""

    records: list[LineRecord]
    split: SplitManifest
    spec: PatchSpec = DEFAULT_PATCH

    def __post_init__(self):
        self.by_id = {r.line_id: r for r in self.records}
        self.class_index = {c: i for i, c in enumerate(self.split.classes)}
        self._cache: dict = {}

    def samples(self, partition: str, mode) -> list[LineSample]:
        key = (partition, PreprocessMode(mode))
        if key not in self._cache:
            recs = [self.by_id[lid] for lid in self.split.partition(partition)]
            self._cache[key], _ = load_line_samples(recs, self.class_index, mode, self.spec)
        return self._cache[key]

    def train(self, mode, tcfg: TrainConfig, model_seed: int = 0, backend=None):
        mode = PreprocessMode(mode)
        cfg = default_model_config(mode, self.spec, self.split.classes, model_seed)
        tx, ty = stack_samples(self.samples("train", mode), mode.channels, self.spec)
        vx, vy = stack_samples(self.samples("validation", mode), mode.channels, self.spec)
        return train(cfg, tcfg, tx, ty, vx, vy, backend=backend)

    def evaluate(self, params: ModelParams, partition: str, threshold=0.40, class_thresholds=None):
        samples = self.samples(partition, params.config.mode)
        return evaluate_multilevel(
            partial(predict_proba, params), samples, params.config.num_classes,
            threshold, class_thresholds, class_names=list(params.config.class_names),
        )

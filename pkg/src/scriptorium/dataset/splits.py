"""Codex-disjoint train/validation/test_A/test_B splitting."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .manifest import LineRecord

PARTITIONS = ("train", "validation", "test_A", "test_B")
RATIOS = (0.6, 0.2, 0.2)


class SplitError(ValueError):
    pass


@dataclass
class SplitManifest:
    classes: list[str]
    training_codices: list[str]
    separate_codices: list[str]
    train: list[str] = field(default_factory=list)
    validation: list[str] = field(default_factory=list)
    test_A: list[str] = field(default_factory=list)
    test_B: list[str] = field(default_factory=list)
    seed: int = 0

    def partition(self, name: str) -> list[str]:
        if name not in PARTITIONS:
            raise KeyError(name)
        return getattr(self, name)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "SplitManifest":
        return cls(**json.loads(Path(path).read_text()))


def _quotas(available: list[int], cap: int) -> list[int]:
    """Deal ``cap`` draws round-robin in codex order, skipping exhausted codices."""
    quota = [0] * len(available)
    remaining = min(cap, sum(available))
    while remaining:
        for i in range(len(available)):
            if remaining and quota[i] < available[i]:
                quota[i] += 1
                remaining -= 1
    return quota


def _interleave(groups: list[list[str]]) -> list[str]:
    out = []
    for i in range(max((len(g) for g in groups), default=0)):
        out.extend(g[i] for g in groups if i < len(g))
    return out


def make_splits(records: list[LineRecord], separate_codices, per_class_line_cap: int | None = None,
                seed: int = 0, test_b_cap: int | None = None) -> SplitManifest:
    """Split lines so that separate codices only ever feed test_B.

    Per class, up to ``per_class_line_cap`` lines are drawn uniformly across
    that class's training codices and cut 60/20/20 into train, validation
    and test_A. Lines of separate codices (up to ``test_b_cap`` per class)
    form test_B.
    """
    separate = set(separate_codices)
    rng = np.random.default_rng(seed)
    by_class: dict[str, dict[str, list[str]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        by_class[r.scribe][r.codex].append(r.line_id)
    classes = sorted(by_class)
    for scribe in classes:
        codices = by_class[scribe]
        if not any(c in separate for c in codices):
            raise SplitError(f"class {scribe!r} has no separate codex; cross-codex evaluation impossible")
        if all(c in separate for c in codices):
            raise SplitError(f"class {scribe!r} has no training codex")

    split = SplitManifest(
        classes=classes,
        training_codices=sorted({r.codex for r in records} - separate),
        separate_codices=sorted(separate & {r.codex for r in records}),
        seed=seed,
    )
    for scribe in classes:
        codices = by_class[scribe]
        train_codices = sorted(c for c in codices if c not in separate)
        pools = [sorted(codices[c]) for c in train_codices]
        cap = sum(map(len, pools)) if per_class_line_cap is None else per_class_line_cap
        quota = _quotas([len(p) for p in pools], cap)
        drawn = [[p[i] for i in rng.permutation(len(p))[:q]] for p, q in zip(pools, quota)]
        chosen = _interleave(drawn)
        n = len(chosen)
        n_train = int(np.floor(RATIOS[0] * n + 0.5))
        n_val = int(np.floor(RATIOS[1] * n + 0.5))
        split.train += chosen[:n_train]
        split.validation += chosen[n_train:n_train + n_val]
        split.test_A += chosen[n_train + n_val:]

        held = sorted(lid for c in sorted(codices) if c in separate for lid in codices[c])
        if test_b_cap is not None and len(held) > test_b_cap:
            held = [held[i] for i in sorted(rng.permutation(len(held))[:test_b_cap])]
        split.test_B += held
    return split


def choose_separate_codices(records: list[LineRecord], seed: int = 0) -> set[str]:
    """Pick one held-out codex per class at random, never a class's only codex."""
    rng = np.random.default_rng(seed)
    by_class: dict[str, set[str]] = defaultdict(set)
    for r in records:
        by_class[r.scribe].add(r.codex)
    chosen: set[str] = set()
    for scribe in sorted(by_class):
        codices = sorted(by_class[scribe])
        if any(c in chosen for c in codices) or len(codices) < 2:
            continue
        chosen.add(codices[int(rng.integers(len(codices)))])
    return chosen

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

COLUMNS = ("line_id", "image_path", "scribe", "codex", "page")


class ManifestError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass(frozen=True)
class LineRecord:
    line_id: str
    image_path: Path
    scribe: str
    codex: str
    page: str = ""

    @property
    def page_key(self) -> str | None:
        return f"{self.codex}/{self.page}" if self.page else None


def load_manifest(path: str | Path, check_images: bool = True) -> list[LineRecord]:
    """Read a ``line_id,image_path,scribe,codex,page`` CSV.

    Image paths are resolved relative to the manifest's directory. All row
    problems are collected and raised together.
    """
    path = Path(path)
    root = path.parent
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ManifestError([f"missing columns: {', '.join(missing)}"])
        records = []
        problems = []
        seen: dict[str, int] = {}
        for rowno, row in enumerate(reader, start=2):
            line_id = (row["line_id"] or "").strip()
            if not line_id:
                problems.append(f"row {rowno}: empty line_id")
                continue
            if line_id in seen:
                problems.append(f"row {rowno}: duplicate line_id {line_id!r} (first seen in row {seen[line_id]})")
                continue
            seen[line_id] = rowno
            scribe, codex = (row["scribe"] or "").strip(), (row["codex"] or "").strip()
            if not scribe or not codex:
                problems.append(f"row {rowno}: line {line_id!r} lacks scribe or codex")
                continue
            image = root / row["image_path"]
            if check_images and not image.is_file():
                problems.append(f"row {rowno}: unreadable image {row['image_path']!r}")
                continue
            records.append(LineRecord(line_id, image, scribe, codex, (row["page"] or "").strip()))
    if problems:
        raise ManifestError(problems)
    return records


def write_manifest(records, path: str | Path) -> None:
    path = Path(path)
    root = path.parent.resolve()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in records:
            image = Path(r.image_path)
            if image.is_absolute():
                image = image.resolve().relative_to(root)
            writer.writerow([r.line_id, image.as_posix(), r.scribe, r.codex, r.page])

"""Dataset manifest: one JSON object per line, plus sample loading."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError
from .formats import read_image_png, read_mask_png
from .grid import StructureMasks
from .qr.scene import SampleRecord

MANIFEST_NAME = "manifest.jsonl"


@dataclass
class ManifestEntry:
    id: str
    label: int
    image_path: str
    finder_mask_path: str | None
    timing_mask_path: str | None
    box_mask_path: str | None
    split: str
    provenance: dict

    def to_json(self) -> str:
        return json.dumps({
            "id": self.id, "label": self.label,
            "image_path": self.image_path,
            "finder_mask_path": self.finder_mask_path,
            "timing_mask_path": self.timing_mask_path,
            "box_mask_path": self.box_mask_path,
            "split": self.split,
            "provenance": self.provenance,
        }, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "ManifestEntry":
        try:
            obj = json.loads(line)
            return cls(id=obj["id"], label=obj["label"],
                       image_path=obj["image_path"],
                       finder_mask_path=obj.get("finder_mask_path"),
                       timing_mask_path=obj.get("timing_mask_path"),
                       box_mask_path=obj.get("box_mask_path"),
                       split=obj.get("split", ""),
                       provenance=obj.get("provenance", {}))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"bad manifest line: {exc}") from exc


def write_manifest(entries, path) -> None:
    text = "".join(entry.to_json() + "\n" for entry in entries)
    Path(path).write_text(text)


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            entries.append(ManifestEntry.from_json(line))
    return entries


def load_sample(entry: ManifestEntry, root) -> SampleRecord:
    """Materialize a SampleRecord from manifest paths (relative to root).

    Negatives carry no mask files; they load as all-zero masks.
    """
    root = Path(root)
    image = read_image_png(root / entry.image_path)
    h, w = image.shape
    if entry.label == 1:
        if not (entry.finder_mask_path and entry.timing_mask_path
                and entry.box_mask_path):
            raise FormatError(f"positive sample {entry.id} lacks mask paths")
        masks = StructureMasks(
            finder=read_mask_png(root / entry.finder_mask_path),
            timing=read_mask_png(root / entry.timing_mask_path),
            box=read_mask_png(root / entry.box_mask_path),
        )
    else:
        masks = StructureMasks.zeros(h, w)
    fill = entry.provenance.get("fill_level", float(image.mean()))
    return SampleRecord(sample_id=entry.id, image=image, masks=masks,
                        label=entry.label, fill_level=fill,
                        provenance=entry.provenance)

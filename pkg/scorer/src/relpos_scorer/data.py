"""Dataset plumbing: read fragment manifests, sample training pairs.

The on-disk layout is the fragmenter's external interface: one directory per
source image holding nine 96x96 PNGs plus manifest.json with entries
{id, ground_truth: "C"|0..7, file, ...}.  This module reads that format
directly; it does not import the solver package.

Pair sampling:
* 8-class - (central, true neighbor), label = the neighbor's slot 0..7.
* 9-class - like 8-class with probability `in_image_fraction`, otherwise the
  partner comes from a different image and the label is 8.
* 2-class - partner from the same image with probability `same_fraction`
  (label 1), otherwise from another image (label 0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

MANIFEST_NAME = "manifest.json"
CENTRAL_MARK = "C"
OUTSIDER_CLASS = 8


@dataclass
class PuzzleFragments:
    """One source image: the central raster plus the 8 neighbors by slot."""

    source_id: str
    central: np.ndarray
    by_position: dict[int, np.ndarray]
    ids: dict[int | str, str]  # slot (or "C") -> fragment id


def read_manifest_dir(path) -> PuzzleFragments:
    path = Path(path)
    with open(path / MANIFEST_NAME) as fh:
        doc = json.load(fh)
    central = None
    by_position = {}
    ids = {}
    for entry in doc["fragments"]:
        raster = np.asarray(Image.open(path / entry["file"]).convert("RGB"))
        gt = entry["ground_truth"]
        if gt == CENTRAL_MARK:
            central = raster
            ids[CENTRAL_MARK] = entry["id"]
        else:
            by_position[int(gt)] = raster
            ids[int(gt)] = entry["id"]
    if central is None or sorted(by_position) != list(range(8)):
        raise ValueError(f"{path}: manifest does not describe a full 3x3 set")
    return PuzzleFragments(source_id=doc["source_id"], central=central,
                           by_position=by_position, ids=ids)


def load_dataset(root) -> list[PuzzleFragments]:
    root = Path(root)
    dirs = sorted(d for d in root.iterdir()
                  if d.is_dir() and (d / MANIFEST_NAME).is_file())
    if not dirs:
        raise ValueError(f"no fragment sets under {root}")
    return [read_manifest_dir(d) for d in dirs]


class PairSampler:
    """Deterministic (per seed) stream of labeled fragment pairs."""

    def __init__(self, puzzles: list[PuzzleFragments], classes: int,
                 seed: int = 0, in_image_fraction: float = 0.7,
                 same_fraction: float = 0.5):
        if classes not in (2, 8, 9):
            raise ValueError(f"classes must be 2, 8 or 9, got {classes}")
        if classes in (2, 9) and len(puzzles) < 2:
            raise ValueError("outsider sampling needs at least two images")
        self.puzzles = puzzles
        self.classes = classes
        self.in_image_fraction = in_image_fraction
        self.same_fraction = same_fraction
        self.rng = np.random.default_rng(seed)

    def _other_fragment(self, skip_index: int) -> np.ndarray:
        while True:
            k = int(self.rng.integers(len(self.puzzles)))
            if k != skip_index:
                break
        donor = self.puzzles[k]
        slot = int(self.rng.integers(9))
        return donor.central if slot == 8 else donor.by_position[slot]

    def sample(self, count: int):
        """-> (first uint8 (N,96,96,3), second uint8 (N,96,96,3), labels)."""
        a = np.empty((count, 96, 96, 3), dtype=np.uint8)
        b = np.empty_like(a)
        labels = np.empty(count, dtype=np.int64)
        for i in range(count):
            k = int(self.rng.integers(len(self.puzzles)))
            puz = self.puzzles[k]
            a[i] = puz.central
            if self.classes == 2:
                if self.rng.random() < self.same_fraction:
                    b[i] = puz.by_position[int(self.rng.integers(8))]
                    labels[i] = 1
                else:
                    b[i] = self._other_fragment(k)
                    labels[i] = 0
            elif self.classes == 9 and self.rng.random() >= self.in_image_fraction:
                b[i] = self._other_fragment(k)
                labels[i] = OUTSIDER_CLASS
            else:
                slot = int(self.rng.integers(8))
                b[i] = puz.by_position[slot]
                labels[i] = slot
        return a, b, labels

"""Turn a trained checkpoint plus a fragment manifest into a score file the
solver consumes.

known_central: p[i][j] is the softmax weight for (central, fragment i) at
slot j, rows following manifest order with the central excluded.
all_centrals: every fragment plays central in turn; slab c scores the
remaining fragments (manifest order, candidate removed), so p has shape
n x (n-1) x 8.  A 9-class checkpoint additionally emits the outsider column
as the "outsider" field.  2-class checkpoints cannot be exported (they rank
fragments, they do not place them).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .data import CENTRAL_MARK, read_manifest_dir
from .model import PairClassifier, preprocess
from .train import load_checkpoint

KNOWN_CENTRAL = "known_central"
ALL_CENTRALS = "all_centrals"
SCORE_FILE_VERSION = 1


@torch.no_grad()
def _pair_rows(model: PairClassifier, central: np.ndarray,
               others: list[np.ndarray]) -> np.ndarray:
    """Softmax rows for (central, other) pairs: shape (len(others), classes)."""
    x1 = preprocess(np.stack([central] * len(others)))
    x2 = preprocess(np.stack(others))
    return model.probabilities(x1, x2).numpy().astype(np.float64)


def score_manifest(model: PairClassifier, manifest_dir, variant: str) -> dict:
    if model.config.classes == 2:
        raise ValueError("2-class checkpoints rank fragments but cannot "
                         "place them; export needs an 8- or 9-class head")
    if variant not in (KNOWN_CENTRAL, ALL_CENTRALS):
        raise ValueError(f"unknown variant {variant!r}")
    puz = read_manifest_dir(manifest_dir)
    # manifest order: central first is not guaranteed; keep slot order 0..7
    slot_ids = [puz.ids[j] for j in range(8)]
    slot_rasters = [puz.by_position[j] for j in range(8)]

    if variant == KNOWN_CENTRAL:
        rows = _pair_rows(model, puz.central, slot_rasters)
        doc = {
            "version": SCORE_FILE_VERSION,
            "variant": variant,
            "fragments": slot_ids,
            "positions": 8,
            "p": rows[:, :8].tolist(),
        }
        if model.config.classes == 9:
            doc["outsider"] = rows[:, 8].tolist()
        return doc

    ids = [puz.ids[CENTRAL_MARK]] + slot_ids
    rasters = [puz.central] + slot_rasters
    n = len(ids)
    p = np.zeros((n, n - 1, 8))
    outsider = np.zeros((n, n - 1))
    for c in range(n):
        others = [rasters[i] for i in range(n) if i != c]
        rows = _pair_rows(model, rasters[c], others)
        p[c] = rows[:, :8]
        if model.config.classes == 9:
            outsider[c] = rows[:, 8]
    doc = {
        "version": SCORE_FILE_VERSION,
        "variant": variant,
        "fragments": ids,
        "positions": 8,
        "p": p.tolist(),
    }
    if model.config.classes == 9:
        doc["outsider"] = outsider.tolist()
    return doc


def export_scores(checkpoint_path, manifest_dir, variant: str, out_path) -> Path:
    model = load_checkpoint(checkpoint_path)
    doc = score_manifest(model, manifest_dir, variant)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    return out_path

"""Cut source images into ground-truthed 96x96 fragments and render results.

Layout arithmetic: 3*96 + 2*48 + 2*7 = 398, so on a 398x398 crop the nominal
top-left corner of grid cell (r, c) is (x, y) = (7 + 144*c, 7 + 144*r) and a
+-7px jitter never leaves the cell or bites into the 48px erosion margin of a
neighbor (anchor - 7 >= 144k and anchor + 96 + 7 <= 144k + 110).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import (
    DataError,
    PuzzleInstance,
    PuzzleSpec,
    PuzzleTruth,
    Reassembly,
    cell_to_position,
    position_to_cell,
)

IMAGE_SIZE = 398
FRAGMENT_SIZE = 96
MARGIN = 48
JITTER = 7
CELL_STEP = FRAGMENT_SIZE + MARGIN
ANCHOR0 = JITTER

MANIFEST_NAME = "manifest.json"
CENTRAL_MARK = "C"

FILL_COLOR = (90, 90, 90)
OUTLINE_COLOR = (220, 30, 30)
OUTLINE_WIDTH = 3


@dataclass(frozen=True)
class Fragment:
    id: str
    raster: np.ndarray
    ground_truth: int | None  # relative position, None for the central
    anchor: tuple[int, int]  # nominal top-left (x, y) on the 398 canvas
    jitter: tuple[int, int]

    def __post_init__(self):
        r = np.asarray(self.raster)
        if r.shape != (FRAGMENT_SIZE, FRAGMENT_SIZE, 3):
            raise DataError(f"fragment raster must be 96x96x3, got {r.shape}")
        if abs(self.jitter[0]) > JITTER or abs(self.jitter[1]) > JITTER:
            raise DataError(f"jitter out of +-{JITTER}: {self.jitter}")


@dataclass(frozen=True)
class FragmentSet:
    source_id: str
    fragments: tuple[Fragment, ...]
    image_size: int = IMAGE_SIZE

    def __post_init__(self):
        if len(self.fragments) != 9:
            raise DataError(f"expected 9 fragments, got {len(self.fragments)}")

    @property
    def central(self) -> Fragment:
        return next(f for f in self.fragments if f.ground_truth is None)

    def by_id(self) -> dict[str, np.ndarray]:
        return {f.id: f.raster for f in self.fragments}

    def truth(self) -> PuzzleTruth:
        return PuzzleTruth(
            source_id=self.source_id,
            central_id=self.central.id,
            positions={f.id: f.ground_truth for f in self.fragments
                       if f.ground_truth is not None},
        )


def _to_rgb_array(image) -> np.ndarray:
    if isinstance(image, np.ndarray):
        if image.ndim != 3 or image.shape[2] != 3:
            raise DataError(f"expected an HxWx3 array, got shape {image.shape}")
        return image.astype(np.uint8, copy=False)
    return np.asarray(image.convert("RGB"))


def _center_crop_398(image) -> np.ndarray:
    """Resize so the short side is 398 (bilinear), then center-crop."""
    arr = _to_rgb_array(image)
    h, w = arr.shape[:2]
    if min(h, w) < FRAGMENT_SIZE:
        raise DataError(f"image too small ({w}x{h}); need at least "
                        f"{FRAGMENT_SIZE}px on the short side")
    if (h, w) != (IMAGE_SIZE, IMAGE_SIZE):
        scale = IMAGE_SIZE / min(h, w)
        nh, nw = max(IMAGE_SIZE, round(h * scale)), max(IMAGE_SIZE, round(w * scale))
        arr = np.asarray(Image.fromarray(arr).resize((nw, nh), Image.BILINEAR))
        top, left = (nh - IMAGE_SIZE) // 2, (nw - IMAGE_SIZE) // 2
        arr = arr[top:top + IMAGE_SIZE, left:left + IMAGE_SIZE]
    return arr


def fragment_image(image, source_id: str, jitter_enabled: bool = False,
                   rng_seed: int = 0) -> FragmentSet:
    """Cut one image into its 9 ground-truthed fragments.

    Deterministic given (image, rng_seed).  Jitter offsets are drawn per
    fragment in row-major cell order, uniformly over [-7, +7]^2, whether or
    not they end up applied, so enabling jitter never reshuffles the draws of
    other fragments.
    """
    canvas = _center_crop_398(image)
    rng = np.random.default_rng(rng_seed)
    fragments = []
    for r in range(3):
        for c in range(3):
            dx, dy = (int(v) for v in rng.integers(-JITTER, JITTER + 1, 2))
            if not jitter_enabled:
                dx = dy = 0
            x = ANCHOR0 + CELL_STEP * c
            y = ANCHOR0 + CELL_STEP * r
            raster = canvas[y + dy:y + dy + FRAGMENT_SIZE,
                            x + dx:x + dx + FRAGMENT_SIZE]
            fragments.append(Fragment(
                id=f"{source_id}:r{r}c{c}",
                raster=np.ascontiguousarray(raster),
                ground_truth=cell_to_position(r, c),
                anchor=(x, y),
                jitter=(dx, dy),
            ))
    return FragmentSet(source_id=source_id, fragments=tuple(fragments))


def fragment_file(path, jitter_enabled: bool = False, rng_seed: int = 0,
                  source_id: str | None = None) -> FragmentSet:
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            return fragment_image(im, source_id or path.stem,
                                  jitter_enabled=jitter_enabled, rng_seed=rng_seed)
    except (UnidentifiedImageError, OSError) as e:
        raise DataError(f"cannot decode image {path}: {e}") from None


def write_fragment_set(fset: FragmentSet, out_dir) -> Path:
    """Persist a fragment set as 9 PNGs plus manifest.json; returns the
    manifest path.  Reruns with identical inputs are byte-identical."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for f in fset.fragments:
        mark = CENTRAL_MARK if f.ground_truth is None else f.ground_truth
        fname = f.id.split(":")[-1] + ".png"
        Image.fromarray(f.raster).save(out_dir / fname, format="PNG")
        entries.append({
            "id": f.id,
            "ground_truth": mark,
            "anchor": list(f.anchor),
            "jitter": list(f.jitter),
            "file": fname,
        })
    manifest = {
        "source_id": fset.source_id,
        "image_size": fset.image_size,
        "fragments": entries,
    }
    path = out_dir / MANIFEST_NAME
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_fragment_set(manifest_path) -> FragmentSet:
    """Load a fragment set written by write_fragment_set.  manifest_path may
    be the manifest file or its directory."""
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"no manifest at {path}") from None
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: not valid JSON ({e})") from None
    try:
        fragments = []
        for entry in doc["fragments"]:
            raster = np.asarray(Image.open(path.parent / entry["file"]).convert("RGB"))
            gt = entry["ground_truth"]
            fragments.append(Fragment(
                id=entry["id"],
                raster=raster,
                ground_truth=None if gt == CENTRAL_MARK else int(gt),
                anchor=tuple(entry["anchor"]),
                jitter=tuple(entry["jitter"]),
            ))
        return FragmentSet(source_id=doc["source_id"], fragments=tuple(fragments),
                           image_size=doc.get("image_size", IMAGE_SIZE))
    except (KeyError, TypeError, ValueError, OSError) as e:
        raise DataError(f"{path}: bad manifest ({e})") from None


def make_puzzle(target: FragmentSet, pool: list[FragmentSet] = (),
                central_known: bool = True, allow_empty: bool = False,
                n_drop: int = 0, n_outsiders: int = 0,
                rng_seed: int = 0) -> PuzzleInstance:
    """Assemble a solvable puzzle from fragment sets.

    n_drop in-image fragments are removed (never the central) and n_outsiders
    fragments are drawn from other images in the pool; both sampled with
    rng_seed.  Dropping or injecting implies empty positions are allowed.
    """
    rng = np.random.default_rng(rng_seed)
    placeable = [f for f in target.fragments if f.ground_truth is not None]
    if n_drop > len(placeable):
        raise DataError(f"cannot drop {n_drop} of {len(placeable)} fragments")
    if n_drop:
        dropped = set(rng.choice(len(placeable), size=n_drop, replace=False).tolist())
        placeable = [f for i, f in enumerate(placeable) if i not in dropped]
    donors = [f for s in pool if s.source_id != target.source_id
              for f in s.fragments]
    if n_outsiders > len(donors):
        raise DataError(f"need {n_outsiders} outsider fragment(s) but the pool "
                        f"only offers {len(donors)}")
    outsiders = []
    if n_outsiders:
        picks = rng.choice(len(donors), size=n_outsiders, replace=False)
        outsiders = [donors[i] for i in sorted(picks.tolist())]

    fragments = placeable + outsiders
    ids = [f.id for f in fragments]
    rasters = {f.id: f.raster for f in fragments}
    rasters[target.central.id] = target.central.raster
    if not central_known:
        ids = [target.central.id] + ids
    spec = PuzzleSpec(
        fragment_ids=tuple(ids),
        num_positions=8,
        central_known=central_known,
        allow_empty_positions=allow_empty or n_drop > 0 or n_outsiders > 0,
    )
    truth = PuzzleTruth(
        source_id=target.source_id,
        central_id=target.central.id,
        positions={f.id: f.ground_truth for f in placeable},
        outsiders=frozenset(f.id for f in outsiders),
    )
    return PuzzleInstance(spec=spec, truth=truth, rasters=rasters)


def render_reassembly(reassembly: Reassembly, rasters: dict[str, np.ndarray],
                      central_id: str | None = None,
                      truth: PuzzleTruth | None = None) -> np.ndarray:
    """Draw a reassembly on the 398x398 canvas at the nominal anchors.

    Empty positions stay fill-colored.  When truth is given, fragments whose
    placement differs from ground truth get a red outline (renderer for
    misplacement figures); outsiders placed anywhere count as misplaced.
    """
    canvas = np.empty((IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.uint8)
    canvas[:] = FILL_COLOR
    central = central_id or reassembly.central_fragment
    cells = [(None, central, (1, 1))]
    for pos, fid in reassembly.placements.items():
        cells.append((pos, fid, position_to_cell(pos)))
    for pos, fid, (r, c) in cells:
        if fid is None:
            continue
        if fid not in rasters:
            raise DataError(f"no raster for fragment {fid!r}")
        x = ANCHOR0 + CELL_STEP * c
        y = ANCHOR0 + CELL_STEP * r
        canvas[y:y + FRAGMENT_SIZE, x:x + FRAGMENT_SIZE] = rasters[fid]
        if truth is None:
            continue
        true_pos = truth.positions.get(fid)
        if pos is None:
            misplaced = fid != truth.central_id
        else:
            misplaced = true_pos != pos
        if misplaced:
            w = OUTLINE_WIDTH
            box = canvas[y:y + FRAGMENT_SIZE, x:x + FRAGMENT_SIZE]
            box[:w, :] = OUTLINE_COLOR
            box[-w:, :] = OUTLINE_COLOR
            box[:, :w] = OUTLINE_COLOR
            box[:, -w:] = OUTLINE_COLOR
    return canvas

"""Score tensor producers and score-file I/O.

Three built-in scorers cover testing and baseline needs without any neural
network: an oracle that reads ground truth, a noisy oracle for degradation
studies, and a content heuristic that compares boundary color statistics.
An external scorer plugs in through the JSON score-file format handled by
save_score_tensor / load_score_tensor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import (
    ALL_CENTRALS,
    KNOWN_CENTRAL,
    DataError,
    PuzzleInstance,
    PuzzleSpec,
    PuzzleTruth,
    ScoreTensor,
    position_to_cell,
)

SCORE_FILE_VERSION = 1

ORACLE = "oracle"
NOISY_ORACLE = "noisy_oracle"
CONTENT = "content"


@dataclass(frozen=True)
class ScorerConfig:
    kind: str = ORACLE
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (ORACLE, NOISY_ORACLE, CONTENT):
            raise ValueError(f"unknown scorer kind: {self.kind!r}")
        if self.noise_level < 0.0:
            raise ValueError("noise_level must be >= 0")


def score(instance: PuzzleInstance, config: ScorerConfig) -> ScoreTensor:
    """Dispatch to the configured scorer.  The tensor variant follows the
    puzzle spec: known central -> pairwise matrix, unknown -> per-central cube."""
    if config.kind == ORACLE:
        return oracle_score(instance)
    if config.kind == NOISY_ORACLE:
        return noisy_oracle_score(instance, config.noise_level, config.seed)
    return content_score(instance)


def _truth_matrix(spec: PuzzleSpec, truth: PuzzleTruth, ids: list[str]) -> np.ndarray:
    m = np.zeros((len(ids), spec.num_positions))
    for i, fid in enumerate(ids):
        pos = truth.positions.get(fid)
        if pos is not None:
            m[i, pos] = 1.0
    return m


def oracle_score(instance: PuzzleInstance) -> ScoreTensor:
    """Ground-truth scorer: p is one-hot on the true placement, outsiders get
    all-zero rows and outsider probability 1."""
    spec, truth = instance.spec, instance.truth
    ids = list(spec.fragment_ids)
    is_out = np.array([float(f in truth.outsiders) for f in ids])
    if spec.central_known:
        return ScoreTensor(KNOWN_CENTRAL, tuple(ids), spec.num_positions,
                           _truth_matrix(spec, truth, ids), outsider=is_out)
    n = len(ids)
    p = np.zeros((n, n - 1, spec.num_positions))
    outsider = np.zeros((n, n - 1))
    for c, cid in enumerate(ids):
        others = [f for f in ids if f != cid]
        if cid == truth.central_id:
            p[c] = _truth_matrix(spec, truth, others)
        outsider[c] = [float(f in truth.outsiders) for f in others]
    return ScoreTensor(ALL_CENTRALS, tuple(ids), spec.num_positions, p,
                       outsider=outsider)


def _rescale_rows(p: np.ndarray) -> np.ndarray:
    """Divide each row by max(1, row max): values land in [0,1] and anything
    already in range is left untouched (so zero noise is the identity)."""
    top = np.maximum(p.max(axis=-1, keepdims=True), 1.0)
    return p / top


def noisy_oracle_score(instance: PuzzleInstance, sigma: float, seed: int) -> ScoreTensor:
    """Oracle tensor with additive U(0, sigma) noise, rows rescaled back into
    [0,1].  sigma=0 reproduces oracle_score exactly; identical seeds give
    identical tensors.  Outsider probabilities get the same noise, clamped."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    base = oracle_score(instance)
    rng = np.random.default_rng(seed)
    p = _rescale_rows(base.p + rng.uniform(0.0, sigma, base.p.shape))
    outsider = None
    if base.outsider is not None:
        outsider = np.minimum(base.outsider + rng.uniform(0.0, sigma, base.outsider.shape), 1.0)
    return ScoreTensor(base.variant, base.fragment_ids, base.num_positions, p,
                       outsider=outsider)


# Width of the boundary strip used for color statistics.  The 48px erosion
# removed real edge continuations, so these are content statistics, not edge
# matching; 8px keeps the strip local to the facing side.
BAND = 8


def _band(raster: np.ndarray, side: tuple[int, int]) -> np.ndarray:
    """Pixels of the strip facing grid offset side=(dr, dc); corners give the
    BANDxBAND corner block."""
    dr, dc = side
    h, w = raster.shape[:2]
    rows = slice(0, BAND) if dr < 0 else slice(h - BAND, h) if dr > 0 else slice(0, h)
    cols = slice(0, BAND) if dc < 0 else slice(w - BAND, w) if dc > 0 else slice(0, w)
    return raster[rows, cols]


def _band_stats(raster: np.ndarray, side: tuple[int, int]) -> np.ndarray:
    px = _band(raster, side).reshape(-1, 3).astype(np.float64) / 255.0
    return np.concatenate([px.mean(axis=0), px.std(axis=0)])


def _content_rows(central: np.ndarray, others: list[np.ndarray],
                  num_positions: int) -> np.ndarray:
    from .core import POSITION_OFFSETS

    if num_positions != 8:
        raise DataError("content scorer needs the 8-neighbor geometry")
    central_stats = [_band_stats(central, POSITION_OFFSETS[j]) for j in range(8)]
    rows = np.zeros((len(others), 8))
    for i, raster in enumerate(others):
        for j in range(8):
            dr, dc = POSITION_OFFSETS[j]
            mine = _band_stats(raster, (-dr, -dc))
            d = float(np.linalg.norm(central_stats[j] - mine))
            rows[i, j] = 1.0 / (1.0 + d)
    top = rows.max(axis=1, keepdims=True)
    np.divide(rows, top, out=rows, where=top > 0)
    return rows


def content_score(instance: PuzzleInstance) -> ScoreTensor:
    """Heuristic scorer from boundary color statistics: fragment i scores high
    at position j when its side facing the central matches the central's side
    facing j (per-channel mean/std over an 8px strip).  Needs rasters but no
    ground truth beyond the known central id."""
    spec = instance.spec
    ids = list(spec.fragment_ids)
    try:
        rasters = {f: instance.rasters[f] for f in ids}
        if spec.central_known:
            central = instance.rasters[instance.known_central_id]
    except KeyError as e:
        raise DataError(f"no raster for fragment {e.args[0]!r}") from None
    if spec.central_known:
        rows = _content_rows(central, [rasters[f] for f in ids], spec.num_positions)
        return ScoreTensor(KNOWN_CENTRAL, tuple(ids), spec.num_positions, rows)
    n = len(ids)
    p = np.zeros((n, n - 1, spec.num_positions))
    for c, cid in enumerate(ids):
        others = [f for f in ids if f != cid]
        p[c] = _content_rows(rasters[cid], [rasters[f] for f in others],
                             spec.num_positions)
    return ScoreTensor(ALL_CENTRALS, tuple(ids), spec.num_positions, p)


def save_score_tensor(tensor: ScoreTensor, path) -> None:
    """Write a *.scores.json file.  Floats serialize at full precision, so
    save -> load is the identity."""
    doc = {
        "version": SCORE_FILE_VERSION,
        "variant": tensor.variant,
        "fragments": list(tensor.fragment_ids),
        "positions": tensor.num_positions,
        "p": tensor.p.tolist(),
    }
    if tensor.outsider is not None:
        doc["outsider"] = tensor.outsider.tolist()
    if tensor.neighbor is not None:
        doc["neighbor"] = tensor.neighbor.tolist()
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_score_tensor(path) -> ScoreTensor:
    """Read and validate a *.scores.json file.  Schema violations raise
    DataError naming the offending field."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise DataError(f"{path}: top level must be an object")
    for key in ("version", "variant", "fragments", "positions", "p"):
        if key not in doc:
            raise DataError(f"{path}: missing field {key!r}")
    if doc["version"] != SCORE_FILE_VERSION:
        raise DataError(f"{path}: unsupported version {doc['version']!r}")
    if doc["variant"] not in (KNOWN_CENTRAL, ALL_CENTRALS):
        raise DataError(f"{path}: unknown variant {doc['variant']!r}")
    fragments = doc["fragments"]
    if (not isinstance(fragments, list) or not fragments
            or not all(isinstance(f, str) for f in fragments)):
        raise DataError(f"{path}: fragments must be a non-empty list of ids")
    if not isinstance(doc["positions"], int) or doc["positions"] < 1:
        raise DataError(f"{path}: positions must be a positive integer")
    try:
        p = np.asarray(doc["p"], dtype=np.float64)
    except ValueError:
        raise DataError(f"{path}: p is ragged or non-numeric") from None
    kw = {}
    for name in ("outsider", "neighbor"):
        if name in doc:
            try:
                kw[name] = np.asarray(doc[name], dtype=np.float64)
            except ValueError:
                raise DataError(f"{path}: {name} is ragged or non-numeric") from None
    try:
        return ScoreTensor(doc["variant"], tuple(fragments), doc["positions"], p, **kw)
    except DataError as e:
        raise DataError(f"{path}: {e}") from None

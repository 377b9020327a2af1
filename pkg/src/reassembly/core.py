"""Shared domain types: puzzle geometry, score tensors, cost model, reassemblies.

Positions are plain ints 0..7 in row-major order around the central tile:

    0 1 2
    3 C 4
    5 6 7

All types here are frozen dataclasses (numpy payloads are marked read-only),
so instances are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

# Score tensor variants.
KNOWN_CENTRAL = "known_central"
ALL_CENTRALS = "all_centrals"

# Cost model modes.
ONE_MINUS_P = "one_minus_p"
NEG_LOG_P = "neg_log_p"

# Skip-edge cost sources.
SKIP_FROM_OUTSIDER = "outsider"
SKIP_FIXED_LAMBDA = "lambda"

# Sentinel used in place of a position index when a fragment is skipped.
SKIP = -1

# Grid offsets (row, col) of each relative position w.r.t. the central cell.
POSITION_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)


class PuzzleError(Exception):
    """Base class for errors raised by this package."""


class DataError(PuzzleError):
    """Malformed input data (bad manifest, bad score file, unknown ids)."""


class BudgetExceededError(PuzzleError):
    """An explicit construction or enumeration would exceed its size budget."""


def mirror_position(index: int) -> int:
    """Opposite relative position (top-left <-> bottom-right, etc.).

    An involution on 0..7: mirror(0)=7, mirror(1)=6, mirror(2)=5, mirror(3)=4.
    """
    if not 0 <= index <= 7:
        raise ValueError(f"relative position out of range: {index}")
    return 7 - index


def position_to_cell(index: int) -> tuple[int, int]:
    """Map a relative position 0..7 to its (row, col) cell in the 3x3 grid."""
    dr, dc = POSITION_OFFSETS[index]
    return 1 + dr, 1 + dc


def cell_to_position(row: int, col: int) -> int | None:
    """Inverse of position_to_cell; None for the central cell (1, 1)."""
    if (row, col) == (1, 1):
        return None
    return POSITION_OFFSETS.index((row - 1, col - 1))


@dataclass(frozen=True)
class PuzzleSpec:
    """Geometry of one puzzle instance.

    fragment_ids lists the fragments that take part in the assignment; when
    central_known is True the central fragment is fixed a priori and is NOT
    part of fragment_ids.  When central_known is False, exactly one entry of
    fragment_ids will be chosen as central and the rest are assigned.
    """

    fragment_ids: tuple[str, ...]
    num_positions: int = 8
    central_known: bool = True
    allow_empty_positions: bool = False
    allow_unused_fragments: bool = False

    def __post_init__(self):
        if self.num_positions < 1:
            raise ValueError("num_positions must be >= 1")
        if not self.fragment_ids:
            raise ValueError("fragment_ids must be non-empty")
        if len(set(self.fragment_ids)) != len(self.fragment_ids):
            raise ValueError("fragment_ids must be unique")
        object.__setattr__(self, "fragment_ids", tuple(self.fragment_ids))

    @property
    def num_fragments(self) -> int:
        return len(self.fragment_ids)

    @property
    def num_placeable(self) -> int:
        """Fragments available for relative positions (central excluded)."""
        return self.num_fragments - (0 if self.central_known else 1)

    @property
    def unused_allowed(self) -> bool:
        """Explicit flag, or implied by having more fragments than positions."""
        return self.allow_unused_fragments or self.num_placeable > self.num_positions

    @property
    def complete(self) -> bool:
        return not (self.allow_empty_positions or self.unused_allowed)


@dataclass(frozen=True)
class PuzzleTruth:
    """Ground truth for one puzzle: the real central, the real position of
    every in-image fragment present in the instance, and which fragments are
    outsiders (injected from another image)."""

    source_id: str
    central_id: str
    positions: dict[str, int]
    outsiders: frozenset[str] = frozenset()


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScoreTensor:
    """Relevance values for fragment/position pairs.

    variant KNOWN_CENTRAL: p has shape (n, positions), row i scoring fragment
    fragment_ids[i].  variant ALL_CENTRALS: p has shape (n, n-1, positions);
    slab c scores the remaining fragments when fragment_ids[c] plays central,
    rows ordered as fragment_ids with entry c removed.

    outsider, when present, holds per-fragment probabilities that the
    fragment does not belong to the image: shape (n,) for KNOWN_CENTRAL,
    (n, n-1) for ALL_CENTRALS (compacted like p).  neighbor optionally holds
    the 2-class same-image probability, shape (n,).
    """

    variant: str
    fragment_ids: tuple[str, ...]
    num_positions: int
    p: np.ndarray
    outsider: np.ndarray | None = None
    neighbor: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.fragment_ids)
        if len(set(self.fragment_ids)) != n:
            raise DataError("fragment ids must be unique")
        object.__setattr__(self, "fragment_ids", tuple(self.fragment_ids))
        if self.variant == KNOWN_CENTRAL:
            shape = (n, self.num_positions)
            out_shape = (n,)
        elif self.variant == ALL_CENTRALS:
            shape = (n, n - 1, self.num_positions)
            out_shape = (n, n - 1)
        else:
            raise DataError(f"unknown score variant: {self.variant!r}")
        p = np.asarray(self.p, dtype=np.float64)
        if p.shape != shape:
            raise DataError(f"p has shape {p.shape}, expected {shape}")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise DataError("p out of [0,1]")
        object.__setattr__(self, "p", _freeze(p))
        for name, arr, want in (("outsider", self.outsider, out_shape),
                                ("neighbor", self.neighbor, (n,))):
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != want:
                raise DataError(f"{name} has shape {arr.shape}, expected {want}")
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise DataError(f"{name} out of [0,1]")
            object.__setattr__(self, name, _freeze(arr))

    @property
    def num_fragments(self) -> int:
        return len(self.fragment_ids)

    def rows_for_central(self, c: int) -> list[int]:
        """Fragment indices scored by the rows of slab c (ALL_CENTRALS)."""
        return [i for i in range(self.num_fragments) if i != c]

    def index_of(self, fragment_id: str) -> int:
        try:
            return self.fragment_ids.index(fragment_id)
        except ValueError:
            raise DataError(f"unknown fragment id: {fragment_id!r}") from None


@dataclass(frozen=True)
class CostModel:
    """Turns probability-like scores into non-negative edge weights.

    Scores are similarities but shortest-path search minimizes, so raw
    scores cannot be weights.  cost = 1 - p makes every complete path's cost
    equal (number of edges) - (sum of chosen scores), so the shortest path
    is exactly the score-maximal assignment.  neg_log_p is the likelihood
    reading of the same scores.

    Skip edges (assigning a fragment to no position) are priced from the
    outsider probability when the tensor carries one, else the fixed lambda.
    """

    mode: str = ONE_MINUS_P
    epsilon: float = 1e-9
    skip_cost_source: str = SKIP_FROM_OUTSIDER
    skip_lambda: float = 0.5

    def __post_init__(self):
        if self.mode not in (ONE_MINUS_P, NEG_LOG_P):
            raise ValueError(f"unknown cost mode: {self.mode!r}")
        if self.skip_cost_source not in (SKIP_FROM_OUTSIDER, SKIP_FIXED_LAMBDA):
            raise ValueError(f"unknown skip cost source: {self.skip_cost_source!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0,1)")
        if self.skip_lambda < 0.0:
            raise ValueError("skip_lambda must be >= 0")


def cost_of(p, model: CostModel = CostModel()):
    """Edge weight for a score p in [0,1]; accepts scalars or arrays."""
    if model.mode == ONE_MINUS_P:
        return 1.0 - p
    return -np.log(np.maximum(p, model.epsilon))


def skip_costs(tensor: ScoreTensor, model: CostModel, central: int | None = None) -> np.ndarray:
    """Per-fragment cost of the skip edge.

    Uses cost_of(outsider probability) when the model says so and the tensor
    carries outsider values; falls back to the fixed lambda otherwise.  For
    ALL_CENTRALS tensors, central selects the slab and the result is indexed
    by compacted row (see ScoreTensor.rows_for_central).
    """
    if tensor.variant == ALL_CENTRALS:
        n_rows = tensor.num_fragments - 1
        out = tensor.outsider[central] if tensor.outsider is not None else None
    else:
        n_rows = tensor.num_fragments
        out = tensor.outsider
    if model.skip_cost_source == SKIP_FROM_OUTSIDER and out is not None:
        return np.asarray(cost_of(out, model), dtype=np.float64)
    return np.full(n_rows, model.skip_lambda, dtype=np.float64)


@dataclass(frozen=True)
class Reassembly:
    """A (possibly partial) solution: position -> fragment id.

    central_fragment is set only when the solver had to choose the central
    (central-unknown puzzles); for central-known puzzles the central is not
    part of the assignment and stays None here.
    """

    placements: dict[int, str]
    central_fragment: str | None = None
    unused: frozenset[str] = frozenset()
    total_score: float = 0.0
    total_cost: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "placements", MappingProxyType(dict(self.placements)))
        object.__setattr__(self, "unused", frozenset(self.unused))

    def placed_ids(self) -> set[str]:
        return set(self.placements.values())

    def to_json_dict(self) -> dict:
        return {
            "central_fragment": self.central_fragment,
            "placements": {str(k): v for k, v in sorted(self.placements.items())},
            "unused": sorted(self.unused),
            "total_score": self.total_score,
            "total_cost": self.total_cost,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Reassembly":
        return cls(
            placements={int(k): v for k, v in d["placements"].items()},
            central_fragment=d.get("central_fragment"),
            unused=frozenset(d.get("unused", ())),
            total_score=float(d.get("total_score", 0.0)),
            total_cost=float(d.get("total_cost", 0.0)),
        )


@dataclass(frozen=True)
class PuzzleInstance:
    """One solvable puzzle: its spec, its ground truth, and (optionally) the
    fragment rasters keyed by id.  Rasters may be empty for scorers that only
    need ground truth (oracle, noisy oracle)."""

    spec: PuzzleSpec
    truth: PuzzleTruth
    rasters: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def known_central_id(self) -> str | None:
        """Central id when it is given to the solver, None when hidden."""
        return self.truth.central_id if self.spec.central_known else None


def validate(reassembly: Reassembly, spec: PuzzleSpec) -> list[str]:
    """Check a reassembly against the constraint set selected by spec flags.

    Returns a list of human-readable violations; empty means ok.  Violations
    are data, not exceptions: an invalid reassembly is a legitimate object to
    inspect (e.g. when grading a broken solver).
    """
    violations = []
    known = set(spec.fragment_ids)

    central = reassembly.central_fragment
    if spec.central_known:
        if central is not None and central in known:
            violations.append(
                f"central fragment {central!r} also appears in the assignable set")
    else:
        if central is None:
            violations.append("central fragment must be chosen for this puzzle")
        elif central not in known:
            violations.append(f"central fragment {central!r} is not a known fragment")

    used: dict[str, list[int]] = {}
    for pos, fid in reassembly.placements.items():
        if not 0 <= pos < spec.num_positions:
            violations.append(f"position {pos} out of range 0..{spec.num_positions - 1}")
        if fid not in known:
            violations.append(f"placed fragment {fid!r} is not a known fragment")
        used.setdefault(fid, []).append(pos)
    for fid, positions in used.items():
        if len(positions) > 1:
            violations.append(
                f"fragment {fid!r} placed at {len(positions)} positions {sorted(positions)}")
    if central is not None and central in used:
        violations.append(f"central fragment {central!r} is also placed at a position")

    if not spec.allow_empty_positions:
        empty = spec.num_positions - len(reassembly.placements)
        if empty > 0:
            violations.append(f"{empty} position(s) left empty in a complete puzzle")
    if not spec.unused_allowed:
        assigned = set(used) | ({central} if central is not None else set())
        leftovers = known - assigned
        if leftovers:
            violations.append(
                f"fragment(s) {sorted(leftovers)} unused in a complete puzzle")
    return violations


def total_score_of(reassembly: Reassembly, tensor: ScoreTensor) -> float:
    """Re-derive the score sum of a reassembly from the tensor it was built
    from (central choice itself contributes nothing)."""
    if tensor.variant == KNOWN_CENTRAL:
        return float(sum(tensor.p[tensor.index_of(fid), pos]
                         for pos, fid in reassembly.placements.items()))
    c = tensor.index_of(reassembly.central_fragment)
    rows = {f: r for r, f in enumerate(tensor.rows_for_central(c))}
    return float(sum(tensor.p[c, rows[tensor.index_of(fid)], pos]
                     for pos, fid in reassembly.placements.items()))

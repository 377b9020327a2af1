"""Batch evaluation: reconstruction accuracy and position accuracy.

Accounting conventions for partial puzzles are genuinely ambiguous, so they
are pinned here and in the README:

* Each in-image fragment present in the instance contributes one slot to the
  position denominator; it scores iff it sits at its true position.  A true
  fragment left unplaced therefore counts as incorrect.
* The central slot joins the denominator only when the central was unknown
  and had to be chosen; placements are always graded against the true layout
  anchored at the true central.
* A correctly skipped outsider adds nothing to the denominator; a PLACED
  outsider adds an (always incorrect) slot.  That keeps the invariant
  "perfect == all slots correct": a puzzle is perfect iff every true fragment
  is at its true position, the central (when chosen) is right, and no
  outsider was placed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import DataError, PuzzleTruth, Reassembly


@dataclass(frozen=True)
class PuzzleOutcome:
    puzzle_id: str
    perfect: bool
    correct_positions: int
    total_positions: int


@dataclass(frozen=True)
class EvaluationResult:
    reconstruction_accuracy: float
    position_accuracy: float
    per_puzzle: tuple[PuzzleOutcome, ...]

    @property
    def n_puzzles(self) -> int:
        return len(self.per_puzzle)

    def to_json_dict(self) -> dict:
        return {
            "reconstruction_accuracy": self.reconstruction_accuracy,
            "position_accuracy": self.position_accuracy,
            "n_puzzles": self.n_puzzles,
            "per_puzzle": [
                {"puzzle_id": o.puzzle_id, "perfect": o.perfect,
                 "correct_positions": o.correct_positions,
                 "total_positions": o.total_positions}
                for o in self.per_puzzle
            ],
        }


def grade(reassembly: Reassembly, truth: PuzzleTruth) -> PuzzleOutcome:
    """Grade one reassembly against its ground truth."""
    known = set(truth.positions) | set(truth.outsiders) | {truth.central_id}
    for fid in list(reassembly.placements.values()) + list(reassembly.unused):
        if fid not in known:
            raise DataError(
                f"puzzle {truth.source_id}: fragment {fid!r} is not part of "
                f"this puzzle's ground truth")

    correct = 0
    total = 0
    if reassembly.central_fragment is not None:
        total += 1
        correct += int(reassembly.central_fragment == truth.central_id)
    placed_at = {fid: pos for pos, fid in reassembly.placements.items()}
    for fid, true_pos in truth.positions.items():
        total += 1
        correct += int(placed_at.get(fid) == true_pos)
    placed_outsiders = truth.outsiders & set(placed_at)
    total += len(placed_outsiders)
    return PuzzleOutcome(
        puzzle_id=truth.source_id,
        perfect=correct == total,
        correct_positions=correct,
        total_positions=total,
    )


def evaluate(reassemblies: list[Reassembly],
             ground_truths: list[PuzzleTruth]) -> EvaluationResult:
    """Aggregate over aligned lists of reassemblies and truths.

    reconstruction_accuracy is the fraction of perfect puzzles;
    position_accuracy pools correct slots over all slots (not a mean of
    per-puzzle ratios).
    """
    if len(reassemblies) != len(ground_truths):
        raise DataError(
            f"{len(reassemblies)} reassemblies vs {len(ground_truths)} truths")
    if not reassemblies:
        raise DataError("nothing to evaluate")
    outcomes = tuple(grade(r, t) for r, t in zip(reassemblies, ground_truths))
    total = sum(o.total_positions for o in outcomes)
    correct = sum(o.correct_positions for o in outcomes)
    return EvaluationResult(
        reconstruction_accuracy=sum(o.perfect for o in outcomes) / len(outcomes),
        position_accuracy=correct / total if total else 1.0,
        per_puzzle=outcomes,
    )

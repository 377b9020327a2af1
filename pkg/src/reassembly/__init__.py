"""Reassemble 3x3 image puzzles from unordered fragments.

Pipeline: cut images into ground-truthed fragments (`fragmenter`), score
fragment/position pairs (`scoring`, or an external neural scorer via score
files), build the assignment graph (`graph`), find the cheapest path
(`solver`), and grade the result (`metrics`).  `reassembly.cli` drives it all
from the command line.
"""

from .core import (
    ALL_CENTRALS,
    KNOWN_CENTRAL,
    NEG_LOG_P,
    ONE_MINUS_P,
    SKIP,
    BudgetExceededError,
    CostModel,
    DataError,
    PuzzleError,
    PuzzleInstance,
    PuzzleSpec,
    PuzzleTruth,
    Reassembly,
    ScoreTensor,
    cost_of,
    mirror_position,
    validate,
)

__version__ = "0.1.0"

import numpy as np
import pytest

from reassembly.core import (
    ALL_CENTRALS,
    KNOWN_CENTRAL,
    PuzzleInstance,
    PuzzleSpec,
    PuzzleTruth,
    ScoreTensor,
)


def known_central_instance(n_true=8, n_outsiders=0, num_positions=8,
                           allow_empty=False, source="img"):
    """Instance with a known central, n_true in-image fragments at positions
    0..n_true-1, and n_outsiders injected fragments (no rasters)."""
    true_ids = [f"{source}:{j}" for j in range(n_true)]
    out_ids = [f"other:{j}" for j in range(n_outsiders)]
    spec = PuzzleSpec(
        fragment_ids=tuple(true_ids + out_ids),
        num_positions=num_positions,
        central_known=True,
        allow_empty_positions=allow_empty or n_true < num_positions or n_outsiders > 0,
    )
    truth = PuzzleTruth(
        source_id=source,
        central_id=f"{source}:C",
        positions={fid: j for j, fid in enumerate(true_ids)},
        outsiders=frozenset(out_ids),
    )
    return PuzzleInstance(spec=spec, truth=truth)


def unknown_central_instance(num_positions=8, source="img"):
    """9 candidate fragments, central hidden; candidate 0 is the true central."""
    ids = [f"{source}:{j}" for j in range(num_positions + 1)]
    spec = PuzzleSpec(fragment_ids=tuple(ids), num_positions=num_positions,
                      central_known=False)
    truth = PuzzleTruth(
        source_id=source,
        central_id=ids[0],
        positions={fid: j for j, fid in enumerate(ids[1:])},
        outsiders=frozenset(),
    )
    return PuzzleInstance(spec=spec, truth=truth)


def random_known_tensor(rng, n=8, num_positions=8, with_outsider=False):
    ids = tuple(f"f{i}" for i in range(n))
    outsider = rng.random(n) if with_outsider else None
    return ScoreTensor(KNOWN_CENTRAL, ids, num_positions,
                       rng.random((n, num_positions)), outsider=outsider)


def random_all_centrals_tensor(rng, n=9, num_positions=8):
    ids = tuple(f"f{i}" for i in range(n))
    return ScoreTensor(ALL_CENTRALS, ids, num_positions,
                       rng.random((n, n - 1, num_positions)))


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reassembly.core import (
    ALL_CENTRALS,
    KNOWN_CENTRAL,
    NEG_LOG_P,
    CostModel,
    DataError,
    PuzzleSpec,
    Reassembly,
    ScoreTensor,
    cell_to_position,
    cost_of,
    mirror_position,
    position_to_cell,
    skip_costs,
    validate,
)


def make_spec(n=8, **kw):
    return PuzzleSpec(fragment_ids=tuple(f"f{i}" for i in range(n)), **kw)


class TestRelativePositions:
    def test_mirror_values(self):
        assert mirror_position(0) == 7
        assert mirror_position(1) == 6
        assert mirror_position(2) == 5
        assert mirror_position(3) == 4

    @given(st.integers(min_value=0, max_value=7))
    def test_mirror_is_involution(self, j):
        assert mirror_position(mirror_position(j)) == j

    def test_cell_bijection(self):
        cells = {position_to_cell(j) for j in range(8)}
        assert len(cells) == 8
        assert (1, 1) not in cells
        for j in range(8):
            assert cell_to_position(*position_to_cell(j)) == j
        assert cell_to_position(1, 1) is None


class TestCostModel:
    def test_one_minus_p_endpoints(self):
        m = CostModel()
        assert cost_of(1.0, m) == 0.0
        assert cost_of(0.0, m) == 1.0

    def test_neg_log_half(self):
        # -ln(0.5) = 0.693147...
        m = CostModel(mode=NEG_LOG_P)
        assert cost_of(0.5, m) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_neg_log_clamps_at_zero(self):
        m = CostModel(mode=NEG_LOG_P, epsilon=1e-9)
        assert cost_of(0.0, m) == pytest.approx(-math.log(1e-9))

    @given(st.floats(min_value=0.0, max_value=1.0),
           st.floats(min_value=0.0, max_value=1.0))
    def test_monotone_nonincreasing_in_p(self, a, b):
        lo, hi = min(a, b), max(a, b)
        for m in (CostModel(), CostModel(mode=NEG_LOG_P)):
            assert cost_of(lo, m) >= cost_of(hi, m)
            assert cost_of(lo, m) >= 0.0

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            CostModel(mode="entropy")


class TestPuzzleSpec:
    def test_rejects_duplicate_ids(self):
        with pytest.raises(ValueError):
            PuzzleSpec(fragment_ids=("a", "a"))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            PuzzleSpec(fragment_ids=())

    def test_unused_implied_by_surplus(self):
        spec = make_spec(10)
        assert spec.unused_allowed
        assert not make_spec(8).unused_allowed

    def test_central_excluded_from_surplus_count(self):
        # 9 candidates, central unknown: one becomes central, 8 remain for
        # 8 positions, so nothing is implied unused.
        spec = make_spec(9, central_known=False)
        assert spec.num_placeable == 8
        assert not spec.unused_allowed


class TestScoreTensor:
    def test_rejects_out_of_range(self):
        with pytest.raises(DataError, match="out of"):
            ScoreTensor(KNOWN_CENTRAL, ("a",), 2, np.array([[0.5, 1.2]]))

    def test_rejects_bad_shape(self):
        with pytest.raises(DataError, match="shape"):
            ScoreTensor(KNOWN_CENTRAL, ("a", "b"), 2, np.zeros((2, 3)))

    def test_all_centrals_shape(self):
        t = ScoreTensor(ALL_CENTRALS, ("a", "b", "c"), 2, np.zeros((3, 2, 2)))
        assert t.rows_for_central(1) == [0, 2]

    def test_arrays_read_only(self):
        t = ScoreTensor(KNOWN_CENTRAL, ("a",), 2, np.array([[0.1, 0.2]]))
        with pytest.raises(ValueError):
            t.p[0, 0] = 0.9


class TestSkipCosts:
    def test_outsider_sourced(self):
        t = ScoreTensor(KNOWN_CENTRAL, ("a", "b"), 2,
                        np.full((2, 2), 0.5), outsider=np.array([1.0, 0.25]))
        np.testing.assert_allclose(skip_costs(t, CostModel()), [0.0, 0.75])

    def test_lambda_fallback_when_no_outsider(self):
        t = ScoreTensor(KNOWN_CENTRAL, ("a", "b"), 2, np.full((2, 2), 0.5))
        np.testing.assert_allclose(skip_costs(t, CostModel()), [0.5, 0.5])

    def test_forced_lambda(self):
        t = ScoreTensor(KNOWN_CENTRAL, ("a",), 2, np.full((1, 2), 0.5),
                        outsider=np.array([1.0]))
        m = CostModel(skip_cost_source="lambda", skip_lambda=0.3)
        np.testing.assert_allclose(skip_costs(t, m), [0.3])


class TestValidate:
    def test_identity_placement_ok(self):
        spec = make_spec(8)
        r = Reassembly(placements={j: f"f{j}" for j in range(8)})
        assert validate(r, spec) == []

    def test_duplicate_fragment(self):
        spec = make_spec(8, allow_empty_positions=True, allow_unused_fragments=True)
        r = Reassembly(placements={0: "f3", 5: "f3"})
        out = validate(r, spec)
        assert any("placed at 2 positions" in v for v in out)

    def test_incomplete_rejected_when_complete_required(self):
        spec = make_spec(8, allow_unused_fragments=True)
        r = Reassembly(placements={j: f"f{j}" for j in range(7)})
        out = validate(r, spec)
        assert any("left empty" in v for v in out)

    def test_incomplete_ok_when_allowed(self):
        spec = make_spec(8, allow_empty_positions=True, allow_unused_fragments=True)
        r = Reassembly(placements={j: f"f{j}" for j in range(7)},
                       unused=frozenset({"f7"}))
        assert validate(r, spec) == []

    def test_unused_fragment_rejected_when_complete(self):
        spec = make_spec(8)
        r = Reassembly(placements={j: f"f{j}" for j in range(7)})
        assert any("unused" in v for v in validate(r, spec))

    def test_unknown_central_must_be_chosen(self):
        spec = make_spec(9, central_known=False)
        rest = {j: f"f{j}" for j in range(8)}
        assert any("must be chosen" in v
                   for v in validate(Reassembly(placements=rest), spec))
        ok = Reassembly(placements=rest, central_fragment="f8")
        assert validate(ok, spec) == []

    def test_central_cannot_also_be_placed(self):
        spec = make_spec(9, central_known=False, allow_empty_positions=True,
                         allow_unused_fragments=True)
        r = Reassembly(placements={0: "f8"}, central_fragment="f8")
        assert any("also placed" in v for v in validate(r, spec))


class TestCostScoreDuality:
    def test_complete_assignment_cost_is_p_minus_score(self):
        # Under cost = 1 - p every complete assignment of p fragments onto p
        # positions has total_cost = p - total_score, so minimizing cost and
        # maximizing score pick the same assignment.
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            p = rng.random((n, n))
            perm = rng.permutation(n)
            score = float(p[np.arange(n), perm].sum())
            cost = float((1.0 - p[np.arange(n), perm]).sum())
            assert cost == pytest.approx(n - score, abs=1e-12)

"""Solvers over the assignment graphs, all minimizing the same path cost.

solve_dijkstra runs on the explicitly materialized tree, solve_implicit is a
uniform-cost search over the lazy graph (with optional beam pruning),
solve_merged_dp collapses history-equivalent tree nodes into
(next fragment, used-position set) states, solve_greedy is the pick-the-top-
value baseline, and solve_brute_force enumerates every feasible assignment
as the testing oracle.  On any instance small enough to cross-check, the
three exact solvers and the oracle agree on the optimal cost; greedy never
beats them.

Path cost bookkeeping for incomplete puzzles follows the tree expansion:
fragments are processed in roster order, a skipped fragment pays the skip
cost, and fragments after the point where every position got filled are
never processed at all (so they pay nothing).
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .core import (
    BudgetExceededError,
    CostModel,
    DataError,
    PuzzleError,
    PuzzleSpec,
    Reassembly,
    ScoreTensor,
    cost_of,
    skip_costs,
)
from .graph import (
    DEFAULT_NODE_BUDGET,
    FRAG_NONE,
    POS_CENTRAL,
    POS_SKIP,
    AssignmentGraph,
    ImplicitAssignmentGraph,
    SearchState,
    build_graph,
    implicit_graph,
)

DIJKSTRA = "dijkstra"
IMPLICIT = "implicit"
MERGED_DP = "dp"
GREEDY = "greedy"
BRUTE_FORCE = "brute"

METHODS = (DIJKSTRA, IMPLICIT, MERGED_DP, GREEDY, BRUTE_FORCE)

BRUTE_FORCE_MAX_FRAGMENTS = 9


@dataclass
class SolverReport:
    reassembly: Reassembly
    method: str
    nodes_expanded: int
    edges_relaxed: int
    wall_time: float
    beam_width: int | None = None
    approximate: bool = False

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "reassembly": self.reassembly.to_json_dict(),
            "nodes_expanded": self.nodes_expanded,
            "edges_relaxed": self.edges_relaxed,
            "wall_time_s": self.wall_time,
            "beam_width": self.beam_width,
            "approximate": self.approximate,
        }


def _assemble(spec: PuzzleSpec, tensor: ScoreTensor, central: int,
              pairs: list[tuple[int, int]], total_cost: float) -> Reassembly:
    """Turn a decoded path (central candidate, [(fragment row, position)])
    into a Reassembly; rows map back through the per-central compaction."""
    ids = spec.fragment_ids
    if spec.central_known:
        central_id = None
        row_ids = list(ids)
        p = tensor.p
    else:
        central_id = ids[central]
        row_ids = [ids[i] for i in tensor.rows_for_central(central)]
        p = tensor.p[central]
    placements = {}
    score = 0.0
    for row, pos in pairs:
        if pos == POS_SKIP:
            continue
        placements[pos] = row_ids[row]
        score += float(p[row, pos])
    used = set(placements.values())
    unused = frozenset(f for f in ids if f not in used and f != central_id)
    return Reassembly(placements=placements, central_fragment=central_id,
                      unused=unused, total_score=score, total_cost=float(total_cost))


def solve_dijkstra(graph: AssignmentGraph) -> SolverReport:
    """Shortest S->T path on the explicit graph (Dijkstra, non-negative
    weights), decoded into a reassembly.  Every node of the tree is settled
    and every edge relaxed exactly once, which is what the effort counters
    report."""
    if graph.representation != "explicit":
        raise DataError("solve_dijkstra needs an explicit graph; "
                        "use solve_implicit for lazy graphs")
    t0 = time.perf_counter()
    m = csr_matrix(
        (graph.sorted_weights(), graph.dst[graph.order], graph.indptr),
        shape=(graph.n_nodes, graph.n_nodes))
    dist, pred = _csgraph_dijkstra(m, directed=True, indices=0,
                                   return_predecessors=True)
    leaf = int(pred[1])
    if leaf < 0:
        raise PuzzleError("graph has no S->T path")
    central = -1
    pairs = []
    node = leaf
    while node != 0:
        f = int(graph.node_frag[node])
        p = int(graph.node_pos[node])
        if p == POS_CENTRAL:
            central = f
        else:
            pairs.append((f, p))
        node = int(graph.parent[node])
    pairs.reverse()
    reassembly = _assemble(graph.spec, graph.tensor, central, pairs, dist[1])
    return SolverReport(reassembly=reassembly, method=DIJKSTRA,
                        nodes_expanded=graph.n_nodes,
                        edges_relaxed=graph.n_edges,
                        wall_time=time.perf_counter() - t0)


DEFAULT_STATE_BUDGET = 10_000_000


def solve_implicit(graph: ImplicitAssignmentGraph,
                   beam_width: int | None = None,
                   max_states: int = DEFAULT_STATE_BUDGET) -> SolverReport:
    """Best-first search expanding SearchStates lazily.

    Without a beam this is uniform-cost search; states reached along
    different histories but with the same (central, next fragment, used
    positions) are deduplicated, which cannot change the optimal cost because
    edge weights never depend on history.  With beam_width set, each level
    keeps only the best beam_width states and the result is best-within-beam
    (reported as approximate); beam_width=1 degenerates to greedy in
    fragment order.
    """
    if graph.representation != "implicit":
        raise DataError("solve_implicit needs an implicit graph")
    if beam_width is not None and beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    t0 = time.perf_counter()
    if beam_width is None:
        result = _uniform_cost(graph, max_states)
    else:
        result = _beam(graph, beam_width)
    central, pairs, cost, expanded, relaxed = result
    reassembly = _assemble(graph.spec, graph.tensor, central, pairs, cost)
    return SolverReport(reassembly=reassembly, method=IMPLICIT,
                        nodes_expanded=expanded, edges_relaxed=relaxed,
                        wall_time=time.perf_counter() - t0,
                        beam_width=beam_width, approximate=beam_width is not None)


def _pos_key(pos: int, num_positions: int) -> int:
    # deterministic frontier order: real positions ascending, skip last
    return pos if pos >= 0 else num_positions + 1


def _uniform_cost(graph: ImplicitAssignmentGraph, max_states: int):
    seq = itertools.count()
    np_ = graph.spec.num_positions
    heap = []
    parents = {}
    closed = set()
    relaxed = 0
    for state, cost, f, p in graph.initial_states():
        heapq.heappush(heap, (cost, f, _pos_key(p, np_), p, next(seq), state, None))
        relaxed += 1
    expanded = 0
    while heap:
        cost, f, _, p, _, state, prev = heapq.heappop(heap)
        if state in closed:
            continue
        if len(closed) >= max_states:
            raise BudgetExceededError(
                f"implicit search exceeded {max_states:,} states; set a "
                f"beam_width or use the merged-state solver")
        closed.add(state)
        parents[state] = (prev, f, p)
        expanded += 1
        if graph.is_terminal(state):
            pairs = []
            central = state.central
            cur = state
            while cur is not None:
                prev, f, p = parents[cur]
                if p != POS_CENTRAL:
                    pairs.append((f, p))
                cur = prev
            pairs.reverse()
            return central, pairs, cost, expanded, relaxed
        for nxt, w, f, p in graph.successors(state):
            if nxt not in closed:
                heapq.heappush(heap,
                               (cost + w, f, _pos_key(p, np_), p, next(seq),
                                nxt, state))
                relaxed += 1
    raise PuzzleError("graph has no S->T path")


def _beam(graph: ImplicitAssignmentGraph, width: int):
    # level-synchronous pruning over tree states (no deduplication: each
    # entry carries its own assignment prefix)
    np_ = graph.spec.num_positions
    level = []
    for rank, (state, cost, f, p) in enumerate(graph.initial_states()):
        level.append((cost, f, _pos_key(p, np_), rank, state, ()))
    expanded = 0
    relaxed = len(level)
    finished = []
    seq = itertools.count(len(level))
    while level:
        level.sort(key=lambda e: e[:4])
        level = level[:width]
        nxt_level = []
        for cost, f, p, _, state, prefix in level:
            if graph.is_terminal(state):
                finished.append((cost, len(finished), state.central, prefix))
                continue
            expanded += 1
            for nxt, w, nf, npos in graph.successors(state):
                nxt_level.append((cost + w, nf, _pos_key(npos, np_), next(seq),
                                  nxt, prefix + ((nf, npos),)))
                relaxed += 1
        level = nxt_level
    if not finished:
        raise PuzzleError("beam search lost every path")
    cost, _, central, prefix = min(finished)
    return central, list(prefix), cost, expanded, relaxed


def _centrals(spec: PuzzleSpec, tensor: ScoreTensor):
    """(candidate index, cost matrix, skip vector) per central choice; the
    known-central case is the single pseudo-candidate -1."""
    return ([-1] if spec.central_known else list(range(tensor.num_fragments)))


def _cost_matrix(tensor: ScoreTensor, model: CostModel, central: int) -> np.ndarray:
    p = tensor.p if central == -1 else tensor.p[central]
    return np.asarray(cost_of(p, model), dtype=np.float64)


def _skip_vector(tensor: ScoreTensor, model: CostModel, central: int) -> np.ndarray:
    return skip_costs(tensor, model, central=None if central == -1 else central)


def _allow_skip(spec: PuzzleSpec) -> bool:
    return spec.allow_empty_positions or spec.unused_allowed


def _check_complete_shape(spec: PuzzleSpec) -> None:
    if spec.num_placeable != spec.num_positions:
        raise DataError(
            f"complete puzzle needs one fragment per position "
            f"({spec.num_placeable} placeable, {spec.num_positions} positions)")


def solve_merged_dp(tensor: ScoreTensor, spec: PuzzleSpec,
                    cost_model: CostModel = CostModel()) -> SolverReport:
    """Exact dynamic program over (next fragment, used-position bitset).

    Future cost never depends on which fragment sits where, only on which
    positions are taken and which fragment comes next, so collapsing the
    tree's history-equivalent nodes preserves the optimum while shrinking the
    search to O(n * 2^p * p) work.
    """
    if spec.num_positions > 24:
        raise BudgetExceededError(
            f"merged DP supports at most 24 positions, got {spec.num_positions}")
    if not _allow_skip(spec):
        _check_complete_shape(spec)
    t0 = time.perf_counter()
    p = spec.num_positions
    full = (1 << p) - 1
    allow_skip = _allow_skip(spec)
    best = None
    states = 0
    relaxed = 0
    for central in _centrals(spec, tensor):
        costs = _cost_matrix(tensor, cost_model, central)
        skipv = _skip_vector(tensor, cost_model, central)
        n_rows = costs.shape[0]
        value = [0.0] * (full + 1)  # level n_rows: every state is terminal
        choices = []
        for d in range(n_rows - 1, -1, -1):
            row = costs[d]
            nxt = value
            value = [0.0] * (full + 1)
            choice = [POS_SKIP] * (full + 1)
            for mask in range(full + 1):
                if mask == full:
                    choice[mask] = None  # terminal: connects straight to T
                    continue
                states += 1
                vbest = np.inf
                jbest = None
                for j in range(p):
                    bit = 1 << j
                    if mask & bit:
                        continue
                    v = row[j] + nxt[mask | bit]
                    relaxed += 1
                    if v < vbest:
                        vbest, jbest = v, j
                if allow_skip:
                    v = skipv[d] + nxt[mask]
                    relaxed += 1
                    if v < vbest:
                        vbest, jbest = v, POS_SKIP
                value[mask] = vbest
                choice[mask] = jbest
            choices.append(choice)
        choices.reverse()
        total = value[0]
        if best is None or total < best[0]:
            pairs = []
            mask, d = 0, 0
            while d < n_rows and mask != full:
                j = choices[d][mask]
                pairs.append((d, j))
                if j != POS_SKIP:
                    mask |= 1 << j
                d += 1
            best = (total, central, pairs)
    total, central, pairs = best
    reassembly = _assemble(spec, tensor, central, pairs, total)
    return SolverReport(reassembly=reassembly, method=MERGED_DP,
                        nodes_expanded=states, edges_relaxed=relaxed,
                        wall_time=time.perf_counter() - t0)


def _path_cost(costs: np.ndarray, skipv: np.ndarray, num_positions: int,
               assignment: dict[int, int]) -> float:
    """Cost of the tree path realizing an assignment {row -> position}:
    rows in order, skips paid until the positions fill up, unprocessed tail
    free."""
    used = 0
    cost = 0.0
    for r in range(costs.shape[0]):
        if used == num_positions:
            break
        if r in assignment:
            cost += float(costs[r, assignment[r]])
            used += 1
        else:
            cost += float(skipv[r])
    return cost


def solve_greedy(tensor: ScoreTensor, spec: PuzzleSpec,
                 cost_model: CostModel = CostModel()) -> SolverReport:
    """Baseline: repeatedly commit the highest remaining score among unused
    fragments and unfilled positions.  On incomplete puzzles, placement stops
    once the best remaining value costs more than skipping its fragment.  For
    an unknown central the procedure runs per candidate and keeps the
    cheapest total."""
    if not _allow_skip(spec):
        _check_complete_shape(spec)
    t0 = time.perf_counter()
    allow_skip = _allow_skip(spec)
    best = None
    steps = 0
    for central in _centrals(spec, tensor):
        p = tensor.p if central == -1 else tensor.p[central]
        costs = _cost_matrix(tensor, cost_model, central)
        skipv = _skip_vector(tensor, cost_model, central)
        n_rows = p.shape[0]
        rows = set(range(n_rows))
        positions = set(range(spec.num_positions))
        assignment = {}
        while rows and positions:
            steps += 1
            r_best, j_best = min(((r, j) for r in rows for j in positions),
                                 key=lambda rj: (-p[rj], rj[0], rj[1]))
            if allow_skip and costs[r_best, j_best] > skipv[r_best]:
                break
            assignment[r_best] = j_best
            rows.discard(r_best)
            positions.discard(j_best)
        total = _path_cost(costs, skipv, spec.num_positions, assignment)
        if best is None or total < best[0]:
            pairs = sorted((r, j) for r, j in assignment.items())
            best = (total, central, pairs)
    total, central, pairs = best
    reassembly = _assemble(spec, tensor, central, pairs, total)
    return SolverReport(reassembly=reassembly, method=GREEDY,
                        nodes_expanded=steps, edges_relaxed=steps,
                        wall_time=time.perf_counter() - t0)


@lru_cache(maxsize=64)
def _perm_table(p: int, k: int) -> np.ndarray:
    """All ordered placements of k distinct positions out of p, lexicographic."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.permutations(range(p), k)), dtype=np.int64)


def solve_brute_force(tensor: ScoreTensor, spec: PuzzleSpec,
                      cost_model: CostModel = CostModel()) -> SolverReport:
    """Exhaustive oracle: enumerate every feasible assignment under the
    spec's constraints (all bijections when complete; every fragment subset
    with every injective placement when gaps are allowed; times every central
    candidate when the central is unknown) and keep the cheapest path cost."""
    if spec.num_placeable > BRUTE_FORCE_MAX_FRAGMENTS:
        raise BudgetExceededError(
            f"brute force refuses more than {BRUTE_FORCE_MAX_FRAGMENTS} "
            f"placeable fragments (got {spec.num_placeable})")
    if not _allow_skip(spec):
        _check_complete_shape(spec)
    t0 = time.perf_counter()
    allow_skip = _allow_skip(spec)
    p = spec.num_positions
    best = None
    candidates = 0
    for central in _centrals(spec, tensor):
        costs = _cost_matrix(tensor, cost_model, central)
        skipv = _skip_vector(tensor, cost_model, central)
        n_rows = costs.shape[0]
        if not allow_skip:
            perms = _perm_table(p, p)
            totals = costs[np.arange(n_rows)[None, :], perms].sum(axis=1)
            candidates += len(perms)
            i = int(np.argmin(totals))
            total = float(totals[i])
            if best is None or total < best[0]:
                best = (total, central, list(enumerate(perms[i].tolist())))
            continue
        for k in range(min(n_rows, p), -1, -1):
            inj = _perm_table(p, k)
            for combo in itertools.combinations(range(n_rows), k):
                candidates += len(inj)
                rows = np.array(combo, dtype=np.int64)
                paid = _paid_skips(combo, n_rows, p)
                base = float(skipv[paid].sum()) if len(paid) else 0.0
                if k:
                    totals = costs[rows[None, :], inj].sum(axis=1) + base
                    i = int(np.argmin(totals))
                    total = float(totals[i])
                    assignment = list(zip(combo, inj[i].tolist()))
                else:
                    total = base
                    assignment = []
                if best is None or total < best[0]:
                    best = (total, central, assignment)
    total, central, assignment = best
    pairs = sorted(assignment)
    reassembly = _assemble(spec, tensor, central, pairs, total)
    return SolverReport(reassembly=reassembly, method=BRUTE_FORCE,
                        nodes_expanded=candidates, edges_relaxed=candidates,
                        wall_time=time.perf_counter() - t0)


def _paid_skips(combo: tuple[int, ...], n_rows: int, p: int) -> np.ndarray:
    """Skipped rows that actually pay: everything outside the placed set,
    except the tail that is never processed once all p positions are full."""
    placed = set(combo)
    if len(combo) == p:
        cutoff = max(combo)
        return np.array([r for r in range(n_rows)
                         if r not in placed and r < cutoff], dtype=np.int64)
    return np.array([r for r in range(n_rows) if r not in placed],
                    dtype=np.int64)


def solve(tensor: ScoreTensor, spec: PuzzleSpec,
          cost_model: CostModel = CostModel(), method: str = DIJKSTRA,
          beam_width: int | None = None,
          node_budget: int = DEFAULT_NODE_BUDGET) -> SolverReport:
    """Route to a solver by name (the CLI's --solver values)."""
    if method == DIJKSTRA:
        return solve_dijkstra(build_graph(tensor, spec, cost_model,
                                          node_budget=node_budget))
    if method == IMPLICIT:
        return solve_implicit(implicit_graph(tensor, spec, cost_model),
                              beam_width=beam_width)
    if method == MERGED_DP:
        return solve_merged_dp(tensor, spec, cost_model)
    if method == GREEDY:
        return solve_greedy(tensor, spec, cost_model)
    if method == BRUTE_FORCE:
        return solve_brute_force(tensor, spec, cost_model)
    raise ValueError(f"unknown solver {method!r}; pick one of {METHODS}")

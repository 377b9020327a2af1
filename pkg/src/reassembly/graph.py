"""Assignment graphs: S -> fragment levels -> T, built explicitly or lazily.

Every graph is a tree hanging off the source S (plus the shared sink T):
depth d assigns fragment d, a node's children are the still-empty positions
(plus the skip pseudo-position when incomplete puzzles are allowed, which is
never removed from later choices), and exhausted nodes connect to T with a
zero-weight edge.  For central-unknown puzzles the first expansion from S is
one zero-weight edge per central candidate, each followed by such a tree.

Nodes are never merged here, so node/edge counts match the closed-form sizes
(e.g. 109,602 nodes / 149,920 edges for 8 fragments on 8 positions); the
history-collapsing optimization lives in `solver.solve_merged_dp`.

Explicit graphs share their (n, p)-topology through a module cache; only the
weight vector is per-instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import (
    ALL_CENTRALS,
    KNOWN_CENTRAL,
    BudgetExceededError,
    CostModel,
    DataError,
    PuzzleSpec,
    ScoreTensor,
    cost_of,
    skip_costs,
)

# Edge label encodings for the `pos` column.
POS_SKIP = -2  # fragment assigned to no position
POS_TERMINAL = -3  # ... -> T closure edge
POS_CENTRAL = -4  # S -> central-candidate edge (fragment column = candidate)
FRAG_NONE = -1

DEFAULT_NODE_BUDGET = 10_000_000

KNOWN = "known_central"
UNKNOWN = "unknown_central"
EMPTY = "empty_positions"


@dataclass(frozen=True)
class SearchState:
    """State of the lazy expansion: which central was picked (-1 when the
    central is known a priori), the next fragment row to process, and the
    bitset of filled positions.  The number of set bits can lag next_fragment
    only via skip edges."""

    central: int
    next_fragment: int
    used_positions: int


@dataclass
class AssignmentGraph:
    """Explicitly materialized graph.  Node 0 is S, node 1 is T; edge arrays
    are aligned (src, dst, weight, frag, pos, central).  parent/node_frag/
    node_pos give each inner node its unique incoming edge, which is enough
    to decode any S->T path (the graph is a tree plus the shared sink)."""

    kind: str
    spec: PuzzleSpec
    tensor: ScoreTensor
    cost_model: CostModel
    n_nodes: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    frag: np.ndarray
    pos: np.ndarray
    central: np.ndarray | None
    parent: np.ndarray
    node_frag: np.ndarray
    node_pos: np.ndarray
    # CSR view (edges sorted by src) shared with the topology cache
    order: np.ndarray = field(repr=False, default=None)
    indptr: np.ndarray = field(repr=False, default=None)

    representation = "explicit"

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def sorted_weights(self) -> np.ndarray:
        return self.weight[self.order]

    def dump(self, fh) -> None:
        """Debug edge list: from, to, weight, fragment, position (tab
        separated; S/T named, skip/central spelled out)."""

        def name(i):
            return "S" if i == 0 else "T" if i == 1 else str(i)

        pos_names = {POS_SKIP: "skip", POS_TERMINAL: "-", POS_CENTRAL: "central"}
        for i in range(self.n_edges):
            p = int(self.pos[i])
            f = int(self.frag[i])
            fh.write("{}\t{}\t{:.17g}\t{}\t{}\n".format(
                name(int(self.src[i])), name(int(self.dst[i])),
                float(self.weight[i]),
                "-" if f == FRAG_NONE else f,
                pos_names.get(p, str(p))))


class ImplicitAssignmentGraph:
    """Lazy twin of the explicit tree: generates successor states on demand
    instead of materializing nodes, for the regimes where the tree has
    billions of edges."""

    representation = "implicit"

    def __init__(self, spec: PuzzleSpec, tensor: ScoreTensor, cost_model: CostModel):
        _check_tensor(spec, tensor)
        self.spec = spec
        self.tensor = tensor
        self.cost_model = cost_model
        self.allow_skip = spec.allow_empty_positions or spec.unused_allowed
        if not self.allow_skip and spec.num_placeable != spec.num_positions:
            raise DataError(
                f"complete puzzle needs one fragment per position "
                f"({spec.num_placeable} placeable, {spec.num_positions} positions)")
        if spec.central_known:
            self._costs = {-1: np.asarray(cost_of(tensor.p, cost_model))}
            self._skip = {-1: skip_costs(tensor, cost_model)}
        else:
            self._costs = {c: np.asarray(cost_of(tensor.p[c], cost_model))
                           for c in range(tensor.num_fragments)}
            self._skip = {c: skip_costs(tensor, cost_model, central=c)
                          for c in range(tensor.num_fragments)}
        self.n_rows = next(iter(self._costs.values())).shape[0]

    def initial_states(self):
        """Seed states with their entry cost and (frag, pos) edge label."""
        if self.spec.central_known:
            return [(SearchState(-1, 0, 0), 0.0, FRAG_NONE, POS_CENTRAL)]
        return [(SearchState(c, 0, 0), 0.0, c, POS_CENTRAL)
                for c in range(self.tensor.num_fragments)]

    def is_terminal(self, state: SearchState) -> bool:
        return (state.next_fragment == self.n_rows
                or state.used_positions == (1 << self.spec.num_positions) - 1)

    def successors(self, state: SearchState):
        """Children of a state in deterministic order: positions ascending,
        then the skip edge."""
        d = state.next_fragment
        mask = state.used_positions
        costs = self._costs[state.central][d]
        out = []
        for j in range(self.spec.num_positions):
            if not mask & (1 << j):
                out.append((SearchState(state.central, d + 1, mask | (1 << j)),
                            float(costs[j]), d, j))
        if self.allow_skip:
            out.append((SearchState(state.central, d + 1, mask),
                        float(self._skip[state.central][d]), d, POS_SKIP))
        return out


def _check_tensor(spec: PuzzleSpec, tensor: ScoreTensor) -> None:
    if tensor.fragment_ids != spec.fragment_ids:
        raise DataError("score tensor fragments do not match the puzzle spec")
    if tensor.num_positions != spec.num_positions:
        raise DataError(f"score tensor has {tensor.num_positions} positions, "
                        f"spec wants {spec.num_positions}")
    want = KNOWN_CENTRAL if spec.central_known else ALL_CENTRALS
    if tensor.variant != want:
        raise DataError(f"score tensor variant {tensor.variant!r} does not "
                        f"match spec (want {want!r})")


@lru_cache(maxsize=32)
def _subtree_topology(n_rows: int, p: int, allow_skip: bool):
    """Topology of one assignment tree with local ids: root 0, sink -1,
    inner nodes 1..; returns edge and node arrays (see AssignmentGraph)."""
    src, dst, frag, pos = [], [], [], []
    parent, node_frag, node_pos = [], [], []
    next_id = 1

    def expand(node, d, mask, n_empty):
        nonlocal next_id
        if n_empty == 0 or d == n_rows:
            src.append(node)
            dst.append(-1)
            frag.append(FRAG_NONE)
            pos.append(POS_TERMINAL)
            return
        for j in range(p):
            if mask & (1 << j):
                continue
            nid = next_id
            next_id += 1
            parent.append(node)
            node_frag.append(d)
            node_pos.append(j)
            src.append(node)
            dst.append(nid)
            frag.append(d)
            pos.append(j)
            expand(nid, d + 1, mask | (1 << j), n_empty - 1)
        if allow_skip:
            nid = next_id
            next_id += 1
            parent.append(node)
            node_frag.append(d)
            node_pos.append(POS_SKIP)
            src.append(node)
            dst.append(nid)
            frag.append(d)
            pos.append(POS_SKIP)
            expand(nid, d + 1, mask, n_empty)

    expand(0, 0, 0, p)

    def to_np(a, t=np.int64):
        arr = np.asarray(a, dtype=t)
        arr.setflags(write=False)
        return arr

    return (to_np(src), to_np(dst), to_np(frag, np.int32), to_np(pos, np.int32),
            to_np(parent), to_np(node_frag, np.int32), to_np(node_pos, np.int32))


@lru_cache(maxsize=32)
def _graph_topology(kind: str, n_rows: int, p: int, n_centrals: int):
    """Full topology with global ids (S=0, T=1).  For central-unknown kinds,
    n_centrals candidate nodes come first and each replays the same subtree
    at an offset; n_rows is the per-subtree fragment count."""
    allow_skip = kind == EMPTY
    s_src, s_dst, s_frag, s_pos, s_parent, s_nfrag, s_npos = \
        _subtree_topology(n_rows, p, allow_skip)
    n_inner = len(s_parent)

    def embed(local, root_id, base):
        out = np.where(local == -1, 1, base + local - 1)
        return np.where(local == 0, root_id, out)

    if n_centrals == 0:
        src = embed(s_src, 0, 2)
        dst = embed(s_dst, 0, 2)
        frag, pos = s_frag, s_pos
        central = None
        parent = np.concatenate(([-1, -1], embed(s_parent, 0, 2)))
        node_frag = np.concatenate(([-1, -1], s_nfrag)).astype(np.int32)
        node_pos = np.concatenate(([POS_TERMINAL, POS_TERMINAL], s_npos)).astype(np.int32)
        n_nodes = 2 + n_inner
    else:
        srcs, dsts, frags, poss, cents = [], [], [], [], []
        parents, nfrags, nposs = [], [], []
        # candidate nodes are 2 .. 2+n_centrals-1
        srcs.append(np.zeros(n_centrals, dtype=np.int64))
        dsts.append(np.arange(2, 2 + n_centrals, dtype=np.int64))
        frags.append(np.arange(n_centrals, dtype=np.int32))
        poss.append(np.full(n_centrals, POS_CENTRAL, dtype=np.int32))
        cents.append(np.arange(n_centrals, dtype=np.int32))
        for c in range(n_centrals):
            base = 2 + n_centrals + c * n_inner
            srcs.append(embed(s_src, 2 + c, base))
            dsts.append(embed(s_dst, 2 + c, base))
            frags.append(s_frag)
            poss.append(s_pos)
            cents.append(np.full(len(s_src), c, dtype=np.int32))
            parents.append(embed(s_parent, 2 + c, base))
            nfrags.append(s_nfrag)
            nposs.append(s_npos)
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        frag = np.concatenate(frags)
        pos = np.concatenate(poss)
        central = np.concatenate(cents)
        parent = np.concatenate(
            [np.full(2, -1, dtype=np.int64),
             np.zeros(n_centrals, dtype=np.int64)] + parents)
        node_frag = np.concatenate(
            [np.full(2, -1, dtype=np.int32),
             np.arange(n_centrals, dtype=np.int32)] + nfrags)
        node_pos = np.concatenate(
            [np.full(2, POS_TERMINAL, dtype=np.int32),
             np.full(n_centrals, POS_CENTRAL, dtype=np.int32)] + nposs)
        n_nodes = 2 + n_centrals + n_centrals * n_inner

    order = np.lexsort((dst, src))
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n_nodes), out=indptr[1:])
    arrays = (src, dst, frag, pos, central, parent, node_frag, node_pos,
              order, indptr)
    for a in arrays:
        if a is not None:
            a.setflags(write=False)
    return (n_nodes, *arrays)


def _instantiate(kind, spec, tensor, cost_model, n_rows, n_centrals,
                 node_budget) -> AssignmentGraph:
    nodes, edges = _expected_size(kind, n_rows, p := spec.num_positions, n_centrals)
    if nodes > node_budget:
        raise BudgetExceededError(
            f"explicit graph would have {nodes:,} nodes "
            f"(budget {node_budget:,}); use the implicit representation or "
            f"the merged-state solver")
    (n_nodes, src, dst, frag, pos, central, parent, node_frag, node_pos,
     order, indptr) = _graph_topology(kind, n_rows, p, n_centrals)
    weight = np.zeros(len(src))
    assign = pos >= 0
    if central is None:
        weight[assign] = cost_of(tensor.p[frag[assign], pos[assign]], cost_model)
        if kind == EMPTY:
            sk = pos == POS_SKIP
            weight[sk] = skip_costs(tensor, cost_model)[frag[sk]]
    else:
        weight[assign] = cost_of(
            tensor.p[central[assign], frag[assign], pos[assign]], cost_model)
        if kind == EMPTY:
            sk = pos == POS_SKIP
            all_skip = np.stack([skip_costs(tensor, cost_model, central=c)
                                 for c in range(n_centrals)])
            weight[sk] = all_skip[central[sk], frag[sk]]
    return AssignmentGraph(
        kind=kind, spec=spec, tensor=tensor, cost_model=cost_model,
        n_nodes=n_nodes, src=src, dst=dst, weight=weight, frag=frag, pos=pos,
        central=central, parent=parent, node_frag=node_frag, node_pos=node_pos,
        order=order, indptr=indptr)


def build_known_central(tensor: ScoreTensor, spec: PuzzleSpec,
                        cost_model: CostModel = CostModel(),
                        node_budget: int = DEFAULT_NODE_BUDGET) -> AssignmentGraph:
    """Permutation tree for the complete, central-known puzzle: depth d
    offers fragment d every still-empty position."""
    _check_tensor(spec, tensor)
    if not spec.central_known:
        raise DataError("spec says the central is unknown; use build_unknown_central")
    if not spec.complete:
        raise DataError("puzzle allows gaps; use build_with_empty_positions")
    if spec.num_fragments != spec.num_positions:
        raise DataError(
            f"complete puzzle needs as many fragments as positions "
            f"({spec.num_fragments} != {spec.num_positions})")
    return _instantiate(KNOWN, spec, tensor, cost_model,
                        spec.num_fragments, 0, node_budget)


def build_unknown_central(tensor: ScoreTensor, spec: PuzzleSpec,
                          cost_model: CostModel = CostModel(),
                          node_budget: int = DEFAULT_NODE_BUDGET) -> AssignmentGraph:
    """Central selection as a first zero-cost expansion from S, then one
    complete-assignment subtree per candidate (all sharing T)."""
    _check_tensor(spec, tensor)
    if spec.central_known:
        raise DataError("spec says the central is known; use build_known_central")
    if not spec.complete:
        raise DataError("puzzle allows gaps; use build_with_empty_positions")
    if spec.num_placeable != spec.num_positions:
        raise DataError(
            f"complete puzzle needs one candidate plus one fragment per "
            f"position ({spec.num_fragments} fragments, {spec.num_positions} "
            f"positions)")
    return _instantiate(UNKNOWN, spec, tensor, cost_model,
                        spec.num_placeable, spec.num_fragments, node_budget)


def build_with_empty_positions(tensor: ScoreTensor, spec: PuzzleSpec,
                               cost_model: CostModel = CostModel(),
                               node_budget: int = DEFAULT_NODE_BUDGET) -> AssignmentGraph:
    """Incomplete-puzzle tree: every level offers the empty positions plus
    the skip pseudo-position, which stays available forever; expansion stops
    when the positions or the fragments run out.

    Materialization is refused above node_budget; use implicit_graph or
    solver.solve_merged_dp for the large regimes.
    """
    _check_tensor(spec, tensor)
    if not (spec.allow_empty_positions or spec.unused_allowed):
        raise DataError("puzzle is complete; use the complete-puzzle builders")
    if spec.central_known:
        return _instantiate(EMPTY, spec, tensor, cost_model,
                            spec.num_fragments, 0, node_budget)
    return _instantiate(EMPTY, spec, tensor, cost_model,
                        spec.num_placeable, spec.num_fragments, node_budget)


def build_graph(tensor: ScoreTensor, spec: PuzzleSpec,
                cost_model: CostModel = CostModel(),
                node_budget: int = DEFAULT_NODE_BUDGET) -> AssignmentGraph:
    """Pick the right explicit builder for the spec."""
    if spec.allow_empty_positions or spec.unused_allowed:
        return build_with_empty_positions(tensor, spec, cost_model, node_budget)
    if spec.central_known:
        return build_known_central(tensor, spec, cost_model, node_budget)
    return build_unknown_central(tensor, spec, cost_model, node_budget)


def implicit_graph(tensor: ScoreTensor, spec: PuzzleSpec,
                   cost_model: CostModel = CostModel()) -> ImplicitAssignmentGraph:
    return ImplicitAssignmentGraph(spec, tensor, cost_model)


def _known_counts(n: int, p: int) -> tuple[int, int]:
    # |N| = 2 + sum_{i=n-p}^{n-1} n!/i!,  |E| = n!/(n-p)! + same sum
    if n < p:
        raise ValueError("complete puzzle needs n >= p")
    inner = sum(math.factorial(n) // math.factorial(i) for i in range(n - p, n))
    leaves = math.factorial(n) // math.factorial(n - p)
    return 2 + inner, leaves + inner


@lru_cache(maxsize=None)
def _empty_inner(r: int, e: int) -> int:
    """Inner nodes of the skip-enabled subtree with r fragments left and e
    empty positions (exhaustive expansion collapsed into a recurrence)."""
    if r == 0 or e == 0:
        return 0
    return e * (1 + _empty_inner(r - 1, e - 1)) + 1 + _empty_inner(r - 1, e)


@lru_cache(maxsize=None)
def _empty_terminals(r: int, e: int) -> int:
    if r == 0 or e == 0:
        return 1
    return e * _empty_terminals(r - 1, e - 1) + _empty_terminals(r - 1, e)


def count_graph(kind: str, n: int, p: int) -> tuple[int, int]:
    """Node and edge counts of the explicit graphs, without building them.

    known_central / unknown_central use the closed forms (n is the total
    fragment count; for unknown_central one fragment becomes central).  For
    empty_positions the published closed form is wrong already at n=p=1, so
    counting follows the expansion itself via an exact recurrence.  Python
    integers keep every result exact.
    """
    if n < 1 or p < 1:
        raise ValueError("need n >= 1 and p >= 1")
    if kind == KNOWN:
        return _known_counts(n, p)
    if kind == UNKNOWN:
        sub_nodes, sub_edges = _known_counts(n - 1, p)
        return 2 + n + n * (sub_nodes - 2), n + n * sub_edges
    if kind == EMPTY:
        inner = _empty_inner(n, p)
        return 2 + inner, inner + _empty_terminals(n, p)
    raise ValueError(f"unknown graph kind: {kind!r}")


def _expected_size(kind: str, n_rows: int, p: int, n_centrals: int) -> tuple[int, int]:
    if n_centrals == 0:
        if kind == EMPTY:
            return count_graph(EMPTY, n_rows, p)
        return count_graph(KNOWN, n_rows, p)
    if kind == EMPTY:
        inner = _empty_inner(n_rows, p)
        terms = _empty_terminals(n_rows, p)
        return (2 + n_centrals + n_centrals * inner,
                n_centrals + n_centrals * (inner + terms))
    return count_graph(UNKNOWN, n_centrals, p)

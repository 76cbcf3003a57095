"""Proper graph decompositions and recursive decomposition schedules."""

import logging
from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import networkx as nx

from .graph import Edge, Ordering, UndirectedGraph

logger = logging.getLogger(__name__)

# Separator orderings are searched exhaustively up to this size.
MAX_EXHAUSTIVE_SEPARATOR = 6


def _clique_edges(graph: UndirectedGraph, vertices: Sequence[int]) -> Set[Edge]:
    return {
        (i, j)
        for i, j in combinations(sorted(set(vertices)), 2)
        if not graph.has_edge(i, j)
    }


@dataclass(frozen=True)
class GraphDecomposition:
    """Proper decomposition (A, S, B): S is a clique separating A from B.

    Attributes:
        A: Vertices on one side of the separator.
        S: Separator vertices.
        B: Remaining vertices.
        added_edges: Edges added to make S a clique.
    """

    A: FrozenSet[int]
    S: FrozenSet[int]
    B: FrozenSet[int]
    added_edges: FrozenSet[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if not self.A or not self.B:
            raise ValueError("A and B must be nonempty")
        if self.A & self.S or self.A & self.B or self.S & self.B:
            raise ValueError("A, S and B must be disjoint")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "A": sorted(self.A),
            "S": sorted(self.S),
            "B": sorted(self.B),
            "added_edges": sorted(self.added_edges),
        }


@dataclass(frozen=True)
class DecompositionStep:
    """One step of a decomposition schedule.

    Attributes:
        decomposition: (A_i, S_i, B_i) with A_i cumulative.
        ordering: Ordering of all vertices, S_i first in its chosen order.
        effective_dim: |(A_i minus A_{i-1}) union S_i|.
        graph_after: Graph on which the next step operates.
    """

    decomposition: GraphDecomposition
    ordering: Ordering
    effective_dim: int
    graph_after: UndirectedGraph

    def to_dict(self) -> Dict[str, Any]:
        return {
            **self.decomposition.to_dict(),
            "sigma": list(self.ordering.perm),
            "effective_dim": self.effective_dim,
            "graph_after": self.graph_after.sorted_edges(),
        }


@dataclass(frozen=True)
class DecompositionSchedule:
    """Sequence of decomposition steps followed by a remainder map."""

    steps: Tuple[DecompositionStep, ...]
    final_R_dim: int

    @property
    def effective_dims(self) -> List[int]:
        """Dimensions of every map in the composition, remainder last."""
        return [step.effective_dim for step in self.steps] + [self.final_R_dim]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "steps": [step.to_dict() for step in self.steps],
            "final_R_dim": self.final_R_dim,
            "effective_dims": self.effective_dims,
        }


@dataclass(frozen=True)
class PlanStep:
    """Explicit schedule step: vertices added to A and an optional order of S."""

    increment: FrozenSet[int]
    separator_order: Optional[Tuple[int, ...]] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PlanStep":
        order = data.get("separator_order")
        return cls(
            frozenset(int(v) for v in data["increment"]),
            tuple(int(v) for v in order) if order is not None else None,
        )


def decompose(g: UndirectedGraph) -> Optional[GraphDecomposition]:
    """Find a proper decomposition of g.

    Separators are tried by increasing size; among separators of the smallest
    working size the one leaving the smallest A wins, then the lowest labels.
    A is the smallest connected component of g minus S and B is everything
    else. The separator is augmented into a clique when needed.

    Returns:
        The decomposition, or None when g is complete or has a single vertex.
    """
    n = g.n_vertices
    vertices = list(g.vertices)
    if n < 2 or g.is_clique(vertices):
        return None

    nx_graph = g.to_networkx()
    for size in range(0, n - 1):
        best: Optional[Tuple[Any, ...]] = None
        for separator in combinations(vertices, size):
            rest = nx_graph.subgraph(set(vertices) - set(separator))
            components = [frozenset(c) for c in nx.connected_components(rest)]
            if len(components) < 2:
                continue
            A = min(components, key=lambda c: (len(c), min(c)))
            key = (len(A), sorted(A), list(separator))
            if best is None or key < best[0]:
                best = (key, A, frozenset(separator))
        if best is not None:
            _, A, S = best
            B = frozenset(vertices) - A - S
            return GraphDecomposition(A, S, B, frozenset(_clique_edges(g, sorted(S))))
    return None


def _augment(
    graph: UndirectedGraph,
    A: Set[int],
    separator_order: Sequence[int],
) -> Tuple[UndirectedGraph, Set[Edge]]:
    """Graph for the next step: drop edges touching A, then close cliques over S."""
    reduced = graph.without_vertex_edges(A)
    rest = set(graph.vertices) - A
    position = {v: i for i, v in enumerate(separator_order)}
    added: Set[Edge] = set()
    for clique in nx.find_cliques(reduced.to_networkx().subgraph(rest)):
        hit = [position[v] for v in clique if v in position]
        if not hit:
            continue
        j = max(hit)
        added |= _clique_edges(reduced, list(clique) + list(separator_order[: j + 1]))
    return reduced.with_edges(added), added


def _best_separator_order(
    graph: UndirectedGraph, A: Set[int], separator: Set[int]
) -> Tuple[int, ...]:
    ordered = tuple(sorted(separator))
    if len(ordered) > MAX_EXHAUSTIVE_SEPARATOR:
        return ordered
    best_order, best_added = ordered, -1
    for candidate in permutations(ordered):
        _, added = _augment(graph, A, candidate)
        if best_added < 0 or len(added) < best_added:
            best_order, best_added = candidate, len(added)
    return best_order


def _greedy_increment(
    graph: UndirectedGraph, A_prev: Set[int]
) -> Optional[FrozenSet[int]]:
    remaining = set(graph.vertices) - A_prev
    best: Optional[Tuple[int, int]] = None
    for v in sorted(remaining):
        separator = graph.neighbors(v) - A_prev
        if not remaining - separator - {v}:
            continue
        dim = 1 + len(separator)
        if best is None or dim < best[0]:
            best = (dim, v)
    return frozenset({best[1]}) if best else None


def schedule_decomposition(
    g: UndirectedGraph, plan: Optional[Sequence[PlanStep]] = None
) -> DecompositionSchedule:
    """Decompose g recursively until the remaining vertices form a clique.

    Each step grows A, separates the new vertices from the rest with their
    neighborhood S, removes the edges incident to A and closes the cliques
    that meet S so the next step sees a valid graph.

    Args:
        g: Graph on 1..n.
        plan: Optional explicit steps. Without it A grows by the single vertex
            with the smallest |{v} union S|, and S is ordered to add the fewest
            edges.

    Returns:
        The schedule; a complete graph yields no steps.
    """
    current = g
    A_prev: Set[int] = set()
    steps: List[DecompositionStep] = []
    plan_steps = list(plan) if plan is not None else None

    while True:
        remaining = set(g.vertices) - A_prev
        if plan_steps is not None:
            if not plan_steps:
                break
            planned = plan_steps.pop(0)
            increment = planned.increment
            if not increment or increment & A_prev or not increment <= remaining:
                raise ValueError(f"invalid plan increment {sorted(increment)}")
        else:
            if current.is_clique(remaining):
                break
            planned = None
            greedy = _greedy_increment(current, A_prev)
            if greedy is None:
                break
            increment = greedy

        separator: Set[int] = set()
        for v in increment:
            separator |= current.neighbors(v)
        separator -= A_prev | increment
        A_i = A_prev | increment
        B = remaining - increment - separator
        if not B:
            raise ValueError(f"step with increment {sorted(increment)} leaves B empty")

        clique_fill = _clique_edges(current, sorted(separator))
        closed = current.with_edges(clique_fill)
        if planned is not None and planned.separator_order is not None:
            separator_order = planned.separator_order
            if set(separator_order) != separator:
                raise ValueError(
                    f"separator order {separator_order} does not match S={sorted(separator)}"
                )
        else:
            separator_order = _best_separator_order(closed, A_i, separator)

        graph_after, added = _augment(closed, A_i, separator_order)
        ordering = Ordering(
            tuple(separator_order)
            + tuple(sorted(increment))
            + tuple(sorted(B))
            + tuple(sorted(A_prev))
        )
        decomposition = GraphDecomposition(
            frozenset(A_i), frozenset(separator), frozenset(B), frozenset(clique_fill)
        )
        effective_dim = len(increment | separator)
        steps.append(DecompositionStep(decomposition, ordering, effective_dim, graph_after))
        logger.debug(
            "step %d: A+=%s S=%s dim=%d added=%s",
            len(steps),
            sorted(increment),
            list(separator_order),
            effective_dim,
            sorted(added),
        )
        A_prev = A_i
        current = graph_after

    return DecompositionSchedule(tuple(steps), g.n_vertices - len(A_prev))

"""Variable elimination on undirected graphs and the sparsity bounds it implies."""

import logging
from itertools import combinations
from typing import Dict, FrozenSet, List, Set, Tuple

from .graph import Edge, Ordering, SparsityPattern, UndirectedGraph

logger = logging.getLogger(__name__)


def _eliminate_last(graph: UndirectedGraph) -> Tuple[UndirectedGraph, Set[Edge]]:
    """Remove the highest-labeled vertex after turning its neighborhood into a clique."""
    k = graph.n_vertices
    neighborhood = sorted(graph.neighbors(k))
    added = {
        (i, j) for i, j in combinations(neighborhood, 2) if not graph.has_edge(i, j)
    }
    kept = frozenset(e for e in graph.edges if k not in e) | frozenset(added)
    return UndirectedGraph(k - 1, kept), added


def _eliminate_all(graph: UndirectedGraph) -> Tuple[List[UndirectedGraph], Set[Edge]]:
    graphs = [graph]
    fill: Set[Edge] = set()
    current = graph
    while current.n_vertices > 1:
        current, added = _eliminate_last(current)
        fill |= added
        graphs.append(current)
    return graphs, fill


def marginal_graphs(g: UndirectedGraph) -> List[UndirectedGraph]:
    """Marginal graphs obtained by eliminating vertices n, n-1, ..., 2.

    Args:
        g: Graph on 1..n.

    Returns:
        List [G^n, ..., G^1] where G^n is g and G^k lives on vertices 1..k.
    """
    graphs, _ = _eliminate_all(g)
    return graphs


def _marginal_neighborhoods(g: UndirectedGraph) -> Dict[int, Set[int]]:
    """Nb(k, G^k) for every k."""
    return {
        graph.n_vertices: graph.neighbors(graph.n_vertices)
        for graph in marginal_graphs(g)
    }


def inverse_sparsity(g: UndirectedGraph) -> SparsityPattern:
    """Predicted sparsity of the inverse (lower-triangular) transport.

    Component k ignores input j < k whenever j is not a neighbor of k in the
    marginal graph G^k.
    """
    neighborhoods = _marginal_neighborhoods(g)
    pairs = frozenset(
        (j, k) for k in g.vertices for j in range(1, k) if j not in neighborhoods[k]
    )
    return SparsityPattern(g.n_vertices, pairs)


def direct_sparsity(g: UndirectedGraph) -> SparsityPattern:
    """Predicted sparsity of the direct transport.

    (j, k) belongs to the pattern iff (j, i) does for every neighbor i of k in
    G^k. A pair (j, i) with j > i holds trivially and (j, j) never does, so the
    result is contained in the inverse pattern.
    """
    neighborhoods = _marginal_neighborhoods(g)
    pairs: Set[Edge] = set()
    for k in g.vertices:
        for j in range(1, k):
            if j in neighborhoods[k]:
                continue
            if all(i < j or (j, i) in pairs for i in neighborhoods[k]):
                pairs.add((j, k))
    return SparsityPattern(g.n_vertices, frozenset(pairs))


def fill_in(g: UndirectedGraph, o: Ordering) -> FrozenSet[Edge]:
    """Edges added while building the marginal graphs of g relabeled by o.

    Args:
        g: Graph on 1..n.
        o: Ordering; vertex o.perm[i-1] becomes label i.

    Returns:
        Fill edges, expressed in the relabeled vertex labels.
    """
    if len(o) != g.n_vertices:
        raise ValueError("ordering and graph sizes differ")
    _, fill = _eliminate_all(g.relabel(o))
    return frozenset(fill)


def min_fill_ordering(g: UndirectedGraph) -> Ordering:
    """Greedy min-fill elimination ordering.

    At every step the vertex whose elimination adds the fewest edges is
    removed, lowest label first on ties. The first eliminated vertex receives
    the highest label, matching elimination from n down to 1.
    """
    adjacency = g.adjacency()
    remaining = set(g.vertices)
    eliminated: List[int] = []
    while remaining:
        best_vertex, best_fill = -1, -1
        for v in sorted(remaining):
            nbrs = sorted(adjacency[v])
            missing = sum(
                1 for a, b in combinations(nbrs, 2) if b not in adjacency[a]
            )
            if best_fill < 0 or missing < best_fill:
                best_vertex, best_fill = v, missing
        nbrs = adjacency.pop(best_vertex)
        for a, b in combinations(sorted(nbrs), 2):
            adjacency[a].add(b)
            adjacency[b].add(a)
        for a in nbrs:
            adjacency[a].discard(best_vertex)
        remaining.remove(best_vertex)
        eliminated.append(best_vertex)
        logger.debug("min-fill eliminated %d (fill %d)", best_vertex, best_fill)
    return Ordering(tuple(reversed(eliminated)))

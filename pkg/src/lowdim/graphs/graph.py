"""Undirected graphs, sparsity patterns and vertex orderings."""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Set, Tuple

import networkx as nx
import numpy as np

Edge = Tuple[int, int]


def _normalize_edge(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class UndirectedGraph:
    """Simple undirected graph on vertices labeled 1..n.

    Attributes:
        n_vertices: Number of vertices.
        edges: Unordered vertex pairs stored as (i, j) with i < j.
    """

    n_vertices: int
    edges: FrozenSet[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.n_vertices < 1:
            raise ValueError("a graph needs at least one vertex")
        normalized = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop on vertex {i}")
            if not (1 <= i <= self.n_vertices and 1 <= j <= self.n_vertices):
                raise ValueError(f"edge ({i}, {j}) outside 1..{self.n_vertices}")
            normalized.add(_normalize_edge(i, j))
        object.__setattr__(self, "edges", frozenset(normalized))

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Iterable[Edge]) -> "UndirectedGraph":
        return cls(n_vertices, frozenset(edges))

    @classmethod
    def complete(cls, n_vertices: int) -> "UndirectedGraph":
        return cls(n_vertices, frozenset(combinations(range(1, n_vertices + 1), 2)))

    @classmethod
    def from_adjacency(
        cls, matrix: np.ndarray, tolerance: float = 0.0
    ) -> "UndirectedGraph":
        """Build a graph from the off-diagonal nonzeros of a square matrix.

        Args:
            matrix: Square matrix, e.g. a precision matrix.
            tolerance: Entries with absolute value at most this are zeros.

        Returns:
            Graph with edge (i, j) wherever matrix[i-1, j-1] is nonzero.
        """
        matrix = np.asarray(matrix)
        n = matrix.shape[0]
        edges = [
            (i + 1, j + 1)
            for i, j in combinations(range(n), 2)
            if abs(matrix[i, j]) > tolerance or abs(matrix[j, i]) > tolerance
        ]
        return cls(n, frozenset(edges))

    @property
    def vertices(self) -> range:
        return range(1, self.n_vertices + 1)

    def has_edge(self, i: int, j: int) -> bool:
        return _normalize_edge(i, j) in self.edges

    def neighbors(self, v: int) -> Set[int]:
        """Neighbors of vertex v."""
        return {j if i == v else i for i, j in self.edges if v in (i, j)}

    def adjacency(self) -> Dict[int, Set[int]]:
        adj: Dict[int, Set[int]] = {v: set() for v in self.vertices}
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def is_clique(self, vertices: Iterable[int]) -> bool:
        return all(self.has_edge(i, j) for i, j in combinations(sorted(vertices), 2))

    def with_edges(self, extra: Iterable[Edge]) -> "UndirectedGraph":
        return UndirectedGraph(self.n_vertices, self.edges | frozenset(extra))

    def without_vertex_edges(self, vertices: Iterable[int]) -> "UndirectedGraph":
        """Copy of the graph with every edge incident to the given vertices removed."""
        drop = set(vertices)
        kept = frozenset(e for e in self.edges if e[0] not in drop and e[1] not in drop)
        return UndirectedGraph(self.n_vertices, kept)

    def relabel(self, ordering: "Ordering") -> "UndirectedGraph":
        """Relabel so that original vertex ordering.perm[i-1] becomes vertex i."""
        position = ordering.positions()
        return UndirectedGraph(
            self.n_vertices,
            frozenset(_normalize_edge(position[i], position[j]) for i, j in self.edges),
        )

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.vertices)
        graph.add_edges_from(self.edges)
        return graph

    def sorted_edges(self) -> List[Edge]:
        return sorted(self.edges)


@dataclass(frozen=True)
class SparsityPattern:
    """Pairs (j, k), j < k, where component k of a triangular map ignores input j."""

    n: int
    pairs: FrozenSet[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        for j, k in self.pairs:
            if not 1 <= j < k <= self.n:
                raise ValueError(f"invalid sparsity pair ({j}, {k}) for n={self.n}")

    def __contains__(self, pair: object) -> bool:
        return pair in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def active_inputs(self, k: int) -> List[int]:
        """Inputs 1..k that component k may depend on, ending with k itself."""
        return [j for j in range(1, k) if (j, k) not in self.pairs] + [k]

    def sorted_pairs(self) -> List[Edge]:
        return sorted(self.pairs, key=lambda p: (p[1], p[0]))


@dataclass(frozen=True)
class Ordering:
    """Permutation of 1..n; perm[i-1] is the original vertex that receives label i."""

    perm: Tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "perm", tuple(int(v) for v in self.perm))
        if sorted(self.perm) != list(range(1, len(self.perm) + 1)):
            raise ValueError(f"{self.perm} is not a permutation of 1..{len(self.perm)}")

    @classmethod
    def identity(cls, n: int) -> "Ordering":
        return cls(tuple(range(1, n + 1)))

    def __len__(self) -> int:
        return len(self.perm)

    def positions(self) -> Dict[int, int]:
        """Map from original vertex to its new label."""
        return {v: i + 1 for i, v in enumerate(self.perm)}

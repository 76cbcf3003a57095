"""Reading and writing graph files."""

from pathlib import Path
from typing import List

from ..errors import GraphParseError
from .graph import Edge, UndirectedGraph


def parse_graph_text(text: str) -> UndirectedGraph:
    """Parse the plain-text graph format.

    The first non-blank line holds the vertex count ``n``; each following line
    holds one edge ``i j`` with 1-based labels. Lines starting with ``#`` are
    ignored.

    Args:
        text: File contents.

    Returns:
        The parsed graph.

    Raises:
        GraphParseError: With the 1-based line number of the first bad line.
    """
    n_vertices = None
    edges: List[Edge] = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if n_vertices is None:
            if len(fields) != 1:
                raise GraphParseError("expected the vertex count alone", line_number)
            try:
                n_vertices = int(fields[0])
            except ValueError:
                raise GraphParseError(f"bad vertex count {fields[0]!r}", line_number)
            if n_vertices < 1:
                raise GraphParseError("vertex count must be positive", line_number)
            continue
        if len(fields) != 2:
            raise GraphParseError("expected an edge 'i j'", line_number)
        try:
            i, j = int(fields[0]), int(fields[1])
        except ValueError:
            raise GraphParseError(f"non-integer vertex in {line!r}", line_number)
        if i == j:
            raise GraphParseError(f"self-loop on vertex {i}", line_number)
        if not (1 <= i <= n_vertices and 1 <= j <= n_vertices):
            raise GraphParseError(
                f"vertex outside 1..{n_vertices} in {line!r}", line_number
            )
        edges.append((i, j))

    if n_vertices is None:
        raise GraphParseError("empty graph file", 1)
    return UndirectedGraph.from_edges(n_vertices, edges)


def load_graph_file(path: Path) -> UndirectedGraph:
    with open(path, "r") as f:
        return parse_graph_text(f.read())


def format_graph_text(graph: UndirectedGraph) -> str:
    lines = [str(graph.n_vertices)]
    lines.extend(f"{i} {j}" for i, j in graph.sorted_edges())
    return "\n".join(lines) + "\n"


def save_graph_file(graph: UndirectedGraph, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(format_graph_text(graph))

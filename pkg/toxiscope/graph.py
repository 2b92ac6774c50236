import io
import logging
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

import networkx as nx
import pandas as pd

from . import pydantic_compat
from .corpus import Corpus, RelationKind, mention_targets
from .exceptions import InputError

logger = logging.getLogger(__name__)

EDGE_COLUMNS = ["source", "target", "relation", "record_id"]


class Edge(NamedTuple):
    source: str
    target: str
    relation: RelationKind
    record_id: str


class InteractionGraph:
    """Directed multigraph of user interactions; immutable once built.

    Two simple views are derived on demand: the directed unique-edge view
    (degrees, betweenness) and the undirected view (components, geodesics,
    communities). Both drop self-loops.
    """

    def __init__(self, edges: Iterable[Edge], vertices: Iterable[str] = ()):
        self._edges: Tuple[Edge, ...] = tuple(edges)
        names = set(vertices)
        for edge in self._edges:
            names.add(edge.source)
            names.add(edge.target)
        self._vertices: Tuple[str, ...] = tuple(sorted(names))
        self._directed: Optional[nx.DiGraph] = None
        self._undirected: Optional[nx.Graph] = None

    @property
    def edges(self) -> Tuple[Edge, ...]:
        return self._edges

    @property
    def vertices(self) -> Tuple[str, ...]:
        return self._vertices

    def __len__(self) -> int:
        return len(self._vertices)

    def __repr__(self):
        return f"InteractionGraph(vertices={len(self._vertices)}, edges={len(self._edges)})"

    def unique_pairs(self) -> List[Tuple[str, str]]:
        return sorted({(edge.source, edge.target) for edge in self._edges})

    def directed_view(self) -> nx.DiGraph:
        if self._directed is None:
            view = nx.DiGraph()
            view.add_nodes_from(self._vertices)
            view.add_edges_from((source, target) for source, target in self.unique_pairs() if source != target)
            self._directed = nx.freeze(view)
        return self._directed

    def undirected_view(self) -> nx.Graph:
        if self._undirected is None:
            view = nx.Graph()
            view.add_nodes_from(self._vertices)
            view.add_edges_from((source, target) for source, target in self.unique_pairs() if source != target)
            self._undirected = nx.freeze(view)
        return self._undirected


def build_graph(corpus: Corpus, relation: Union[RelationKind, str]) -> InteractionGraph:
    """Retweet graphs get one author->original edge per retweet; mention graphs
    one author->handle edge per mention outside the retweet prefix."""

    relation = RelationKind(relation)
    edges: List[Edge] = []
    if relation == RelationKind.RETWEET:
        for record in corpus:
            if record.retweet_of is not None:
                edges.append(Edge(record.author, record.retweet_of, RelationKind.RETWEET, record.id))
    elif relation == RelationKind.MENTION:
        for record in corpus:
            for handle in mention_targets(record):
                edges.append(Edge(record.author, handle, RelationKind.MENTION, record.id))
    else:
        raise InputError(f"Cannot build a graph for relation '{relation.value}'")

    graph = InteractionGraph(edges)
    logger.info("Built %s graph: %r", relation.value, graph)
    return graph


class NetworkStats(pydantic_compat.FrozenModel):
    vertices: int = 0
    total_edges: int = 0
    duplicated_edges: int = 0
    unique_edges: int = 0
    self_loops: int = 0
    connected_components: int = 0
    max_geodesic: int = 0
    avg_geodesic: float = 0.0


def _geodesics(view: Union[nx.Graph, nx.DiGraph]) -> Tuple[int, float]:
    directed = view.is_directed()
    longest = 0
    total = 0
    pairs = 0
    for source, lengths in nx.all_pairs_shortest_path_length(view):
        for target, length in lengths.items():
            if target == source or (not directed and target < source):
                continue
            longest = max(longest, length)
            total += length
            pairs += 1

    return longest, (total / pairs if pairs else 0.0)


def summarize(graph: InteractionGraph, directed_geodesics: bool = False) -> NetworkStats:
    """Network statistics.

    Components always use the undirected view. Geodesics use the undirected
    view over unordered connected pairs, or the directed view over ordered
    reachable pairs when `directed_geodesics` is set.
    """

    if not graph.vertices:
        return NetworkStats()

    total = len(graph.edges)
    unique = len(graph.unique_pairs())
    self_loops = sum(1 for edge in graph.edges if edge.source == edge.target)
    undirected = graph.undirected_view()
    max_geodesic, avg_geodesic = _geodesics(graph.directed_view() if directed_geodesics else undirected)

    return NetworkStats(
        vertices=len(graph.vertices),
        total_edges=total,
        duplicated_edges=total - unique,
        unique_edges=unique,
        self_loops=self_loops,
        connected_components=nx.number_connected_components(undirected),
        max_geodesic=max_geodesic,
        avg_geodesic=avg_geodesic,
    )


def edges_frame(graph: InteractionGraph) -> pd.DataFrame:
    return pd.DataFrame(
        [(edge.source, edge.target, edge.relation.value, edge.record_id) for edge in graph.edges],
        columns=EDGE_COLUMNS,
    )


def read_edges(path: Union[str, Path]) -> InteractionGraph:
    with open(path, encoding="utf-8") as handle:
        content = "".join(line for line in handle if not line.startswith("#"))

    frame = pd.read_csv(io.StringIO(content), dtype=str, keep_default_na=False)
    missing = set(EDGE_COLUMNS) - set(frame.columns)
    if missing:
        raise InputError(f"Edge list {path} is missing columns: {', '.join(sorted(missing))}")

    return InteractionGraph(
        Edge(row.source, row.target, RelationKind(row.relation), row.record_id)
        for row in frame.itertuples(index=False)
    )


def linked_records(graph: InteractionGraph) -> Dict[str, List[str]]:
    """Distinct record ids per target user, in edge order."""

    linked: Dict[str, Dict[str, None]] = {}
    for edge in graph.edges:
        linked.setdefault(edge.target, {})[edge.record_id] = None
    return {target: list(records) for target, records in linked.items()}

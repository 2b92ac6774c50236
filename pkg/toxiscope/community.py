import heapq
import logging
from typing import Dict, List, Mapping, Optional, Tuple

import networkx as nx

from .exceptions import UndefinedModularityError
from .graph import InteractionGraph

logger = logging.getLogger(__name__)


class CommunityPartition:
    """Vertex -> community id (1-based), labelled G1..Gm by descending size.

    Size ties are ordered by the smallest member username.
    """

    def __init__(self, assignment: Dict[str, int], labels: Dict[int, str], modularity: float):
        self.assignment = assignment
        self.labels = labels
        self.modularity = modularity

    @classmethod
    def from_groups(cls, groups: List[List[str]], modularity: float) -> "CommunityPartition":
        ordered = sorted((sorted(group) for group in groups), key=lambda members: (-len(members), members[0]))
        assignment = {}
        labels = {}
        for community, members in enumerate(ordered, start=1):
            labels[community] = f"G{community}"
            for member in members:
                assignment[member] = community
        return cls(assignment, labels, modularity)

    def label_of(self, vertex: str) -> str:
        return self.labels[self.assignment[vertex]]

    def members(self, community: int) -> List[str]:
        return sorted(vertex for vertex, assigned in self.assignment.items() if assigned == community)

    def sizes(self) -> Dict[int, int]:
        sizes = {community: 0 for community in self.labels}
        for community in self.assignment.values():
            sizes[community] += 1
        return sizes

    def __len__(self) -> int:
        return len(self.labels)

    def __repr__(self):
        return f"CommunityPartition(communities={len(self.labels)}, modularity={self.modularity:.6f})"


def modularity(view: nx.Graph, assignment: Mapping[str, int]) -> float:
    """Q = sum over communities of (e_ii - a_i^2) on a simple undirected graph."""

    m = view.number_of_edges()
    if m == 0:
        raise UndefinedModularityError("Modularity is undefined on a graph without edges")

    internal: Dict[int, int] = {}
    degree_sum: Dict[int, int] = {}
    for u, v in view.edges():
        if assignment[u] == assignment[v]:
            internal[assignment[u]] = internal.get(assignment[u], 0) + 1
    for vertex, degree in view.degree():
        degree_sum[assignment[vertex]] = degree_sum.get(assignment[vertex], 0) + degree

    # exact rational sum scaled by 4m^2
    scaled = sum(4 * m * internal.get(community, 0) - total**2 for community, total in degree_sum.items())
    return scaled / (4 * m * m)


def cnm_communities(graph: InteractionGraph) -> CommunityPartition:
    """Greedy modularity agglomeration with a max-heap of merge gains.

    Gains are kept as integers S = 2m * E_ab - K_a * K_b (proportional to the
    modularity gain), so equal gains compare equal and ties fall to the pair
    with the smallest (min-username, max-username) representatives. Each
    community is represented by its smallest member. Stale heap entries are
    discarded on pop.
    """

    view = graph.undirected_view()
    m = view.number_of_edges()
    if m == 0:
        raise UndefinedModularityError(f"Cannot detect communities on a graph without edges: {graph!r}")

    members: Dict[str, List[str]] = {vertex: [vertex] for vertex in view.nodes()}
    degree: Dict[str, int] = {vertex: view.degree(vertex) for vertex in view.nodes()}
    links: Dict[str, Dict[str, int]] = {vertex: {} for vertex in view.nodes()}
    for u, v in view.edges():
        links[u][v] = links[u].get(v, 0) + 1
        links[v][u] = links[v].get(u, 0) + 1

    def gain(a: str, b: str) -> int:
        return 2 * m * links[a][b] - degree[a] * degree[b]

    heap: List[Tuple[int, str, str]] = []
    for a in links:
        for b in links[a]:
            if a < b:
                heap.append((-gain(a, b), a, b))
    heapq.heapify(heap)

    q_scaled = -sum(value * value for value in degree.values())
    merges = 0
    while heap:
        negative_gain, a, b = heapq.heappop(heap)
        if a not in members or b not in members or b not in links[a] or -negative_gain != gain(a, b):
            continue
        if -negative_gain <= 0:
            break

        q_scaled += 2 * -negative_gain
        merges += 1

        # merge b into a (a < b, so a stays the smallest member)
        members[a].extend(members.pop(b))
        degree[a] += degree.pop(b)
        for neighbor, count in links.pop(b).items():
            del links[neighbor][b]
            if neighbor == a:
                continue
            links[a][neighbor] = links[a].get(neighbor, 0) + count
            links[neighbor][a] = links[a][neighbor]

        for neighbor in links[a]:
            low, high = (a, neighbor) if a < neighbor else (neighbor, a)
            heapq.heappush(heap, (-gain(low, high), low, high))

    q = q_scaled / (4 * m * m)
    partition = CommunityPartition.from_groups(list(members.values()), q)
    logger.info("CNM finished after %d merges: %r", merges, partition)
    return partition


def community_summary(
    partition: CommunityPartition, in_degree: Optional[Mapping[str, int]] = None
) -> List[Dict[str, object]]:
    """One row per community: label, size and the member with the highest in-degree."""

    rows = []
    for community, size in sorted(partition.sizes().items()):
        community_members = partition.members(community)
        if in_degree is not None:
            top_member = min(community_members, key=lambda vertex: (-in_degree.get(vertex, 0), vertex))
        else:
            top_member = community_members[0]
        rows.append(
            {
                "community": community,
                "label": partition.labels[community],
                "size": size,
                "top_member": top_member,
                "top_in_degree": in_degree.get(top_member, 0) if in_degree is not None else 0,
            }
        )
    return rows

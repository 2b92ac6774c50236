import io
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Mapping, Optional, Sequence, Union

import pandas as pd
from pydantic import Field

from . import pydantic_compat
from .corpus import Corpus
from .exceptions import InputError
from .graph import InteractionGraph

if TYPE_CHECKING:
    from .community import CommunityPartition

logger = logging.getLogger(__name__)

HIGH_IMPACT_FOLLOWERS = 50_000


class Metric(str, Enum):
    IN_DEGREE = "in_degree"
    OUT_DEGREE = "out_degree"
    BETWEENNESS = "betweenness"


class AccountType(str, Enum):
    ORG_MEDIA = "org_media"
    ORG_GOVERNMENT = "org_government"
    IND_POLITICIAN = "ind_politician"
    IND_JOURNALIST = "ind_journalist"
    IND_IMPACT = "ind_impact"
    IND_OTHER = "ind_other"


MANUAL_ACCOUNT_TYPES = (
    AccountType.ORG_MEDIA,
    AccountType.ORG_GOVERNMENT,
    AccountType.IND_POLITICIAN,
    AccountType.IND_JOURNALIST,
)


class UserProfile(pydantic_compat.FrozenModel):
    username: str
    verified: bool = False
    followers: int = Field(0, ge=0)
    manual_type: Optional[AccountType] = None


def classify_account(profile: UserProfile) -> AccountType:
    """A manual type wins; otherwise individuals with more than 50,000 followers are high impact."""

    if profile.manual_type is not None:
        return profile.manual_type
    if profile.followers > HIGH_IMPACT_FOLLOWERS:
        return AccountType.IND_IMPACT
    return AccountType.IND_OTHER


def profiles_from_corpus(corpus: Corpus) -> Dict[str, UserProfile]:
    return {
        author: UserProfile(username=author, verified=bool(verified), followers=followers or 0)
        for author, (verified, followers) in corpus.author_attributes().items()
    }


def load_profiles(path: Union[str, Path]) -> Dict[str, UserProfile]:
    """Read a CSV of username,verified,followers,manual_type (manual_type may be blank)."""

    with open(path, encoding="utf-8") as handle:
        content = "".join(line for line in handle if not line.startswith("#"))
    frame = pd.read_csv(io.StringIO(content), dtype=str, keep_default_na=False)
    if "username" not in frame.columns:
        raise InputError(f"Profile table {path} has no username column")

    profiles = {}
    for line_number, row in enumerate(frame.to_dict("records"), start=2):
        manual_type = row.get("manual_type") or None
        try:
            if manual_type is not None and AccountType(manual_type) not in MANUAL_ACCOUNT_TYPES:
                raise ValueError(f"account type '{manual_type}' cannot be assigned manually")
            profiles[row["username"]] = UserProfile(
                username=row["username"],
                verified=str(row.get("verified", "")).strip().lower() in {"true", "1", "yes"},
                followers=int(row.get("followers") or 0),
                manual_type=manual_type,
            )
        except ValueError as e:
            raise InputError(f"Invalid profile on line {line_number} of {path}: {str(e).splitlines()[0]}")
    return profiles


class CentralityTable:
    def __init__(
        self,
        vertices: Sequence[str],
        in_degree: Optional[Dict[str, int]] = None,
        out_degree: Optional[Dict[str, int]] = None,
        betweenness: Optional[Dict[str, float]] = None,
    ):
        self.vertices = tuple(vertices)
        self.in_degree = in_degree
        self.out_degree = out_degree
        self.betweenness = betweenness

    def combine(self, other: "CentralityTable") -> "CentralityTable":
        return CentralityTable(
            self.vertices,
            in_degree=self.in_degree if self.in_degree is not None else other.in_degree,
            out_degree=self.out_degree if self.out_degree is not None else other.out_degree,
            betweenness=self.betweenness if self.betweenness is not None else other.betweenness,
        )

    def values(self, metric: Union[Metric, str]) -> Dict[str, float]:
        metric = Metric(metric)
        values = getattr(self, metric.value)
        if values is None:
            raise InputError(f"Centrality table has no {metric.value} values")
        return values

    def __repr__(self):
        return f"CentralityTable(vertices={len(self.vertices)})"


def degree_centrality(graph: InteractionGraph) -> CentralityTable:
    """In/out degree over unique edges, self-loops excluded."""

    view = graph.directed_view()
    return CentralityTable(
        graph.vertices,
        in_degree={vertex: view.in_degree(vertex) for vertex in graph.vertices},
        out_degree={vertex: view.out_degree(vertex) for vertex in graph.vertices},
    )


def _accumulate_sources(successors: List[List[int]], sources: Sequence[int]) -> List[float]:
    """Brandes dependency accumulation for a block of sources."""

    n = len(successors)
    centrality = [0.0] * n
    for source in sources:
        stack = []
        predecessors: List[List[int]] = [[] for _ in range(n)]
        sigma = [0] * n
        sigma[source] = 1
        distance = [-1] * n
        distance[source] = 0

        queue = deque([source])
        while queue:
            vertex = queue.popleft()
            stack.append(vertex)
            for neighbor in successors[vertex]:
                if distance[neighbor] < 0:
                    distance[neighbor] = distance[vertex] + 1
                    queue.append(neighbor)
                if distance[neighbor] == distance[vertex] + 1:
                    sigma[neighbor] += sigma[vertex]
                    predecessors[neighbor].append(vertex)

        delta = [0.0] * n
        while stack:
            target = stack.pop()
            for vertex in predecessors[target]:
                delta[vertex] += sigma[vertex] / sigma[target] * (1 + delta[target])
            if target != source:
                centrality[target] += delta[target]

    return centrality


def betweenness_centrality(graph: InteractionGraph, threads: int = 1) -> CentralityTable:
    """Unnormalized betweenness over ordered pairs on the directed unique-edge view.

    Sources are split into `threads` contiguous blocks whose partial sums are
    merged in block order, so output depends only on the thread count.
    """

    view = graph.directed_view()
    index = {vertex: position for position, vertex in enumerate(graph.vertices)}
    successors = [sorted(index[target] for target in view.successors(vertex)) for vertex in graph.vertices]

    n = len(successors)
    threads = max(1, min(threads, n or 1))
    block = -(-n // threads) if n else 0
    blocks = [range(start, min(start + block, n)) for start in range(0, n, block)] if n else []

    if threads == 1 or len(blocks) <= 1:
        partials = [_accumulate_sources(successors, range(n))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            partials = list(executor.map(lambda sources: _accumulate_sources(successors, sources), blocks))

    totals = [0.0] * n
    for partial in partials:
        for position, value in enumerate(partial):
            totals[position] += value

    return CentralityTable(graph.vertices, betweenness=dict(zip(graph.vertices, totals)))


def compute_centrality(graph: InteractionGraph, threads: int = 1) -> CentralityTable:
    return degree_centrality(graph).combine(betweenness_centrality(graph, threads=threads))


class RankedUser(pydantic_compat.FrozenModel):
    rank: int
    username: str
    value: float
    cluster: str
    verified: bool
    account_type: AccountType
    categories: Dict[str, int] = Field(default_factory=dict)


def rank_users(
    table: CentralityTable,
    metric: Union[Metric, str],
    k: int,
    partition: Optional["CommunityPartition"] = None,
    profiles: Optional[Mapping[str, UserProfile]] = None,
    user_categories: Optional[Mapping[str, Mapping[str, int]]] = None,
    mask_unverified: bool = False,
) -> List[RankedUser]:
    """Top-k users by `metric` (ties by username) joined with cluster label and account type.

    With `mask_unverified`, usernames of non-verified accounts are replaced by
    `user_<rank>`.
    """

    values = table.values(metric)
    profiles = profiles or {}
    ranked = sorted(values.items(), key=lambda item: (-item[1], item[0]))[: max(k, 0)]

    rows = []
    for rank, (username, value) in enumerate(ranked, start=1):
        profile = profiles.get(username) or UserProfile(username=username)
        categories = dict(user_categories.get(username, {})) if user_categories else {}
        rows.append(
            RankedUser(
                rank=rank,
                username=username if profile.verified or not mask_unverified else f"user_{rank}",
                value=value,
                cluster=partition.label_of(username) if partition is not None else "",
                verified=profile.verified,
                account_type=classify_account(profile),
                categories=categories,
            )
        )
    return rows

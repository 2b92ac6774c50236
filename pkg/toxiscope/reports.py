import hashlib
import json
import logging
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

try:
    # Python 3.8+
    import importlib.metadata as _metadata
except ModuleNotFoundError:  # pragma: no cover
    import importlib_metadata as _metadata  # type: ignore[no-redef, unused-ignore]

import networkx
import numpy as np
import pandas as pd
import pydantic
import sklearn

from . import pydantic_compat
from .centrality import CentralityTable, RankedUser, UserProfile, classify_account
from .community import CommunityPartition
from .corpus import Corpus, serialize_records
from .graph import NetworkStats
from .topics import CATEGORY_NAMES, UNASSIGNED_TOPIC, TopicModel
from .toxicity import ToxicityScore
from .trends import CompositionTable, DailySeries

try:
    __version__ = _metadata.version("toxiscope")
except _metadata.PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

logger = logging.getLogger(__name__)

CATEGORY_CODES = sorted(CATEGORY_NAMES)
NETWORK_STATS_COLUMNS = [
    "vertices",
    "total_edges",
    "duplicated_edges",
    "unique_edges",
    "self_loops",
    "connected_components",
    "max_geodesic",
    "avg_geodesic",
]
CENTRALITY_COLUMNS = ["vertex", "in_degree", "out_degree", "betweenness", "cluster", "account_type"]
PARTITION_COLUMNS = ["vertex", "community", "label"]


class ReportHeader:
    def __init__(self, config_hash: str, seed: int, version: str = __version__):
        self.config_hash = config_hash
        self.seed = seed
        self.version = version

    @property
    def line(self) -> str:
        return f"# toxiscope {self.version} config={self.config_hash} seed={self.seed}"

    def __str__(self):
        return self.line


class ReportWriter:
    """Writes report files under one directory, each starting with the header comment."""

    def __init__(self, output_dir: Union[str, Path], header: ReportHeader):
        self.output_dir = Path(output_dir)
        self.header = header
        self.written: List[Path] = []

    def _path(self, name: str) -> Path:
        path = self.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def _write_text(self, name: str, body: str) -> Path:
        path = self._path(name)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(self.header.line + "\n")
            handle.write(body)
        if path not in self.written:
            self.written.append(path)
        logger.debug("Wrote %s", path)
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        return self._write_text(name, frame.to_csv(index=False, lineterminator="\n"))

    def write_corpus(self, name: str, corpus: Corpus) -> Path:
        return self._write_text(name, serialize_records(corpus))

    def checksums(self) -> Dict[str, str]:
        sums = {}
        for path in self.written:
            sums[path.relative_to(self.output_dir).as_posix()] = hashlib.sha256(path.read_bytes()).hexdigest()
        return dict(sorted(sums.items()))

    def write_manifest(self, seeds: Mapping[str, int], started_at: datetime, **extra: Any) -> Path:
        manifest = {
            "toxiscope": self.header.version,
            "config_hash": self.header.config_hash,
            "seed": self.header.seed,
            "stage_seeds": dict(sorted(seeds.items())),
            "versions": {
                "numpy": np.__version__,
                "pandas": pd.__version__,
                "networkx": networkx.__version__,
                "pydantic": pydantic.VERSION,
                "scikit-learn": sklearn.__version__,
            },
            "started_at": started_at.isoformat(),
            "finished_at": datetime.now(timezone.utc).isoformat(),
            "files": self.checksums(),
        }
        manifest.update(extra)

        path = self._path("manifest.json")
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def read_report_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, skiprows=1, dtype=str, keep_default_na=False)


# toxicity


def scores_frame(scores: Mapping[str, ToxicityScore]) -> pd.DataFrame:
    return pd.DataFrame(
        [(record_id, score.value, score.provider.value) for record_id, score in scores.items()],
        columns=["record_id", "toxicity", "provider"],
    )


# topics


def topics_frame(model: TopicModel, categories: Optional[Mapping[int, str]] = None) -> pd.DataFrame:
    width = max((len(words) for words in model.keywords.values()), default=0)
    sizes = model.sizes()
    rows = []
    for topic in range(model.k):
        words = model.keywords.get(topic, [])
        rows.append(
            [topic, sizes[topic], (categories or {}).get(topic, "")]
            + [words[index] if index < len(words) else "" for index in range(width)]
            + [model.label(topic)]
        )
    columns = ["topic_id", "size", "category"] + [f"keyword_{index + 1}" for index in range(width)] + ["label"]
    return pd.DataFrame(rows, columns=columns)


def assignments_frame(corpus: Corpus, model: TopicModel, categories: Sequence[Optional[str]]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            (record.id, int(topic), category or "")
            for record, topic, category in zip(corpus, model.assignments, categories)
        ],
        columns=["record_id", "topic_id", "category"],
    )


def topic_map_frame(corpus: Corpus, model: TopicModel, categories: Sequence[Optional[str]]) -> pd.DataFrame:
    """2-D coordinates for plotting; records without an embedding are left out."""

    rows = []
    projection = model.projection
    for position, (record, topic, category) in enumerate(zip(corpus, model.assignments, categories)):
        if topic == UNASSIGNED_TOPIC or projection is None or np.isnan(projection[position]).any():
            continue
        rows.append((record.id, float(projection[position][0]), float(projection[position][1]), int(topic), category))
    return pd.DataFrame(rows, columns=["record_id", "x", "y", "topic_id", "category"])


# network


def network_stats_frame(stats: NetworkStats) -> pd.DataFrame:
    data = pydantic_compat.model_dump(stats)
    data["avg_geodesic"] = f"{stats.avg_geodesic:.4f}"
    return pd.DataFrame([[data[column] for column in NETWORK_STATS_COLUMNS]], columns=NETWORK_STATS_COLUMNS)


def centrality_frame(
    table: CentralityTable,
    partition: Optional[CommunityPartition],
    profiles: Mapping[str, UserProfile],
) -> pd.DataFrame:
    rows = []
    for vertex in table.vertices:
        profile = profiles.get(vertex) or UserProfile(username=vertex)
        rows.append(
            (
                vertex,
                table.values("in_degree")[vertex],
                table.values("out_degree")[vertex],
                table.values("betweenness")[vertex],
                partition.label_of(vertex) if partition is not None else "",
                classify_account(profile).value,
            )
        )
    return pd.DataFrame(rows, columns=CENTRALITY_COLUMNS)


def partition_frame(partition: Optional[CommunityPartition]) -> pd.DataFrame:
    if partition is None:
        return pd.DataFrame([], columns=PARTITION_COLUMNS)
    rows = [
        (vertex, community, partition.labels[community]) for vertex, community in sorted(partition.assignment.items())
    ]
    return pd.DataFrame(rows, columns=PARTITION_COLUMNS)


def communities_frame(summary: Sequence[Mapping[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(list(summary), columns=["community", "label", "size", "top_member", "top_in_degree"])


def ranking_frame(rows: Sequence[RankedUser], integer_values: bool = False) -> pd.DataFrame:
    records = []
    for row in rows:
        value: Union[int, float] = int(row.value) if integer_values else row.value
        records.append(
            [row.rank, row.username, value, row.cluster, row.verified, row.account_type.value]
            + [row.categories.get(code, 0) for code in CATEGORY_CODES]
        )
    columns = ["rank", "username", "value", "cluster", "verified", "account_type"] + CATEGORY_CODES
    return pd.DataFrame(records, columns=columns)


# trends


def daily_volume_frame(series: DailySeries) -> pd.DataFrame:
    frame = series.frame.copy()
    frame["date"] = [day.isoformat() for day in frame["date"]]
    return frame[["date", "category", "count"]]


def weekly_shares_frame(table: CompositionTable) -> pd.DataFrame:
    return table.weekly[["iso_week", "category", "share"]]


def overall_shares_frame(table: CompositionTable) -> pd.DataFrame:
    return pd.DataFrame(sorted(table.overall.items()), columns=["category", "share"])


def hashtags_frame(counts: Iterable[Tuple[str, int]]) -> pd.DataFrame:
    return pd.DataFrame(list(counts), columns=["tag", "count"])


def user_categories_frame(tallies: Mapping[str, Mapping[str, int]]) -> pd.DataFrame:
    rows = [
        [username] + [counts.get(code, 0) for code in CATEGORY_CODES] for username, counts in sorted(tallies.items())
    ]
    return pd.DataFrame(rows, columns=["username"] + CATEGORY_CODES)


def peak_days_frame(peaks: Iterable[Tuple[date, int]]) -> pd.DataFrame:
    return pd.DataFrame([(day.isoformat(), count) for day, count in peaks], columns=["date", "count"])

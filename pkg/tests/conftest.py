import json
import os
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, List, Tuple

import pytest
from moto import mock_dynamodb

from toxiscope.corpus import Corpus, RelationKind, TweetRecord, parse_records
from toxiscope.graph import Edge, InteractionGraph

os.environ["AWS_DEFAULT_REGION"] = "us-east-1"
os.environ.setdefault("AWS_ACCESS_KEY_ID", "testing")
os.environ.setdefault("AWS_SECRET_ACCESS_KEY", "testing")

DATA_DIR = Path(__file__).resolve().parent / "data"
BASE_TIME = datetime(2022, 5, 6, tzinfo=timezone.utc)


@pytest.fixture(autouse=True)
def mock_dynamo():
    with mock_dynamodb():
        yield


def make_record(id: str, author: str, text: str, minutes: int = 0, **kwargs) -> TweetRecord:
    return TweetRecord.create(id, author, BASE_TIME + timedelta(minutes=minutes), text, **kwargs)


def make_corpus(rows: Iterable[Tuple[str, str]]) -> Corpus:
    """Corpus from (author, text) rows with ids 1..n, one minute apart."""

    return Corpus(make_record(str(index), author, text, minutes=index) for index, (author, text) in enumerate(rows, 1))


def make_graph(pairs: Iterable[Tuple[str, str]], vertices: Iterable[str] = ()) -> InteractionGraph:
    return InteractionGraph(
        (Edge(source, target, RelationKind.MENTION, str(index)) for index, (source, target) in enumerate(pairs)),
        vertices=vertices,
    )


def jsonl(rows: List[dict]) -> List[str]:
    return [json.dumps(row) + "\n" for row in rows]


def write_jsonl(path: Path, rows: List[dict]) -> Path:
    path.write_text("".join(jsonl(rows)), encoding="utf-8")
    return path


# bob->alice twice, carol->alice, dave->dave
STATS_FIXTURE_ROWS = [
    {"id": "1", "user": "bob", "created_at": "2022-05-06T00:00:00Z", "text": "@alice hi"},
    {"id": "2", "user": "bob", "created_at": "2022-05-06T01:00:00Z", "text": "@alice again"},
    {"id": "3", "user": "carol", "created_at": "2022-05-06T02:00:00Z", "text": "@alice hello"},
    {"id": "4", "user": "dave", "created_at": "2022-05-06T03:00:00Z", "text": "@dave note to self"},
]


@pytest.fixture
def stats_graph() -> InteractionGraph:
    return make_graph([("b", "a"), ("b", "a"), ("c", "a"), ("d", "d")])


@pytest.fixture
def two_triangles() -> InteractionGraph:
    return make_graph([("a", "b"), ("b", "c"), ("c", "a"), ("d", "e"), ("e", "f"), ("f", "d"), ("c", "d")])


@pytest.fixture(scope="session")
def synthetic_corpus() -> Corpus:
    with open(DATA_DIR / "synthetic_500.jsonl", encoding="utf-8") as handle:
        return parse_records(handle)

import json
import logging
import re
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, NamedTuple, Optional, Tuple, Union

import pydantic
from pydantic import Field, StrictBool, StrictInt, StrictStr

from . import pydantic_compat
from .exceptions import EmptyCorpusError, InputError

logger = logging.getLogger(__name__)

HASHTAG_RE = re.compile(r"#(\w+)")
MENTION_RE = re.compile(r"(?<!\w)@([A-Za-z0-9_]{1,15})(?![A-Za-z0-9_])")
RETWEET_RE = re.compile(r"^RT @([A-Za-z0-9_]{1,15})(?![A-Za-z0-9_])")
RETWEET_MARKER_RE = re.compile(r"^\s*RT @[A-Za-z0-9_]{1,15}:?(?=\s|$)|^\s*RT(?=\s|$)")
WHITESPACE_RE = re.compile(r"\s+")
TIMESTAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}[Tt ]\d{2}:\d{2}:\d{2}(\.\d{3}|\.\d{6})?([Zz]|[+-]\d{2}:\d{2})?$")

_KNOWN_FIELDS = ("id", "user", "created_at", "text", "verified", "followers")


class RelationKind(str, Enum):
    RETWEET = "retweet"
    MENTION = "mention"
    NONE = "none"


class Relation(NamedTuple):
    kind: RelationKind
    targets: Tuple[str, ...]


def extract_hashtags(text: str) -> List[str]:
    return [tag.lower() for tag in HASHTAG_RE.findall(text)]


def extract_mentions(text: str) -> List[str]:
    return MENTION_RE.findall(text)


def _retweet_target(text: str) -> Optional[str]:
    match = RETWEET_RE.match(text)
    return match.group(1) if match else None


def clean_for_embedding(text: str) -> str:
    """Strip platform markup (retweet marker, mentions, links) before embedding."""

    text = RETWEET_MARKER_RE.sub(" ", text)
    text = MENTION_RE.sub(" ", text)
    tokens = [token for token in WHITESPACE_RE.split(text) if token and not token.startswith("http")]
    return " ".join(tokens)


class _RawTweet(pydantic_compat.FrozenModel):
    id: StrictStr = Field(..., min_length=1)
    user: StrictStr = Field(..., min_length=1)
    created_at: StrictStr
    text: StrictStr
    verified: Optional[StrictBool] = None
    followers: Optional[StrictInt] = Field(None, ge=0)


def _parse_timestamp(value: str) -> datetime:
    """Full RFC 3339 date-time; a missing offset is read as UTC."""

    if not TIMESTAMP_RE.match(value):
        raise ValueError(f"created_at '{value}' is not an RFC 3339 date-time")
    return _as_utc(datetime.fromisoformat(value[:-1] + "+00:00" if value[-1] in "Zz" else value))


def _as_utc(value: datetime) -> datetime:
    # naive timestamps are taken to already be UTC
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


class TweetRecord(pydantic_compat.FrozenModel):
    id: str = Field(..., min_length=1)
    author: str = Field(..., min_length=1)
    created_at: datetime
    text: str
    hashtags: Tuple[str, ...] = ()
    mentions: Tuple[str, ...] = ()
    retweet_of: Optional[str] = None
    verified: Optional[bool] = None
    followers: Optional[int] = Field(None, ge=0)
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def create(
        cls,
        id: str,
        author: str,
        created_at: datetime,
        text: str,
        *,
        verified: Optional[bool] = None,
        followers: Optional[int] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> "TweetRecord":
        """Build a record, deriving hashtags, mentions and the retweet target from the text."""

        return cls(
            id=id,
            author=author.lstrip("@"),
            created_at=_as_utc(created_at),
            text=text,
            hashtags=tuple(extract_hashtags(text)),
            mentions=tuple(extract_mentions(text)),
            retweet_of=_retweet_target(text),
            verified=verified,
            followers=followers,
            metadata=metadata or {},
        )

    @property
    def is_retweet(self) -> bool:
        return self.retweet_of is not None

    def to_json_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "id": self.id,
            "user": self.author,
            "created_at": self.created_at.isoformat().replace("+00:00", "Z"),
            "text": self.text,
        }
        if self.verified is not None:
            data["verified"] = self.verified
        if self.followers is not None:
            data["followers"] = self.followers
        data.update(self.metadata)
        return data


def classify_relation(record: TweetRecord) -> Relation:
    if record.retweet_of is not None:
        return Relation(RelationKind.RETWEET, (record.retweet_of,))

    if record.mentions:
        return Relation(RelationKind.MENTION, tuple(record.mentions))

    return Relation(RelationKind.NONE, ())


def mention_targets(record: TweetRecord) -> Tuple[str, ...]:
    """Mentions outside the retweet prefix (the prefix handle becomes a retweet edge instead)."""

    if record.retweet_of is not None:
        return tuple(record.mentions[1:])
    return tuple(record.mentions)


class Corpus:
    def __init__(
        self,
        records: Iterable[TweetRecord],
        dropped_duplicates: int = 0,
        dropped_invalid: int = 0,
        dropped_network_duplicates: int = 0,
    ):
        ordered = sorted(records, key=lambda record: (record.created_at, record.id))
        self.records: Tuple[TweetRecord, ...] = tuple(ordered)
        self.dropped_duplicates = dropped_duplicates
        self.dropped_invalid = dropped_invalid
        self.dropped_network_duplicates = dropped_network_duplicates

        seen = set()
        for record in self.records:
            if record.id in seen:
                raise InputError(f"Duplicate record id '{record.id}' in corpus", record_id=record.id)
            seen.add(record.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TweetRecord]:
        return iter(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return self.records == other.records

    def __str__(self):
        return (
            f"Corpus: {len(self.records)} records "
            f"(dropped_duplicates={self.dropped_duplicates}, dropped_invalid={self.dropped_invalid})"
        )

    def __repr__(self):
        return str(self)

    def by_id(self) -> Dict[str, TweetRecord]:
        return {record.id: record for record in self.records}

    def replace_records(self, records: Iterable[TweetRecord], **counters: int) -> "Corpus":
        kwargs = {
            "dropped_duplicates": self.dropped_duplicates,
            "dropped_invalid": self.dropped_invalid,
            "dropped_network_duplicates": self.dropped_network_duplicates,
        }
        kwargs.update(counters)
        return Corpus(records, **kwargs)

    def author_attributes(self) -> Dict[str, Tuple[Optional[bool], Optional[int]]]:
        """Latest known (verified, followers) per author, in corpus order."""

        attributes: Dict[str, Tuple[Optional[bool], Optional[int]]] = {}
        for record in self.records:
            verified, followers = attributes.get(record.author, (None, None))
            if record.verified is not None:
                verified = record.verified
            if record.followers is not None:
                followers = record.followers
            attributes[record.author] = (verified, followers)
        return attributes


def _record_from_line(data: Any) -> TweetRecord:
    if not isinstance(data, dict):
        raise ValueError("line is not a JSON object")

    raw = pydantic_compat.model_validate(_RawTweet, data)
    metadata = {key: value for key, value in data.items() if key not in _KNOWN_FIELDS}
    return TweetRecord.create(
        raw.id,
        raw.user,
        _parse_timestamp(raw.created_at),
        raw.text,
        verified=raw.verified,
        followers=raw.followers,
        metadata=metadata,
    )


def parse_records(stream: Iterable[Union[str, bytes]]) -> Corpus:
    """Parse JSON Lines into a Corpus.

    Lines may be text or UTF-8 bytes. Blank lines and `#` header comments are
    skipped. Duplicate ids keep the first occurrence; malformed lines
    (including bytes that are not UTF-8) are counted and logged with their
    line number. Raises EmptyCorpusError when nothing valid remains.
    """

    records: Dict[str, TweetRecord] = {}
    dropped_duplicates = 0
    dropped_invalid = 0

    for line_number, line in enumerate(stream, start=1):
        try:
            stripped = (line.decode("utf-8") if isinstance(line, bytes) else line).strip()
            if not stripped or stripped.startswith("#"):
                continue
            record = _record_from_line(json.loads(stripped))
        except (ValueError, pydantic.ValidationError) as e:
            dropped_invalid += 1
            logger.warning("Skipping invalid record on line %d: %s", line_number, str(e).splitlines()[0])
            continue

        if record.id in records:
            dropped_duplicates += 1
            logger.debug("Skipping duplicate id %s on line %d", record.id, line_number)
            continue

        records[record.id] = record

    if not records:
        raise EmptyCorpusError("No valid records found in input")

    logger.info(
        "Parsed %d records (%d duplicates, %d invalid)",
        len(records),
        dropped_duplicates,
        dropped_invalid,
    )
    return Corpus(records.values(), dropped_duplicates=dropped_duplicates, dropped_invalid=dropped_invalid)


def read_corpus(path: Union[str, Path]) -> Corpus:
    with open(path, "rb") as handle:
        return parse_records(handle)


def serialize_records(corpus: Corpus) -> str:
    return "".join(json.dumps(record.to_json_dict(), ensure_ascii=False, sort_keys=True) + "\n" for record in corpus)


def dedup_for_network(corpus: Corpus) -> Corpus:
    """Drop records repeating an earlier (author, text) pair."""

    seen = set()
    kept = []
    for record in corpus:
        key = (record.author, record.text)
        if key in seen:
            continue
        seen.add(key)
        kept.append(record)

    removed = len(corpus) - len(kept)
    if removed:
        logger.info("Removed %d duplicate (author, text) records before network build", removed)
    return corpus.replace_records(kept, dropped_network_duplicates=removed)

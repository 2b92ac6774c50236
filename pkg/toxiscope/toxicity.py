import logging
import os
import re
import threading
import time
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from enum import Enum
from typing import TYPE_CHECKING, Dict, List, Literal, Mapping, Optional, Sequence

import requests
from pydantic import Field

from . import pydantic_compat
from .corpus import Corpus
from .exceptions import InputError, ProtocolError, ProviderError

if TYPE_CHECKING:
    from .cache import ScoreCache

logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze"
API_KEY_ENV_VAR = "TOXISCOPE_API_KEY"

RETRYABLE_STATUS_CODES = frozenset({429, 500, 502, 503, 504})

# Test fixture only: a handful of insults so the stub produces a usable score
# spread. It makes no claim to approximate any real toxicity model.
STUB_LEXICON = frozenset(
    {
        "idiot",
        "idiots",
        "stupid",
        "moron",
        "morons",
        "dumb",
        "hate",
        "disgusting",
        "pathetic",
        "trash",
        "garbage",
        "liar",
        "liars",
        "loser",
        "losers",
        "scum",
        "shut",
        "clown",
        "clowns",
        "crap",
        "damn",
        "hell",
        "fool",
        "fools",
        "ugly",
        "sick",
    }
)
STUB_TERMS_TO_SATURATE = 3

_WORD_RE = re.compile(r"\b\w+\b")


class ScoreProvider(str, Enum):
    REMOTE = "remote"
    STUB = "stub"


class ToxicityScore(pydantic_compat.FrozenModel):
    record_id: str
    value: float = Field(..., ge=0, le=1)
    provider: ScoreProvider


class CacheConfig(pydantic_compat.BaseModel):
    kind: Literal["jsonl", "dynamodb", "none"] = "jsonl"
    path: Optional[str] = None
    table_name: str = "toxiscope_scores"
    region: Optional[str] = None
    host: Optional[str] = None


class ToxicityConfig(pydantic_compat.BaseModel):
    threshold: float = Field(0.7, ge=0, le=1)
    provider: ScoreProvider = ScoreProvider.STUB
    endpoint: str = DEFAULT_ENDPOINT
    api_key: Optional[str] = None
    max_retries: int = Field(5, ge=0)
    requests_per_second: float = Field(1.0, gt=0)
    max_concurrency: int = Field(4, ge=1)
    timeout: float = Field(30.0, gt=0)
    backoff_seconds: float = Field(0.5, ge=0)
    cache: CacheConfig = Field(default_factory=CacheConfig)

    def resolve_api_key(self) -> Optional[str]:
        return self.api_key or os.getenv(API_KEY_ENV_VAR)


def _default_ids(texts: Sequence[str], ids: Optional[Sequence[str]]) -> List[str]:
    if ids is None:
        return [str(index) for index in range(len(texts))]
    if len(ids) != len(texts):
        raise InputError(f"Got {len(ids)} ids for {len(texts)} texts")
    return list(ids)


def stub_value(text: str) -> float:
    matched = sum(1 for word in _WORD_RE.findall(text.lower()) if word in STUB_LEXICON)
    return min(1.0, matched / STUB_TERMS_TO_SATURATE)


def score_stub(texts: Sequence[str], ids: Optional[Sequence[str]] = None) -> List[ToxicityScore]:
    return [
        ToxicityScore(record_id=record_id, value=stub_value(text), provider=ScoreProvider.STUB)
        for record_id, text in zip(_default_ids(texts, ids), texts)
    ]


class RateLimiter:
    """Spaces calls so that no more than `per_second` start in any second."""

    def __init__(self, per_second: float):
        self.interval = 1.0 / per_second
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def acquire(self):
        with self._lock:
            now = time.monotonic()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + self.interval

        if wait > 0:
            time.sleep(wait)


def parse_toxicity_response(body: object, index: int) -> float:
    try:
        value = body["attributeScores"]["TOXICITY"]["summaryScore"]["value"]  # type: ignore[index]
    except (KeyError, TypeError):
        raise ProtocolError(f"Response for text {index} has no TOXICITY summary score", index=index)

    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolError(f"Non-numeric toxicity score {value!r} for text {index}", index=index)

    if not 0 <= value <= 1:
        raise ProtocolError(f"Toxicity score {value} for text {index} is outside [0, 1]", index=index)

    return float(value)


class RemoteToxicityClient:
    def __init__(self, config: ToxicityConfig, session: Optional[requests.Session] = None):
        self.config = config
        self.session = session or requests.Session()
        self.rate_limiter = RateLimiter(config.requests_per_second)

    def _request_body(self, text: str) -> dict:
        return {"comment": {"text": text}, "requestedAttributes": {"TOXICITY": {}}}

    def score_one(self, index: int, text: str) -> float:
        params = {}
        api_key = self.config.resolve_api_key()
        if api_key:
            params["key"] = api_key

        backoff_sleep = self.config.backoff_seconds
        attempts = 0
        while True:
            self.rate_limiter.acquire()
            try:
                response = self.session.post(
                    self.config.endpoint,
                    params=params,
                    json=self._request_body(text),
                    timeout=self.config.timeout,
                )
                status = response.status_code
                failure = f"HTTP {status}"
            except (requests.ConnectionError, requests.Timeout) as e:
                response = None
                status = None
                failure = type(e).__name__

            if response is not None and status == 200:
                try:
                    body = response.json()
                except ValueError:
                    raise ProtocolError(f"Response for text {index} is not valid JSON", index=index)
                return parse_toxicity_response(body, index)

            if status is not None and status not in RETRYABLE_STATUS_CODES:
                raise ProviderError(f"Toxicity request for text {index} failed with {failure}", index=index)

            attempts += 1
            if attempts > self.config.max_retries:
                raise ProviderError(
                    f"Exceeded max retries ({self.config.max_retries}) scoring text {index}: {failure}",
                    index=index,
                )

            logger.info("Retrying text %d after %s (sleeping %.2fs)", index, failure, backoff_sleep)
            time.sleep(backoff_sleep)
            backoff_sleep *= 2

    def score(self, texts: Sequence[str]) -> List[float]:
        """Score `texts` in input order; the first failure stops texts not yet sent."""

        if not texts:
            return []

        stop = threading.Event()

        def score_until_failure(index: int, text: str) -> Optional[float]:
            if stop.is_set():
                return None
            try:
                return self.score_one(index, text)
            except Exception:
                stop.set()
                raise

        workers = min(self.config.max_concurrency, len(texts))
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(score_until_failure, index, text) for index, text in enumerate(texts)]
            wait(futures, return_when=FIRST_EXCEPTION)
            if stop.is_set():
                for future in futures:
                    future.cancel()
                wait(futures)
                # the lowest failing index is reported
                raise next(future.exception() for future in futures if not future.cancelled() and future.exception())

            values = [future.result() for future in futures]

        logger.debug("Scored %d texts with %d workers", len(values), workers)
        return [value for value in values if value is not None]


def score_remote(
    texts: Sequence[str],
    config: ToxicityConfig,
    ids: Optional[Sequence[str]] = None,
    session: Optional[requests.Session] = None,
) -> List[ToxicityScore]:
    if not texts:
        raise InputError("score_remote requires at least one text")

    record_ids = _default_ids(texts, ids)
    values = RemoteToxicityClient(config, session=session).score(texts)
    return [
        ToxicityScore(record_id=record_id, value=value, provider=ScoreProvider.REMOTE)
        for record_id, value in zip(record_ids, values)
    ]


def score_corpus(
    corpus: Corpus,
    config: ToxicityConfig,
    cache: Optional["ScoreCache"] = None,
    session: Optional[requests.Session] = None,
) -> Dict[str, ToxicityScore]:
    """Score every record, querying the provider only for ids the cache lacks for `config.provider`."""

    scores: Dict[str, ToxicityScore] = {}
    if cache is not None:
        provider = ScoreProvider(config.provider)
        cached = cache.get_many([record.id for record in corpus])
        scores.update((record_id, score) for record_id, score in cached.items() if score.provider == provider)

    missing = [record for record in corpus if record.id not in scores]
    logger.info("Scoring %d records (%d cached)", len(missing), len(scores))

    if missing:
        texts = [record.text for record in missing]
        ids = [record.id for record in missing]
        if config.provider == ScoreProvider.REMOTE:
            fresh = score_remote(texts, config, ids=ids, session=session)
        else:
            fresh = score_stub(texts, ids=ids)

        if cache is not None:
            cache.put_many(fresh)
        scores.update((score.record_id, score) for score in fresh)

    return {record.id: scores[record.id] for record in corpus}


def filter_toxic(corpus: Corpus, scores: Mapping[str, ToxicityScore], threshold: float) -> Corpus:
    """Keep records scoring at or above `threshold`, in corpus order."""

    kept = []
    for record in corpus:
        score = scores.get(record.id)
        if score is None:
            raise InputError(f"Missing toxicity score for record '{record.id}'", record_id=record.id)
        if score.value >= threshold:
            kept.append(record)

    logger.info("Kept %d of %d records at threshold %s", len(kept), len(corpus), threshold)
    return corpus.replace_records(kept)

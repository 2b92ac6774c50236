import json
import logging
import os
import time
from decimal import Decimal
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Union

import boto3

from .exceptions import ProviderError
from .toxicity import CacheConfig, ScoreProvider, ToxicityScore

logger = logging.getLogger(__name__)

REGION_ENV_VAR = "TOXISCOPE_REGION"
HOST_ENV_VAR = "TOXISCOPE_HOST"

# DynamoDB request limits
BATCH_GET_MAX_KEYS = 100
BATCH_WRITE_MAX_ITEMS = 25
RETRY_BASE_SECONDS = 0.05


class ScoreCache:
    def get_many(self, record_ids: Sequence[str]) -> Dict[str, ToxicityScore]:  # pragma: no cover
        raise NotImplementedError

    def put_many(self, scores: Iterable[ToxicityScore]):  # pragma: no cover
        raise NotImplementedError


class JsonlScoreCache(ScoreCache):
    """Scores keyed by record id in a JSON Lines file of {id, value, provider}."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._scores: Optional[Dict[str, ToxicityScore]] = None

    def _load(self) -> Dict[str, ToxicityScore]:
        if self._scores is None:
            self._scores = {}
            if self.path.exists():
                with open(self.path, encoding="utf-8") as handle:
                    for line in handle:
                        line = line.strip()
                        if not line or line.startswith("#"):
                            continue
                        data = json.loads(line)
                        self._scores[data["id"]] = ToxicityScore(
                            record_id=data["id"],
                            value=data["value"],
                            provider=ScoreProvider(data["provider"]),
                        )
            logger.debug("Loaded %d cached scores from %s", len(self._scores), self.path)
        return self._scores

    def get_many(self, record_ids: Sequence[str]) -> Dict[str, ToxicityScore]:
        scores = self._load()
        return {record_id: scores[record_id] for record_id in record_ids if record_id in scores}

    def put_many(self, scores: Iterable[ToxicityScore]):
        cached = self._load()
        # later lines win on load
        new_scores = [
            score
            for score in scores
            if score.record_id not in cached or cached[score.record_id].provider != score.provider
        ]
        if not new_scores:
            return

        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as handle:
            for score in new_scores:
                line = {"id": score.record_id, "value": score.value, "provider": score.provider.value}
                handle.write(json.dumps(line, sort_keys=True) + "\n")
                cached[score.record_id] = score


def _chunks(items: Sequence, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


class DynamoScoreCache(ScoreCache):
    """Scores shared across runs in a DynamoDB table with hash key `id`."""

    def __init__(
        self,
        table_name: str,
        region: Optional[str] = None,
        host: Optional[str] = None,
        max_attempts: int = 5,
    ):
        self.table_name = table_name
        self.region = region or os.getenv(REGION_ENV_VAR)
        self.host = host or os.getenv(HOST_ENV_VAR)
        self.max_attempts = max_attempts
        self._resource = None

    def _boto3_kwargs(self) -> dict:
        kwargs = {}
        if self.region:
            kwargs["region_name"] = self.region
        if self.host:
            kwargs["endpoint_url"] = self.host
        return kwargs

    def _dynamodb_resource(self):
        if self._resource is None:
            self._resource = boto3.resource("dynamodb", **self._boto3_kwargs())
        return self._resource

    def _send_batch(self, operation: Callable[..., dict], request_items: dict, unprocessed_key: str) -> List[dict]:
        """Send one batch request, resending whatever DynamoDB hands back under `unprocessed_key`."""

        responses = [operation(RequestItems=request_items)]
        for attempt in range(1, self.max_attempts + 1):
            pending = responses[-1].get(unprocessed_key)
            if not pending:
                return responses
            delay = RETRY_BASE_SECONDS * 2 ** (attempt - 1)
            logger.debug("Resending %s for %s after %.2fs", unprocessed_key, self.table_name, delay)
            time.sleep(delay)
            responses.append(operation(RequestItems=pending))

        if responses[-1].get(unprocessed_key):
            raise ProviderError(f"DynamoDB left {unprocessed_key} unprocessed after {self.max_attempts} retries")
        return responses

    def create_table(self, wait: bool = True):
        """Creates the score table (primarily for testing, limited configuration supported)"""

        table = self._dynamodb_resource().create_table(
            TableName=self.table_name,
            KeySchema=[{"AttributeName": "id", "KeyType": "HASH"}],
            AttributeDefinitions=[{"AttributeName": "id", "AttributeType": "S"}],
            ProvisionedThroughput={"ReadCapacityUnits": 1, "WriteCapacityUnits": 1},
        )
        if wait:
            table.wait_until_exists()

    def get_many(self, record_ids: Sequence[str]) -> Dict[str, ToxicityScore]:
        scores: Dict[str, ToxicityScore] = {}
        unique_ids = sorted(set(record_ids))
        for chunk in _chunks(unique_ids, BATCH_GET_MAX_KEYS):
            responses = self._send_batch(
                self._dynamodb_resource().batch_get_item,
                {self.table_name: {"Keys": [{"id": record_id} for record_id in chunk]}},
                "UnprocessedKeys",
            )
            for response in responses:
                for item in response["Responses"][self.table_name]:
                    scores[item["id"]] = ToxicityScore(
                        record_id=item["id"],
                        value=float(item["value"]),
                        provider=ScoreProvider(item["provider"]),
                    )
        return scores

    def put_many(self, scores: Iterable[ToxicityScore]):
        # one request may not carry the same key twice
        by_id = {score.record_id: score for score in scores}
        requests = [
            {
                "PutRequest": {
                    "Item": {
                        "id": score.record_id,
                        "value": Decimal(str(score.value)),
                        "provider": score.provider.value,
                    }
                }
            }
            for score in by_id.values()
        ]
        for chunk in _chunks(requests, BATCH_WRITE_MAX_ITEMS):
            self._send_batch(
                self._dynamodb_resource().batch_write_item,
                {self.table_name: chunk},
                "UnprocessedItems",
            )


def open_cache(config: CacheConfig, default_path: Optional[Path] = None) -> Optional[ScoreCache]:
    if config.kind == "none":
        return None
    if config.kind == "dynamodb":
        return DynamoScoreCache(config.table_name, region=config.region, host=config.host)

    path = config.path or default_path
    if path is None:
        return None
    return JsonlScoreCache(path)

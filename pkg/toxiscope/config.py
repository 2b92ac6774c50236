import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import Field, ValidationError

from . import pydantic_compat
from .corpus import RelationKind
from .exceptions import ConfigError
from .topics import TopicConfig
from .toxicity import ToxicityConfig

logger = logging.getLogger(__name__)

SECRET_KEYS = {"api_key"}


class RunConfig(pydantic_compat.BaseModel):
    input_path: str
    output_dir: str
    toxicity: ToxicityConfig = Field(default_factory=ToxicityConfig)
    topics: TopicConfig = Field(default_factory=TopicConfig)
    category_map_path: Optional[str] = None
    profiles_path: Optional[str] = None
    relations: List[RelationKind] = Field(default_factory=lambda: [RelationKind.MENTION, RelationKind.RETWEET])
    seed: int = 0
    threads: int = Field(1, ge=1)
    top_k: int = Field(30, ge=0)
    directed_geodesics: bool = False
    mask_unverified: bool = False

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        try:
            config = pydantic_compat.model_validate(cls, data)
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration: {e}")

        for relation in config.relations:
            if relation == RelationKind.NONE:
                raise ConfigError("relations may only contain 'mention' and 'retweet'")
        return config

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as handle:
                data = json.load(handle)
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e}")
        except ValueError as e:
            raise ConfigError(f"Config {path} is not valid JSON: {e}")

        if not isinstance(data, dict):
            raise ConfigError(f"Config {path} must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Apply non-None overrides; dotted keys such as `toxicity.threshold` reach nested sections."""

        data = pydantic_compat.model_dump_jsonable(self)
        for key, value in overrides.items():
            if value is None:
                continue
            *parents, leaf = key.replace("__", ".").split(".")
            target = data
            for parent in parents:
                target = target.setdefault(parent, {})
            target[leaf] = value
        return type(self).from_dict(data)

    def validate_paths(self, require_category_map: bool = False):
        if not Path(self.input_path).is_file():
            raise ConfigError(f"Input file {self.input_path} does not exist")
        if require_category_map and self.category_map_path is None:
            raise ConfigError("category_map_path is required to categorize topics")
        for name in ("category_map_path", "profiles_path"):
            value = getattr(self, name)
            if value is not None and not Path(value).is_file():
                raise ConfigError(f"{name} {value} does not exist")

    def config_hash(self) -> str:
        """Hash of the analysis options; the output location and secrets are left out."""

        data = pydantic_compat.model_dump_jsonable(self)
        data.pop("output_dir")
        data["toxicity"] = {key: value for key, value in data["toxicity"].items() if key not in SECRET_KEYS}
        return options_hash(data)


def options_hash(options: Dict[str, Any]) -> str:
    canonical = json.dumps(options, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def derive_seed(seed: int, stage: str) -> int:
    """Stable 32-bit sub-seed for a named stage."""

    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")

from .centrality import AccountType, CentralityTable, UserProfile, betweenness_centrality, degree_centrality, rank_users
from .community import CommunityPartition, cnm_communities
from .config import RunConfig
from .corpus import Corpus, TweetRecord, parse_records, read_corpus
from .exceptions import ConfigError, InputError, ProviderError, ToxiscopeError
from .graph import InteractionGraph, NetworkStats, build_graph, summarize
from .reports import __version__
from .topics import TopicConfig, TopicModel, fit_topics
from .toxicity import ToxicityConfig, ToxicityScore, filter_toxic, score_corpus

__all__ = [
    "AccountType",
    "CentralityTable",
    "CommunityPartition",
    "ConfigError",
    "Corpus",
    "InputError",
    "InteractionGraph",
    "NetworkStats",
    "ProviderError",
    "RunConfig",
    "TopicConfig",
    "TopicModel",
    "ToxicityConfig",
    "ToxicityScore",
    "ToxiscopeError",
    "TweetRecord",
    "UserProfile",
    "betweenness_centrality",
    "build_graph",
    "cnm_communities",
    "degree_centrality",
    "filter_toxic",
    "fit_topics",
    "parse_records",
    "rank_users",
    "read_corpus",
    "score_corpus",
    "summarize",
    "__version__",
]

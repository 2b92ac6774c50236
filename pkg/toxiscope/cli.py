import argparse
import logging
import sys
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Sequence

from . import pydantic_compat
from .cache import open_cache
from .centrality import (
    Metric,
    UserProfile,
    compute_centrality,
    load_profiles,
    profiles_from_corpus,
    rank_users,
)
from .community import CommunityPartition, cnm_communities, community_summary
from .config import RunConfig, derive_seed, options_hash
from .corpus import Corpus, RelationKind, dedup_for_network, read_corpus
from .exceptions import ConfigError, InputError, StageError, ToxiscopeError
from .graph import InteractionGraph, build_graph, edges_frame, summarize
from .reports import (
    ReportHeader,
    ReportWriter,
    assignments_frame,
    centrality_frame,
    communities_frame,
    daily_volume_frame,
    hashtags_frame,
    network_stats_frame,
    overall_shares_frame,
    partition_frame,
    peak_days_frame,
    ranking_frame,
    read_report_csv,
    scores_frame,
    topic_map_frame,
    topics_frame,
    user_categories_frame,
    weekly_shares_frame,
)
from .topics import CategoryMap, TopicConfig, apply_categories, fit_topics
from .toxicity import ScoreProvider, filter_toxic, score_corpus
from .trends import composition, daily_volume, hashtag_counts, peak_days, user_category_mentions

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_STAGE_FAILURE = 1
EXIT_INPUT_ERROR = 2

TOP_HASHTAGS = 20
PEAK_DAYS = 10
SCORE_CACHE_FILE = "score_cache.jsonl"

RANKINGS = {
    Metric.IN_DEGREE: "top_in_degree.csv",
    Metric.OUT_DEGREE: "top_out_degree.csv",
    Metric.BETWEENNESS: "top_betweenness.csv",
}


def _configure_logging(verbosity: int):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG

    logging.basicConfig(
        level=level,
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stderr,
    )


@contextmanager
def _stage(name: str) -> Iterator[None]:
    logger.info("=== %s ===", name)
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e


def _load_config(args: argparse.Namespace) -> RunConfig:
    """Config file (if any) with command-line flags layered on top."""

    overrides = {
        "input_path": getattr(args, "input", None),
        "output_dir": getattr(args, "output", None),
        "seed": args.seed,
        "threads": args.threads,
        "top_k": getattr(args, "top", None),
        "profiles_path": getattr(args, "profiles", None),
        "category_map_path": getattr(args, "category_map", None),
        "toxicity.threshold": getattr(args, "threshold", None),
        "toxicity.provider": getattr(args, "provider", None),
        "topics.k": getattr(args, "k", None),
        "directed_geodesics": getattr(args, "directed_geodesics", None) or None,
        "mask_unverified": getattr(args, "mask_unverified", None) or None,
    }

    if args.config:
        config = RunConfig.from_file(args.config)
        return config.with_overrides(**overrides)

    data: Dict[str, object] = {}
    for key, value in overrides.items():
        if value is None:
            continue
        *parents, leaf = key.split(".")
        target = data
        for parent in parents:
            target = target.setdefault(parent, {})  # type: ignore[assignment]
        target[leaf] = value
    if "input_path" not in data or "output_dir" not in data:
        raise ConfigError("Both an input and an output must be given (directly or through --config)")
    return RunConfig.from_dict(data)


def _writer(config: RunConfig) -> ReportWriter:
    return ReportWriter(config.output_dir, ReportHeader(config.config_hash(), config.seed))


def _profiles(corpus: Corpus, config: RunConfig) -> Dict[str, UserProfile]:
    profiles = profiles_from_corpus(corpus)
    if config.profiles_path:
        profiles.update(load_profiles(config.profiles_path))
    return profiles


def _topic_config(config: RunConfig) -> TopicConfig:
    data = pydantic_compat.model_dump(config.topics)
    data["seed"] = derive_seed(config.seed, "topics")
    return pydantic_compat.model_validate(TopicConfig, data)


def _categories_by_id(corpus: Corpus, categories: Sequence[Optional[str]]) -> Dict[str, Optional[str]]:
    return {record.id: category for record, category in zip(corpus, categories)}


# stages


def score_stage(corpus: Corpus, config: RunConfig, writer: ReportWriter):
    cache = open_cache(config.toxicity.cache, default_path=Path(config.output_dir) / SCORE_CACHE_FILE)
    scores = score_corpus(corpus, config.toxicity, cache=cache)
    writer.write_csv("scores.csv", scores_frame(scores))
    return scores


def topics_stage(corpus: Corpus, config: RunConfig, writer: ReportWriter) -> List[Optional[str]]:
    model = fit_topics(corpus, _topic_config(config))

    categories: List[Optional[str]] = [None] * len(corpus)
    topic_categories: Dict[int, str] = {}
    if config.category_map_path:
        category_map = CategoryMap.from_file(config.category_map_path)
        categories = apply_categories(model, category_map)
        topic_categories = {topic: category_map.category(topic) for topic in range(model.k)}

    writer.write_csv("topics.csv", topics_frame(model, topic_categories))
    writer.write_csv("assignments.csv", assignments_frame(corpus, model, categories))
    writer.write_csv("topic_map_2d.csv", topic_map_frame(corpus, model, categories))
    return categories


def network_stage(
    corpus: Corpus,
    relation: RelationKind,
    config: RunConfig,
    writer: ReportWriter,
    prefix: str = "",
    categories: Optional[Mapping[str, Optional[str]]] = None,
) -> InteractionGraph:
    graph = build_graph(dedup_for_network(corpus), relation)
    stats = summarize(graph, directed_geodesics=config.directed_geodesics)
    table = compute_centrality(graph, threads=config.threads)
    profiles = _profiles(corpus, config)

    partition: Optional[CommunityPartition] = None
    if graph.undirected_view().number_of_edges():
        partition = cnm_communities(graph)
    else:
        logger.warning("The %s graph has no edges between distinct users; skipping communities", relation.value)

    user_categories = user_category_mentions(corpus, graph, categories) if categories is not None else None

    writer.write_csv(f"{prefix}edges.csv", edges_frame(graph))
    writer.write_csv(f"{prefix}network_stats.csv", network_stats_frame(stats))
    writer.write_csv(f"{prefix}centrality.csv", centrality_frame(table, partition, profiles))
    writer.write_csv(f"{prefix}partition.csv", partition_frame(partition))
    if partition is not None:
        writer.write_csv(f"{prefix}communities.csv", communities_frame(community_summary(partition, table.in_degree)))

    for metric, name in RANKINGS.items():
        rows = rank_users(
            table,
            metric,
            config.top_k,
            partition=partition,
            profiles=profiles,
            user_categories=user_categories,
            mask_unverified=config.mask_unverified,
        )
        writer.write_csv(f"{prefix}{name}", ranking_frame(rows, integer_values=metric != Metric.BETWEENNESS))

    return graph


def trends_stage(
    corpus: Corpus,
    categories: Mapping[str, Optional[str]],
    writer: ReportWriter,
    mention_graph: InteractionGraph,
):
    categorized = corpus.replace_records(record for record in corpus if categories.get(record.id) is not None)
    skipped = len(corpus) - len(categorized)
    if skipped:
        logger.info("Leaving %d uncategorized records out of the volume trends", skipped)

    series = daily_volume(categorized, categories)
    writer.write_csv("daily_volume.csv", daily_volume_frame(series))
    if len(series):
        table = composition(series)
        writer.write_csv("weekly_shares.csv", weekly_shares_frame(table))
        writer.write_csv("overall_shares.csv", overall_shares_frame(table))
    writer.write_csv("peak_days.csv", peak_days_frame(peak_days(series, PEAK_DAYS)))
    writer.write_csv("hashtags.csv", hashtags_frame(hashtag_counts(corpus, TOP_HASHTAGS)))
    user_categories = user_category_mentions(corpus, mention_graph, categories)
    writer.write_csv("user_categories.csv", user_categories_frame(user_categories))


# commands


def cmd_ingest(args: argparse.Namespace) -> int:
    if not Path(args.input).is_file():
        raise InputError(f"Input file {args.input} does not exist")

    corpus = read_corpus(args.input)
    output = Path(args.output)
    writer = ReportWriter(output.parent, ReportHeader(options_hash({"command": "ingest"}), args.seed or 0))
    writer.write_corpus(output.name, corpus)

    print(ingest_summary(corpus))
    return EXIT_OK


def ingest_summary(corpus: Corpus) -> str:
    dropped = []
    if corpus.dropped_invalid:
        dropped.append(f"{corpus.dropped_invalid} invalid")
    if corpus.dropped_duplicates:
        dropped.append(f"{corpus.dropped_duplicates} duplicates")
    return ", ".join([f"{len(corpus)} kept"] + (dropped or ["0 dropped"]))


def cmd_score(args: argparse.Namespace) -> int:
    config = _load_config(args)
    config.validate_paths()
    score_stage(read_corpus(config.input_path), config, _writer(config))
    return EXIT_OK


def cmd_filter(args: argparse.Namespace) -> int:
    config = _load_config(args)
    config.validate_paths()
    writer = _writer(config)
    corpus = read_corpus(config.input_path)
    scores = score_stage(corpus, config, writer)
    toxic = filter_toxic(corpus, scores, config.toxicity.threshold)
    writer.write_corpus("toxic_corpus.jsonl", toxic)
    print(f"{len(toxic)} of {len(corpus)} records at or above {config.toxicity.threshold}")
    return EXIT_OK


def cmd_topics(args: argparse.Namespace) -> int:
    config = _load_config(args)
    config.validate_paths()
    topics_stage(read_corpus(config.input_path), config, _writer(config))
    return EXIT_OK


def cmd_network(args: argparse.Namespace) -> int:
    config = _load_config(args)
    config.validate_paths()
    graph = network_stage(read_corpus(config.input_path), RelationKind(args.relation), config, _writer(config))
    print(repr(graph))
    return EXIT_OK


def cmd_trends(args: argparse.Namespace) -> int:
    config = _load_config(args)
    config.validate_paths()
    if not Path(args.assignments).is_file():
        raise InputError(f"Assignments file {args.assignments} does not exist")

    corpus = read_corpus(config.input_path)
    assignments = read_report_csv(args.assignments)
    categories = {row.record_id: (row.category or None) for row in assignments.itertuples(index=False)}
    mention_graph = build_graph(dedup_for_network(corpus), RelationKind.MENTION)
    trends_stage(corpus, categories, _writer(config), mention_graph)
    return EXIT_OK


def cmd_run_all(args: argparse.Namespace) -> int:
    config = _load_config(args)
    config.validate_paths(require_category_map=True)

    started_at = datetime.now(timezone.utc)
    writer = _writer(config)
    seeds = {"topics": derive_seed(config.seed, "topics")}
    logger.info("Running the full pipeline with config %s and seed %d", config.config_hash(), config.seed)

    with _stage("ingest"):
        corpus = read_corpus(config.input_path)
        writer.write_corpus("corpus.jsonl", corpus)

    with _stage("score"):
        scores = score_stage(corpus, config, writer)

    with _stage("filter"):
        toxic = filter_toxic(corpus, scores, config.toxicity.threshold)
        writer.write_corpus("toxic_corpus.jsonl", toxic)

    with _stage("topics"):
        record_categories = topics_stage(toxic, config, writer)
        categories = _categories_by_id(toxic, record_categories)

    graphs: Dict[RelationKind, InteractionGraph] = {}
    with _stage("network"):
        for relation in config.relations:
            graphs[relation] = network_stage(
                toxic, relation, config, writer, prefix=f"{relation.value}/", categories=categories
            )

    with _stage("trends"):
        if RelationKind.MENTION in graphs:
            mention_graph = graphs[RelationKind.MENTION]
        else:
            mention_graph = build_graph(dedup_for_network(toxic), RelationKind.MENTION)
        trends_stage(toxic, categories, writer, mention_graph)

    writer.write_manifest(
        seeds,
        started_at,
        records={"ingested": len(corpus), "toxic": len(toxic)},
        provider=ScoreProvider(config.toxicity.provider).value,
    )
    print(f"Wrote {len(writer.written)} reports to {config.output_dir}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging")
    common.add_argument("--config", help="JSON run configuration; flags override its keys")
    common.add_argument("--seed", type=int, help="run seed")
    common.add_argument("--threads", type=int, help="worker cap for parallel stages")

    parser = argparse.ArgumentParser(prog="toxiscope", description="Toxic tweet topic, network and trend reports")
    subparsers = parser.add_subparsers(dest="command", required=True)

    ingest = subparsers.add_parser("ingest", parents=[common], help="normalize a JSON Lines corpus")
    ingest.add_argument("input")
    ingest.add_argument("--output", required=True, help="normalized corpus file")
    ingest.set_defaults(handler=cmd_ingest)

    score = subparsers.add_parser("score", parents=[common], help="score toxicity of every record")
    score.add_argument("input", nargs="?")
    score.add_argument("--output", help="report directory")
    score.add_argument("--provider", choices=[provider.value for provider in ScoreProvider])
    score.set_defaults(handler=cmd_score)

    filter_ = subparsers.add_parser("filter", parents=[common], help="keep records at or above the threshold")
    filter_.add_argument("input", nargs="?")
    filter_.add_argument("--output", help="report directory")
    filter_.add_argument("--provider", choices=[provider.value for provider in ScoreProvider])
    filter_.add_argument("--threshold", type=float)
    filter_.set_defaults(handler=cmd_filter)

    topics = subparsers.add_parser("topics", parents=[common], help="fit topics and keywords")
    topics.add_argument("input", nargs="?")
    topics.add_argument("--output", help="report directory")
    topics.add_argument("-k", type=int, help="number of topics")
    topics.add_argument("--category-map", help="JSON topic id to category code map")
    topics.set_defaults(handler=cmd_topics)

    network = subparsers.add_parser("network", parents=[common], help="network statistics and rankings")
    network.add_argument("input", nargs="?")
    network.add_argument("--output", help="report directory")
    network.add_argument("--relation", choices=[RelationKind.MENTION.value, RelationKind.RETWEET.value], required=True)
    network.add_argument("--top", type=int, help="rows per ranking (default 30)")
    network.add_argument("--profiles", help="CSV of username,verified,followers,manual_type")
    network.add_argument("--directed-geodesics", action="store_true")
    network.add_argument("--mask-unverified", action="store_true")
    network.set_defaults(handler=cmd_network)

    trends = subparsers.add_parser("trends", parents=[common], help="daily volume, composition and hashtags")
    trends.add_argument("input", nargs="?")
    trends.add_argument("--output", help="report directory")
    trends.add_argument("--assignments", required=True, help="assignments.csv from the topics command")
    trends.set_defaults(handler=cmd_trends)

    run_all = subparsers.add_parser("run-all", parents=[common], help="run the whole pipeline")
    run_all.add_argument("--input")
    run_all.add_argument("--output", help="report directory")
    run_all.add_argument("--threshold", type=float)
    run_all.add_argument("-k", type=int, help="number of topics")
    run_all.add_argument("--top", type=int)
    run_all.add_argument("--category-map", help="JSON topic id to category code map")
    run_all.add_argument("--profiles", help="CSV of username,verified,followers,manual_type")
    run_all.set_defaults(handler=cmd_run_all)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    _configure_logging(args.verbose)

    try:
        return args.handler(args)
    except StageError as e:
        print(f"toxiscope: {e}", file=sys.stderr)
        return EXIT_STAGE_FAILURE
    except (ConfigError, InputError, OSError, UnicodeError) as e:
        print(f"toxiscope: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except ToxiscopeError as e:
        print(f"toxiscope: {e}", file=sys.stderr)
        return EXIT_STAGE_FAILURE


if __name__ == "__main__":
    sys.exit(main())

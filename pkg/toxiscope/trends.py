import logging
from collections import Counter
from datetime import date
from typing import Dict, List, Mapping, Optional, Tuple

import pandas as pd

from .corpus import Corpus
from .exceptions import InputError
from .graph import InteractionGraph, linked_records

logger = logging.getLogger(__name__)

DAILY_COLUMNS = ["date", "category", "count"]
WEEKLY_COLUMNS = ["iso_week", "category", "share"]


def iso_week(day: date) -> str:
    year, week, _ = day.isocalendar()
    return f"{year}-W{week:02d}"


class DailySeries:
    """Tweet counts per (UTC date, category); zero cells are not stored."""

    def __init__(self, frame: pd.DataFrame):
        self.frame = frame.sort_values(["date", "category"]).reset_index(drop=True)

    @classmethod
    def empty(cls) -> "DailySeries":
        return cls(pd.DataFrame({"date": [], "category": [], "count": []}).astype({"count": int}))

    def __len__(self) -> int:
        return len(self.frame)

    def counts(self) -> Dict[Tuple[date, str], int]:
        return {(row.date, row.category): int(row.count) for row in self.frame.itertuples(index=False)}

    def total(self) -> int:
        return int(self.frame["count"].sum())

    def __repr__(self):
        return f"DailySeries(cells={len(self.frame)}, total={self.total()})"


class CompositionTable:
    def __init__(self, weekly: pd.DataFrame, overall: Dict[str, float]):
        self.weekly = weekly
        self.overall = overall

    def week_shares(self, week: str) -> Dict[str, float]:
        rows = self.weekly[self.weekly["iso_week"] == week]
        return dict(zip(rows["category"], rows["share"]))


def daily_volume(corpus: Corpus, categories: Mapping[str, Optional[str]]) -> DailySeries:
    """Group categorized records by the UTC date of `created_at` and category code."""

    rows = []
    for record in corpus:
        category = categories.get(record.id)
        if category is None:
            raise InputError(f"Record '{record.id}' has no category", record_id=record.id)
        rows.append((record.created_at.date(), category))

    if not rows:
        return DailySeries.empty()

    frame = pd.DataFrame(rows, columns=["date", "category"])
    grouped = frame.groupby(["date", "category"]).size().reset_index(name="count")
    return DailySeries(grouped)


def composition(series: DailySeries) -> CompositionTable:
    if not len(series):
        raise InputError("Cannot compute composition of an empty series")

    frame = series.frame.copy()
    frame["iso_week"] = frame["date"].map(iso_week)
    weekly = frame.groupby(["iso_week", "category"])["count"].sum().reset_index()
    weekly["share"] = weekly["count"] / weekly.groupby("iso_week")["count"].transform("sum")

    totals = frame.groupby("category")["count"].sum()
    overall = {str(category): float(count) / float(totals.sum()) for category, count in totals.items()}

    weekly = weekly[WEEKLY_COLUMNS].sort_values(["iso_week", "category"]).reset_index(drop=True)
    return CompositionTable(weekly, overall)


def hashtag_counts(corpus: Corpus, n: int) -> List[Tuple[str, int]]:
    counter: Counter = Counter()
    for record in corpus:
        counter.update(record.hashtags)
    return sorted(counter.items(), key=lambda item: (-item[1], item[0]))[: max(n, 0)]


def user_category_mentions(
    corpus: Corpus, graph: InteractionGraph, categories: Mapping[str, Optional[str]]
) -> Dict[str, Dict[str, int]]:
    """Per target user, the number of distinct linking tweets in each category.

    A tweet linking to the same user more than once counts once. Records without
    a category are skipped.
    """

    known = corpus.by_id()
    tallies: Dict[str, Dict[str, int]] = {}
    for target, record_ids in sorted(linked_records(graph).items()):
        counts: Dict[str, int] = {}
        for record_id in record_ids:
            if record_id not in known:
                raise InputError(f"Edge references unknown record '{record_id}'", record_id=record_id)
            category = categories.get(record_id)
            if category is None:
                continue
            counts[category] = counts.get(category, 0) + 1
        tallies[target] = counts
    return tallies


def peak_days(series: DailySeries, k: int) -> List[Tuple[date, int]]:
    """Top-k days by total volume, ties by earlier date."""

    if not len(series):
        return []
    totals = series.frame.groupby("date")["count"].sum()
    ranked = sorted(((day, int(total)) for day, total in totals.items()), key=lambda item: (-item[1], item[0]))
    return ranked[: max(k, 0)]

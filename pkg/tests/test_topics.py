import json

import numpy as np
import pytest

from tests.conftest import DATA_DIR, make_corpus, make_record
from toxiscope.corpus import Corpus
from toxiscope.exceptions import ConfigError, InputError
from toxiscope.topics import (
    UNASSIGNED_TOPIC,
    CategoryMap,
    CTfIdfModel,
    TopicConfig,
    TopicModel,
    apply_categories,
    fit_topics,
)


def _model(assignments, k):
    return TopicModel(np.array(assignments), np.zeros((k, 2)), CTfIdfModel([], np.zeros((k, 0))), {})


def test_category_map_from_file():
    category_map = CategoryMap.from_file(DATA_DIR / "categories.json")
    assert [category_map.category(topic) for topic in range(5)] == ["D", "H", "O", "P", "R"]


def test_category_alias(tmp_path):
    path = tmp_path / "map.json"
    path.write_text(json.dumps({"0": "F"}))
    assert CategoryMap.from_file(path).category(0) == "H"


@pytest.mark.parametrize("content", ['["D"]', '{"zero": "D"}', '{"0": "X"}'])
def test_category_map_invalid(tmp_path, content):
    path = tmp_path / "map.json"
    path.write_text(content)
    with pytest.raises(ConfigError):
        CategoryMap.from_file(path)


def test_apply_categories():
    model = _model([6, 0, 6, UNASSIGNED_TOPIC], 7)
    category_map = CategoryMap({topic: "D" if topic == 6 else "P" for topic in range(7)})

    assert apply_categories(model, category_map) == ["D", "P", "D", None]
    assert model.category_map is category_map


def test_apply_categories_single_code():
    model = _model([0, 1, 2], 3)
    assert apply_categories(model, CategoryMap({0: "R", 1: "R", 2: "R"})) == ["R", "R", "R"]


def test_apply_categories_missing_topic():
    model = _model([0, 1, 2, 3], 4)
    with pytest.raises(ConfigError, match="Topic 3"):
        apply_categories(model, CategoryMap({0: "D", 1: "D", 2: "D"}))


def test_topic_config_bounds():
    with pytest.raises(ValueError):
        TopicConfig(k=0)
    with pytest.raises(ValueError):
        TopicConfig(unknown=1)


def test_fit_topics_on_fixture(synthetic_corpus):
    config = TopicConfig(k=5, seed=3)
    model = fit_topics(synthetic_corpus, config)

    assert model.k == 5
    assert model.assignments.shape == (500,)
    assert sum(model.sizes().values()) == int((model.assignments != UNASSIGNED_TOPIC).sum())
    assert all(0 < len(words) <= 10 for words in model.keywords.values())
    assert model.label(0) == "_".join(model.keywords[0][:4])
    assert model.projection.shape == (500, 2)
    history = model.objective_history
    assert all(later <= earlier + 1e-9 for earlier, later in zip(history, history[1:]))


def test_fit_topics_is_deterministic(synthetic_corpus):
    config = TopicConfig(k=5, seed=11)
    first = fit_topics(synthetic_corpus, config)
    second = fit_topics(synthetic_corpus, config)

    np.testing.assert_array_equal(first.assignments, second.assignments)
    assert first.keywords == second.keywords


def test_fit_topics_marks_empty_texts():
    corpus = Corpus(
        [
            make_record("1", "bob", "vaccine clinic doses"),
            make_record("2", "bob", "RT @alice: https://t.co/x", minutes=1),
            make_record("3", "bob", "election government vote", minutes=2),
            make_record("4", "carol", "vaccine clinic doses", minutes=3),
        ]
    )
    model = fit_topics(corpus, TopicConfig(k=2, reduce_dim=2, seed=0))

    assert model.assignments[1] == UNASSIGNED_TOPIC
    assert np.isnan(model.projection[1]).all()
    assert model.assignments[0] == model.assignments[3] != model.assignments[2]


def test_fit_topics_single_usable_text():
    corpus = make_corpus([("bob", "vaccine clinic doses"), ("carol", "https://t.co/x")])
    model = fit_topics(corpus, TopicConfig(k=1, reduce_dim=2, seed=0))

    assert list(model.assignments) == [0, UNASSIGNED_TOPIC]
    assert np.isnan(model.projection).all()
    assert "vaccine" in model.keywords[0]


def test_fit_topics_k_too_large():
    corpus = make_corpus([("bob", "one text"), ("bob", "two text")])
    with pytest.raises(InputError, match="k=3"):
        fit_topics(corpus, TopicConfig(k=3, reduce_dim=1))

import random

import pytest
import requests

from tests.conftest import make_corpus, make_record
from toxiscope.cache import JsonlScoreCache
from toxiscope.corpus import Corpus
from toxiscope.exceptions import InputError, ProtocolError, ProviderError
from toxiscope.toxicity import (
    API_KEY_ENV_VAR,
    DEFAULT_ENDPOINT,
    RemoteToxicityClient,
    ScoreProvider,
    ToxicityConfig,
    ToxicityScore,
    filter_toxic,
    parse_toxicity_response,
    score_corpus,
    score_remote,
    score_stub,
    stub_value,
)


def _body(value):
    return {"attributeScores": {"TOXICITY": {"summaryScore": {"value": value, "type": "PROBABILITY"}}}}


def _response(mocker, status=200, body=None):
    response = mocker.Mock(status_code=status)
    response.json.return_value = body if body is not None else _body(0.5)
    return response


@pytest.fixture
def sleep(mocker):
    return mocker.patch("toxiscope.toxicity.time.sleep")


@pytest.fixture
def config():
    return ToxicityConfig(provider="remote", api_key="secret", requests_per_second=1e6, max_concurrency=1)


def test_config_rejects_threshold_above_one():
    with pytest.raises(ValueError):
        ToxicityConfig(threshold=1.1)


def test_score_rejects_out_of_range():
    with pytest.raises(ValueError):
        ToxicityScore(record_id="1", value=1.5, provider="stub")


def test_stub_values():
    assert stub_value("have a nice day") == 0
    assert stub_value("you idiot") == pytest.approx(1 / 3)
    assert stub_value("Idiot, stupid liar") == 1.0
    assert stub_value("idiot idiot idiot idiot") == 1.0


def test_score_stub_ids_default_to_positions():
    scores = score_stub(["idiot", "fine"])
    assert [score.record_id for score in scores] == ["0", "1"]
    assert all(score.provider == ScoreProvider.STUB for score in scores)


def test_score_stub_length_mismatch():
    with pytest.raises(InputError, match="2 ids for 1 texts"):
        score_stub(["a"], ids=["1", "2"])


def _scores(corpus, values):
    return {
        record.id: ToxicityScore(record_id=record.id, value=value, provider="stub")
        for record, value in zip(corpus, values)
    }


def test_filter_threshold_is_inclusive():
    corpus = make_corpus([("a", "x"), ("b", "y"), ("c", "z")])
    kept = filter_toxic(corpus, _scores(corpus, [0.70, 0.69, 0.95]), 0.7)
    assert [record.id for record in kept] == ["1", "3"]


def test_filter_missing_score():
    corpus = make_corpus([("a", "x"), ("b", "y")])
    scores = _scores(corpus, [0.9])
    with pytest.raises(InputError, match="'2'"):
        filter_toxic(corpus, scores, 0.5)


def test_filter_is_monotone():
    rng = random.Random(3)
    corpus = make_corpus([("user", f"text {index}") for index in range(50)])
    scores = _scores(corpus, [rng.random() for _ in range(50)])

    for _ in range(20):
        low, high = sorted((rng.random(), rng.random()))
        strict = {record.id for record in filter_toxic(corpus, scores, high)}
        loose = {record.id for record in filter_toxic(corpus, scores, low)}
        assert strict <= loose


def test_parse_response():
    assert parse_toxicity_response(_body(0.25), 0) == 0.25


@pytest.mark.parametrize("body", [{}, {"attributeScores": {}}, _body("high"), _body(None), _body(True), []])
def test_parse_response_malformed(body):
    with pytest.raises(ProtocolError):
        parse_toxicity_response(body, 3)


def test_parse_response_out_of_range():
    with pytest.raises(ProtocolError, match="outside"):
        parse_toxicity_response(_body(1.2), 4)


def test_remote_request_shape(mocker, config, sleep):
    session = mocker.Mock()
    session.post.return_value = _response(mocker, body=_body(0.8))

    scores = score_remote(["you idiot"], config, ids=["42"], session=session)

    assert scores == [ToxicityScore(record_id="42", value=0.8, provider="remote")]
    session.post.assert_called_once_with(
        DEFAULT_ENDPOINT,
        params={"key": "secret"},
        json={"comment": {"text": "you idiot"}, "requestedAttributes": {"TOXICITY": {}}},
        timeout=30.0,
    )


def test_remote_api_key_from_environment(mocker, monkeypatch, sleep):
    monkeypatch.setenv(API_KEY_ENV_VAR, "from-env")
    config = ToxicityConfig(provider="remote", requests_per_second=1e6)
    session = mocker.Mock()
    session.post.return_value = _response(mocker)

    RemoteToxicityClient(config, session=session).score_one(0, "x")

    assert session.post.call_args.kwargs["params"] == {"key": "from-env"}


def test_remote_retries_with_backoff(mocker, config, sleep):
    session = mocker.Mock()
    session.post.side_effect = [
        _response(mocker, status=429),
        requests.ConnectionError("reset"),
        _response(mocker, body=_body(0.3)),
    ]

    assert RemoteToxicityClient(config, session=session).score_one(0, "x") == 0.3
    assert session.post.call_count == 3
    assert mocker.call(0.5) in sleep.mock_calls
    assert mocker.call(1.0) in sleep.mock_calls


def test_remote_gives_up_after_max_retries(mocker, sleep):
    config = ToxicityConfig(provider="remote", max_retries=2, requests_per_second=1e6, max_concurrency=1)
    session = mocker.Mock()
    session.post.return_value = _response(mocker, status=503)

    with pytest.raises(ProviderError, match="Exceeded max retries") as exc_info:
        RemoteToxicityClient(config, session=session).score_one(7, "x")

    assert exc_info.value.index == 7
    assert session.post.call_count == 3


def test_remote_client_error_is_not_retried(mocker, config, sleep):
    session = mocker.Mock()
    session.post.return_value = _response(mocker, status=400)

    with pytest.raises(ProviderError, match="HTTP 400") as exc_info:
        RemoteToxicityClient(config, session=session).score_one(2, "x")

    assert exc_info.value.index == 2
    assert session.post.call_count == 1


def test_remote_invalid_json(mocker, config, sleep):
    response = _response(mocker)
    response.json.side_effect = ValueError("no json")
    session = mocker.Mock()
    session.post.return_value = response

    with pytest.raises(ProtocolError, match="not valid JSON"):
        RemoteToxicityClient(config, session=session).score_one(0, "x")


def test_remote_results_keep_input_order(mocker, sleep):
    config = ToxicityConfig(provider="remote", requests_per_second=1e6, max_concurrency=4)
    values = {f"text {index}": index / 20 for index in range(20)}

    def post(url, params, json, timeout):
        return _response(mocker, body=_body(values[json["comment"]["text"]]))

    session = mocker.Mock()
    session.post.side_effect = post

    scores = score_remote(list(values), config, session=session)
    assert [score.value for score in scores] == list(values.values())


def test_score_remote_requires_texts(config):
    with pytest.raises(InputError):
        score_remote([], config)


def test_score_corpus_stub():
    corpus = Corpus([make_record("1", "bob", "idiot stupid liar"), make_record("2", "bob", "hello", minutes=1)])
    scores = score_corpus(corpus, ToxicityConfig())

    assert list(scores) == ["1", "2"]
    assert scores["1"].value == 1.0
    assert scores["2"].value == 0.0


def test_score_corpus_only_scores_uncached(mocker, tmp_path, sleep):
    corpus = Corpus([make_record("1", "bob", "a"), make_record("2", "bob", "b", minutes=1)])
    cache = JsonlScoreCache(tmp_path / "scores.jsonl")
    cache.put_many([ToxicityScore(record_id="1", value=0.9, provider="remote")])

    config = ToxicityConfig(provider="remote", api_key="k", requests_per_second=1e6)
    session = mocker.Mock()
    session.post.return_value = _response(mocker, body=_body(0.1))

    scores = score_corpus(corpus, config, cache=cache, session=session)

    assert session.post.call_count == 1
    assert session.post.call_args.kwargs["json"]["comment"]["text"] == "b"
    assert scores["1"].value == 0.9
    assert scores["2"].value == 0.1
    assert JsonlScoreCache(tmp_path / "scores.jsonl").get_many(["1", "2"]) == scores


def test_score_corpus_ignores_scores_from_another_provider(mocker, tmp_path, sleep):
    corpus = Corpus([make_record("1", "bob", "idiot")])
    cache = JsonlScoreCache(tmp_path / "scores.jsonl")
    score_corpus(corpus, ToxicityConfig(), cache=cache)

    config = ToxicityConfig(provider="remote", api_key="k", requests_per_second=1e6)
    session = mocker.Mock()
    session.post.return_value = _response(mocker, body=_body(0.2))

    scores = score_corpus(corpus, config, cache=cache, session=session)

    assert session.post.call_count == 1
    assert scores["1"] == ToxicityScore(record_id="1", value=0.2, provider=ScoreProvider.REMOTE)
    assert JsonlScoreCache(tmp_path / "scores.jsonl").get_many(["1"]) == scores
    assert score_corpus(corpus, ToxicityConfig(), cache=cache)["1"].provider == ScoreProvider.STUB


@pytest.mark.parametrize("workers", [1, 4])
def test_remote_failure_stops_unsent_texts(mocker, sleep, workers):
    config = ToxicityConfig(provider="remote", requests_per_second=1e6, max_concurrency=workers)
    session = mocker.Mock()
    session.post.return_value = _response(mocker, status=403)

    with pytest.raises(ProviderError, match="HTTP 403") as exc_info:
        score_remote([f"text {index}" for index in range(50)], config, session=session)

    assert session.post.call_count <= workers
    assert exc_info.value.index < workers

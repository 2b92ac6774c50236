import numpy as np
import pytest

from toxiscope.exceptions import ConfigError, ProviderError
from toxiscope.topics import (
    EmbeddingMatrix,
    HashingEmbedder,
    SentenceTransformerEmbedder,
    embed,
    embedding_provider,
)


def test_hash_embedding_counts_words():
    embedder = HashingEmbedder(64)
    matrix = embed(["a a b"], embedder)

    row = matrix.vectors[0]
    buckets = {embedder.bucket("a"), embedder.bucket("b")}
    assert np.count_nonzero(row) == len(buckets)
    assert np.linalg.norm(row) == pytest.approx(1.0, abs=1e-9)
    if len(buckets) == 2:
        assert row[embedder.bucket("a")] == pytest.approx(2 * row[embedder.bucket("b")])


def test_hash_embedding_is_deterministic():
    first = embed(["same text", "same text", "other"], HashingEmbedder()).vectors
    second = embed(["same text", "same text", "other"], HashingEmbedder()).vectors

    np.testing.assert_array_equal(first[0], first[1])
    np.testing.assert_array_equal(first, second)


def test_hash_embedding_is_case_insensitive():
    vectors = embed(["Vaccine CDC", "vaccine cdc"]).vectors
    np.testing.assert_array_equal(vectors[0], vectors[1])


def test_empty_text_is_flagged():
    matrix = embed(["", "hello world", "  "])

    assert matrix.dimension == 384
    assert len(matrix) == 3
    assert matrix.nonempty.tolist() == [False, True, False]
    assert not matrix.vectors[0].any()


def test_nonempty_rows_have_unit_norm(synthetic_corpus):
    matrix = embed([record.text for record in synthetic_corpus])
    norms = np.linalg.norm(matrix.vectors[matrix.nonempty], axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-9)


def test_matrix_must_be_two_dimensional():
    with pytest.raises(Exception, match="two dimensional"):
        EmbeddingMatrix(np.zeros(3), "test")


def test_provider_lookup():
    assert isinstance(embedding_provider("hashing", 16), HashingEmbedder)
    assert embedding_provider("hashing", 16).dimension == 16

    provider = embedding_provider("sbert:paraphrase-MiniLM-L3-v2")
    assert isinstance(provider, SentenceTransformerEmbedder)
    assert provider.model_name == "paraphrase-MiniLM-L3-v2"

    with pytest.raises(ConfigError, match="Unknown embedding provider"):
        embedding_provider("word2vec")


def test_sentence_transformer_failure_is_provider_error(mocker):
    provider = SentenceTransformerEmbedder()
    provider._model = mocker.Mock()
    provider._model.encode.side_effect = RuntimeError("out of memory")

    with pytest.raises(ProviderError, match="out of memory"):
        provider.embed(["hello"])


def test_sentence_transformer_zeroes_empty_texts(mocker):
    provider = SentenceTransformerEmbedder()
    provider._model = mocker.Mock()
    provider._model.encode.return_value = np.ones((2, 4)) / 2

    vectors = provider.embed(["hello", " "])

    assert vectors[0].tolist() == [0.5] * 4
    assert not vectors[1].any()

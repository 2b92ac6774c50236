import hashlib
import json
import logging
import re
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from pydantic import Field
from sklearn.feature_extraction.text import CountVectorizer

from . import pydantic_compat
from .corpus import Corpus, clean_for_embedding
from .exceptions import ConfigError, InputError, ProviderError

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 384
UNASSIGNED_TOPIC = -1

CATEGORY_NAMES: Dict[str, str] = {
    "D": "Disease",
    "H": "Health Policy and Healthcare",
    "O": "Homophobia",
    "P": "Politics",
    "R": "Racism",
}
# "F" appears once for Health Policy and Healthcare in the source annotation
CATEGORY_ALIASES = {"F": "H"}

_EMBEDDING_WORD_RE = re.compile(r"\w+")
_TOKEN_RE = re.compile(r"[^\W_]+")


class TopicConfig(pydantic_compat.BaseModel):
    k: int = Field(50, ge=1)
    reduce_dim: int = Field(5, ge=1)
    visualization_dim: int = Field(2, ge=1)
    seed: int = 0
    max_iterations: int = Field(300, ge=1)
    keywords_per_topic: int = Field(10, ge=1)
    embedding_dimension: int = Field(DEFAULT_DIMENSION, ge=1)
    embedding_provider: str = "hashing"


# embedding


class EmbeddingMatrix:
    def __init__(self, vectors: np.ndarray, provider_id: str):
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim != 2:
            raise InputError(f"Embedding matrix must be two dimensional, got shape {vectors.shape}")
        self.vectors = vectors
        self.provider_id = provider_id

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    @property
    def nonempty(self) -> np.ndarray:
        """Rows with a nonzero vector; zero rows are excluded from clustering."""

        return np.linalg.norm(self.vectors, axis=1) > 0

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def __repr__(self):
        return f"EmbeddingMatrix(shape={self.vectors.shape}, provider_id={self.provider_id!r})"


class EmbeddingProvider:
    provider_id: str

    def embed(self, texts: Sequence[str]) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError


class HashingEmbedder(EmbeddingProvider):
    """Counts lowercase word unigrams in hashed buckets, then L2-normalizes each row."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension
        self.provider_id = f"hashing-{dimension}"

    def bucket(self, word: str) -> int:
        digest = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.dimension

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        vectors = np.zeros((len(texts), self.dimension))
        for row, text in enumerate(texts):
            for word in _EMBEDDING_WORD_RE.findall(text.lower()):
                vectors[row, self.bucket(word)] += 1

        norms = np.linalg.norm(vectors, axis=1)
        nonzero = norms > 0
        vectors[nonzero] /= norms[nonzero, None]
        return vectors


class SentenceTransformerEmbedder(EmbeddingProvider):
    """Sentence-BERT embeddings (requires the `sbert` extra)."""

    def __init__(self, model_name: str = "all-MiniLM-L6-v2"):
        self.model_name = model_name
        self.provider_id = f"sbert-{model_name}"
        self._model = None

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        try:
            if self._model is None:
                from sentence_transformers import SentenceTransformer

                self._model = SentenceTransformer(self.model_name)
            vectors = self._model.encode(list(texts), normalize_embeddings=True)
        except Exception as e:
            raise ProviderError(f"Sentence embedding with {self.model_name} failed: {e}")

        vectors = np.asarray(vectors, dtype=float)
        # keep the empty-text convention of the hashing provider
        for row, text in enumerate(texts):
            if not text.strip():
                vectors[row] = 0.0
        return vectors


def embedding_provider(name: str, dimension: int = DEFAULT_DIMENSION) -> EmbeddingProvider:
    if name == "hashing":
        return HashingEmbedder(dimension)
    if name.startswith("sbert"):
        _, _, model_name = name.partition(":")
        return SentenceTransformerEmbedder(model_name or "all-MiniLM-L6-v2")
    raise ConfigError(f"Unknown embedding provider '{name}'")


def embed(texts: Sequence[str], provider: Optional[EmbeddingProvider] = None) -> EmbeddingMatrix:
    provider = provider or HashingEmbedder()
    return EmbeddingMatrix(provider.embed(texts), provider.provider_id)


# dimensionality reduction


class Reducer:
    def fit_transform(self, vectors: np.ndarray, d: int, seed: int) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError


def _orthogonalize(vector: np.ndarray, basis: List[np.ndarray]) -> np.ndarray:
    # two Gram-Schmidt passes keep the basis orthogonal to machine precision
    for _ in range(2):
        for component in basis:
            vector = vector - (component @ vector) * component
    return vector


class PcaReducer(Reducer):
    """Projects centered rows onto the top principal directions.

    Components are found one at a time by power iteration on the covariance
    matrix, deflating by projecting out the components already found. Each
    component is signed so that its largest-magnitude loading is positive.
    """

    def __init__(self, tolerance: float = 1e-9, max_iterations: int = 10_000):
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.components: Optional[np.ndarray] = None
        self.eigenvalues: Optional[np.ndarray] = None
        self.mean: Optional[np.ndarray] = None

    def _power_iteration(self, covariance: np.ndarray, basis: List[np.ndarray], rng: np.random.Generator) -> np.ndarray:
        scale = np.linalg.norm(covariance)
        vector = _orthogonalize(rng.standard_normal(covariance.shape[0]), basis)
        vector /= np.linalg.norm(vector)

        for _ in range(self.max_iterations):
            product = _orthogonalize(covariance @ vector, basis)
            norm = np.linalg.norm(product)
            if norm <= 1e-12 * scale or norm == 0:
                # remaining directions carry no variance; any orthogonal vector will do
                break

            product /= norm
            change = min(np.linalg.norm(product - vector), np.linalg.norm(product + vector))
            vector = product
            if change < self.tolerance:
                break

        vector = _orthogonalize(vector, basis)
        vector /= np.linalg.norm(vector)
        if vector[np.argmax(np.abs(vector))] < 0:
            vector = -vector
        return vector

    def fit_transform(self, vectors: np.ndarray, d: int, seed: int) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=float)
        n, dimension = vectors.shape
        if d > dimension:
            raise InputError(f"Cannot reduce {dimension} dimensions to {d}")
        if d < 1:
            raise InputError(f"Target dimension must be at least 1, got {d}")
        if n < 2:
            raise InputError(f"Need at least 2 rows to reduce, got {n}")

        self.mean = vectors.mean(axis=0)
        centered = vectors - self.mean
        covariance = centered.T @ centered / (n - 1)

        rng = np.random.default_rng(seed)
        basis: List[np.ndarray] = []
        for _ in range(d):
            basis.append(self._power_iteration(covariance, basis, rng))

        self.components = np.vstack(basis)
        self.eigenvalues = np.array([component @ covariance @ component for component in basis])
        return centered @ self.components.T


def reduce(
    matrix: Union[EmbeddingMatrix, np.ndarray],
    d: int,
    seed: int,
    reducer: Optional[Reducer] = None,
) -> np.ndarray:
    vectors = matrix.vectors if isinstance(matrix, EmbeddingMatrix) else np.asarray(matrix, dtype=float)
    reducer = reducer or PcaReducer()
    return reducer.fit_transform(vectors, d, seed)


# clustering


class KMeansResult(NamedTuple):
    assignments: np.ndarray
    centroids: np.ndarray
    objective_history: List[float]
    iterations: int

    @property
    def objective(self) -> float:
        return self.objective_history[-1]


def kmeans_objective(points: np.ndarray, assignments: np.ndarray, centroids: np.ndarray) -> float:
    return float(((points - centroids[assignments]) ** 2).sum())


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _update_centroids(points: np.ndarray, assignments: np.ndarray, centroids: np.ndarray, k: int) -> np.ndarray:
    centroids = centroids.copy()
    for cluster in range(k):
        members = assignments == cluster
        if members.any():
            centroids[cluster] = points[members].mean(axis=0)

    for cluster in range(k):
        if (assignments == cluster).any():
            continue

        # re-seed an empty cluster with the point farthest from its centroid,
        # taken from a cluster that keeps at least one other member
        sizes = np.bincount(assignments, minlength=k)
        distances = ((points - centroids[assignments]) ** 2).sum(axis=1)
        distances[sizes[assignments] < 2] = -1.0
        farthest = int(np.argmax(distances))
        donor = int(assignments[farthest])

        assignments[farthest] = cluster
        centroids[cluster] = points[farthest]
        centroids[donor] = points[assignments == donor].mean(axis=0)
        logger.debug("Re-seeded empty cluster %d with point %d", cluster, farthest)

    return centroids


def kmeans(points: np.ndarray, k: int, seed: int, max_iterations: int = 300) -> KMeansResult:
    """Lloyd's algorithm with squared Euclidean assignment.

    Initial centroids are k distinct points drawn with `seed`. Iteration stops
    once assignments no longer change, or after `max_iterations` updates.
    """

    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if max_iterations < 1:
        raise InputError(f"max_iterations must be positive, got {max_iterations}")
    if k <= 0:
        raise InputError(f"k must be positive, got {k}")
    if k > n:
        raise InputError(f"k={k} exceeds the number of points ({n})")

    rng = np.random.default_rng(seed)
    centroids = points[rng.choice(n, size=k, replace=False)].copy()

    assignments: Optional[np.ndarray] = None
    history: List[float] = []
    iterations = 0
    for _ in range(max_iterations):
        new_assignments = _squared_distances(points, centroids).argmin(axis=1)
        if assignments is not None and np.array_equal(new_assignments, assignments):
            break

        assignments = new_assignments
        centroids = _update_centroids(points, assignments, centroids, k)
        history.append(kmeans_objective(points, assignments, centroids))
        iterations += 1

    assert assignments is not None
    logger.info("K-Means converged after %d iterations (objective %.6f)", iterations, history[-1])
    return KMeansResult(assignments, centroids, history, iterations)


# class-based TF-IDF


def tokenize(text: str) -> List[str]:
    return [token for token in _TOKEN_RE.findall(text.lower()) if len(token) >= 2]


class CTfIdfModel:
    """Per-class term weights W[c, x] = tf[c, x] * ln(1 + A / f[x])."""

    def __init__(self, vocabulary: Sequence[str], tf: np.ndarray):
        self.vocabulary = list(vocabulary)
        self.word_index = {word: index for index, word in enumerate(self.vocabulary)}
        self.tf = np.asarray(tf, dtype=np.int64)
        if self.tf.ndim != 2 or self.tf.shape[1] != len(self.vocabulary):
            raise InputError(f"Term frequency matrix shape {self.tf.shape} does not match {len(self.vocabulary)} words")
        self.f = self.tf.sum(axis=0)

        n_classes = self.tf.shape[0]
        self.A = float(self.f.sum()) / n_classes if n_classes else 0.0

        self.W = np.zeros(self.tf.shape)
        if self.vocabulary:
            self.W = self.tf * np.log(1 + self.A / self.f)[None, :]

    @property
    def n_classes(self) -> int:
        return self.tf.shape[0]

    def weight(self, word: str, topic: int) -> float:
        index = self.word_index.get(word)
        if index is None:
            return 0.0
        return float(self.W[topic, index])


def fit_ctfidf(assignments: Sequence[int], documents: Sequence[str], n_classes: Optional[int] = None) -> CTfIdfModel:
    """Join each cluster into one class document and weigh its words.

    Records assigned the sentinel topic are ignored. Classes without any
    tokens get all-zero rows.
    """

    if len(assignments) != len(documents):
        raise InputError(f"Got {len(assignments)} assignments for {len(documents)} documents")

    assigned = [int(topic) for topic in assignments if topic != UNASSIGNED_TOPIC]
    if n_classes is None:
        n_classes = max(assigned) + 1 if assigned else 0

    class_documents: List[List[str]] = [[] for _ in range(n_classes)]
    for topic, document in zip(assignments, documents):
        if topic != UNASSIGNED_TOPIC:
            class_documents[int(topic)].append(document)

    vectorizer = CountVectorizer(tokenizer=tokenize, lowercase=False, token_pattern=None)
    try:
        counts = vectorizer.fit_transform([" ".join(docs) for docs in class_documents])
    except ValueError:
        # no class contains a single token
        return CTfIdfModel([], np.zeros((n_classes, 0), dtype=np.int64))

    vocabulary = list(vectorizer.get_feature_names_out())
    return CTfIdfModel(vocabulary, counts.toarray())


def top_keywords(model: CTfIdfModel, topic: int, n: int) -> List[str]:
    if not 0 <= topic < model.n_classes:
        raise InputError(f"Topic {topic} does not exist")

    weights = model.W[topic]
    ranked = sorted(
        (word for word, weight in zip(model.vocabulary, weights) if weight > 0),
        key=lambda word: (-weights[model.word_index[word]], word),
    )
    return ranked[:n]


# categories


class CategoryMap:
    def __init__(self, topic_to_category: Dict[int, str], labels: Optional[Dict[str, str]] = None):
        self.labels = dict(labels or CATEGORY_NAMES)
        self.topic_to_category: Dict[int, str] = {}
        for topic, code in topic_to_category.items():
            code = CATEGORY_ALIASES.get(code, code)
            if code not in self.labels:
                raise ConfigError(f"Unknown category code '{code}' for topic {topic}")
            self.topic_to_category[int(topic)] = code

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "CategoryMap":
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)

        if not isinstance(data, dict):
            raise ConfigError(f"Category map {path} must be a JSON object of topic id to category code")

        try:
            return cls({int(topic): code for topic, code in data.items()})
        except ValueError:
            raise ConfigError(f"Category map {path} has a non-integer topic id")

    def category(self, topic: int) -> str:
        try:
            return self.topic_to_category[topic]
        except KeyError:
            raise ConfigError(f"Topic {topic} has no category in the category map")

    def validate(self, k: int):
        for topic in range(k):
            self.category(topic)


class TopicModel:
    def __init__(
        self,
        assignments: np.ndarray,
        centroids: np.ndarray,
        ctfidf: CTfIdfModel,
        keywords: Dict[int, List[str]],
        objective_history: Optional[List[float]] = None,
        projection: Optional[np.ndarray] = None,
        category_map: Optional[CategoryMap] = None,
    ):
        self.assignments = np.asarray(assignments, dtype=int)
        self.centroids = centroids
        self.ctfidf = ctfidf
        self.keywords = keywords
        self.objective_history = objective_history or []
        self.projection = projection
        self.category_map = category_map

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def sizes(self) -> Dict[int, int]:
        counts = np.bincount(self.assignments[self.assignments != UNASSIGNED_TOPIC], minlength=self.k)
        return {topic: int(count) for topic, count in enumerate(counts)}

    def label(self, topic: int, words: int = 4) -> str:
        return "_".join(self.keywords.get(topic, [])[:words])


def apply_categories(model: TopicModel, category_map: CategoryMap) -> List[Optional[str]]:
    """Category code per record; records with the sentinel topic get None."""

    category_map.validate(model.k)
    model.category_map = category_map
    return [None if topic == UNASSIGNED_TOPIC else category_map.category(int(topic)) for topic in model.assignments]


def fit_topics(
    corpus: Corpus,
    config: TopicConfig,
    provider: Optional[EmbeddingProvider] = None,
    reducer: Optional[Reducer] = None,
) -> TopicModel:
    """Embed, reduce, cluster and describe the cleaned texts of `corpus`."""

    texts = [clean_for_embedding(record.text) for record in corpus]
    provider = provider or embedding_provider(config.embedding_provider, config.embedding_dimension)
    matrix = embed(texts, provider)
    nonempty = matrix.nonempty
    usable = int(nonempty.sum())
    logger.info("Embedded %d texts with %s (%d empty)", len(texts), matrix.provider_id, len(texts) - usable)

    if not 1 <= config.k <= usable:
        raise InputError(f"k={config.k} must be between 1 and the number of non-empty texts ({usable})")
    if config.reduce_dim > matrix.dimension:
        raise InputError(f"reduce_dim={config.reduce_dim} exceeds embedding dimension {matrix.dimension}")

    vectors = matrix.vectors[nonempty]
    if usable == 1:
        # a single point reduces to the origin
        reduced = np.zeros((1, config.reduce_dim))
    else:
        reduced = reduce(vectors, config.reduce_dim, config.seed, reducer)
    clustering = kmeans(reduced, config.k, config.seed, config.max_iterations)

    assignments = np.full(len(texts), UNASSIGNED_TOPIC, dtype=int)
    assignments[nonempty] = clustering.assignments

    ctfidf = fit_ctfidf(list(assignments), texts, n_classes=config.k)
    keywords = {topic: top_keywords(ctfidf, topic, config.keywords_per_topic) for topic in range(config.k)}

    projection = np.full((len(texts), config.visualization_dim), np.nan)
    if usable >= 2 and config.visualization_dim <= matrix.dimension:
        projection[nonempty] = reduce(vectors, config.visualization_dim, config.seed, reducer)

    return TopicModel(
        assignments,
        clustering.centroids,
        ctfidf,
        keywords,
        objective_history=clustering.objective_history,
        projection=projection,
    )

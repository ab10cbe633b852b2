"""Commonsense concept vocabulary: frequency selection, the co-occurrence
relation graph, and its symmetric degree normalization."""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import tokenize
from .errors import ConfigurationError, ContractError


@dataclass
class ConceptVocabulary:
    concepts: list
    embeddings: np.ndarray          # M x dim initial word vectors
    min_freq: int
    relation_graph: np.ndarray = None       # G, M x M
    normalized_adjacency: np.ndarray = None  # A = D^-1/2 G D^-1/2
    adjacency_normalized: bool = field(default=False)
    unseen: set = field(default_factory=set)  # concepts absent from the corpus

    @property
    def size(self):
        return len(self.concepts)

    def index(self, token):
        return self.concepts.index(token)


def select_concepts(samples, min_freq, table, stopwords=None, extra_concepts=()):
    """Pick every token with corpus frequency >= min_freq, ordered by
    descending frequency then lexicographically.

    ``extra_concepts`` admits externally supplied tokens; those unseen in
    the corpus are routed through the embedding-similarity path when the
    relation graph is built.
    """
    if not samples:
        raise ConfigurationError("cannot select concepts from an empty corpus")
    counts = Counter()
    for s in samples:
        counts.update(tokenize(s.sentence, stopwords))
    selected = [(tok, c) for tok, c in counts.items() if c >= min_freq]
    selected.sort(key=lambda tc: (-tc[1], tc[0]))
    concepts = [tok for tok, _ in selected]
    unseen = set()
    for tok in extra_concepts:
        if tok not in concepts:
            concepts.append(tok)
            if counts[tok] == 0:
                unseen.add(tok)
    if not concepts:
        raise ConfigurationError(
            f"no token reaches frequency {min_freq}; lower --min-freq")
    embeddings = table.matrix(concepts)
    return ConceptVocabulary(concepts=concepts, embeddings=embeddings,
                             min_freq=min_freq, unseen=unseen)


def concept_frequencies(samples, stopwords=None):
    """Independent recount used by tests to re-check the selection threshold."""
    counts = Counter()
    for s in samples:
        counts.update(tokenize(s.sentence, stopwords))
    return counts


def build_relation_graph(samples, vocab, stopwords=None):
    """Concept relation graph G from sentence-level co-occurrence.

    e_ij = (#sentences with both i and j) / max(#sentences with i, 1), then
    G_ij = max(e_ij, e_ji).  Pairs that never co-occur and involve at least
    one corpus-unseen concept fall back to max(0, cosine similarity) of
    their initial embeddings.  The diagonal is 1 (self-loops keep every
    degree positive).
    """
    m = vocab.size
    idx = {tok: i for i, tok in enumerate(vocab.concepts)}
    present = np.zeros(m)          # c_i: sentences containing concept i
    co = np.zeros((m, m))          # c_ij
    for s in samples:
        seen = sorted({idx[t] for t in tokenize(s.sentence, stopwords) if t in idx})
        for i in seen:
            present[i] += 1
        for a_pos, i in enumerate(seen):
            for j in seen[a_pos + 1:]:
                co[i, j] += 1
                co[j, i] += 1

    denom = np.maximum(present, 1.0)
    cond = co / denom[:, None]              # e_ij = c_ij / c_i
    graph = np.maximum(cond, cond.T)

    unseen_mask = np.array([tok in vocab.unseen or present[i] == 0
                            for i, tok in enumerate(vocab.concepts)])
    if unseen_mask.any():
        norms = np.linalg.norm(vocab.embeddings, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        unit = vocab.embeddings / safe[:, None]
        cos = np.clip(unit @ unit.T, 0.0, None)
        involves_unseen = unseen_mask[:, None] | unseen_mask[None, :]
        fallback = involves_unseen & (co == 0)
        graph = np.where(fallback, cos, graph)

    np.fill_diagonal(graph, 1.0)
    return graph


def normalize_adjacency(graph):
    """A = D^-1/2 G D^-1/2 with D the row-degree diagonal of G."""
    graph = np.asarray(graph, dtype=np.float64)
    if graph.ndim != 2 or graph.shape[0] != graph.shape[1]:
        raise ContractError(f"adjacency must be square, got {graph.shape}")
    if not np.allclose(graph, graph.T, atol=1e-12):
        raise ContractError("adjacency must be symmetric")
    if (graph < 0).any():
        raise ContractError("adjacency must be nonnegative")
    degrees = graph.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    return graph * inv_sqrt[:, None] * inv_sqrt[None, :]


def finalize_vocabulary(samples, vocab, stopwords=None):
    """Attach G and A to the vocabulary (guarded against double normalization)."""
    if vocab.adjacency_normalized:
        raise ContractError("adjacency already normalized for this vocabulary")
    vocab.relation_graph = build_relation_graph(samples, vocab, stopwords)
    vocab.normalized_adjacency = normalize_adjacency(vocab.relation_graph)
    vocab.adjacency_normalized = True
    return vocab

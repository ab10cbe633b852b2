"""Seeded synthetic dataset generator.

Concept tokens come in correlated pairs: each sample picks one pair plus
extra distinct concepts, writes a sentence from those tokens padded with
filler stop words, and plants the chosen concepts' mean embedding inside a
uniformly drawn ground-truth clip span.  Clips outside the span carry
distractor-concept embeddings.  All randomness flows from one counter-based
Philox stream, so equal seeds give bit-identical datasets.
"""

import numpy as np

from .corpus import EmbeddingTable, Sample
from .encoders import ClipFeatureSequence, enumerate_spans
from .errors import ContractError

FILLERS = ("the", "is", "and", "a")
CLIP_SECONDS = 2.0


def concept_token(i):
    return f"obj{i:02d}"


def generate_synthetic(seed, n_videos, n_clips=16, dim=64, n_concepts=40,
                       concepts_per_query=3, noise=0.1):
    """Returns (samples, features dict, embedding table)."""
    if not (n_concepts >= concepts_per_query >= 1):
        raise ContractError("need n_concepts >= concepts_per_query >= 1")
    if concepts_per_query < 2:
        raise ContractError("pair structure needs at least 2 concepts per query")
    rng = np.random.Generator(np.random.Philox(seed))

    tokens = [concept_token(i) for i in range(n_concepts)]
    emb = rng.normal(size=(n_concepts, dim))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    table = EmbeddingTable({t: emb[i] for i, t in enumerate(tokens)}, dim)

    spans = enumerate_spans(n_clips, dense=True)
    duration = n_clips * CLIP_SECONDS
    n_pairs = n_concepts // 2

    samples, features = [], {}
    for v in range(n_videos):
        vid = f"v{v:04d}"
        pair = int(rng.integers(n_pairs))
        chosen = [2 * pair, 2 * pair + 1]
        others = [i for i in range(n_concepts) if i not in chosen]
        extra = rng.choice(len(others), size=concepts_per_query - 2, replace=False)
        chosen += [others[i] for i in extra]

        words = [tokens[i] for i in chosen]
        order = rng.permutation(len(words))
        pieces = []
        for k in order:
            pieces.append(FILLERS[int(rng.integers(len(FILLERS)))])
            pieces.append(words[k])
        sentence = " ".join(pieces)

        a, b = spans[int(rng.integers(len(spans)))]
        start_s, end_s = a * CLIP_SECONDS, (b + 1) * CLIP_SECONDS

        target = emb[chosen].mean(axis=0)
        clips = np.empty((n_clips, dim))
        for c in range(n_clips):
            if a <= c <= b:
                clips[c] = target
            else:
                distractor = others[int(rng.integers(len(others)))]
                clips[c] = emb[distractor]
        clips += noise * rng.normal(size=clips.shape)

        samples.append(Sample(vid, duration, start_s, end_s, sentence))
        features[vid] = ClipFeatureSequence(vid, duration, clips)
    return samples, features, table

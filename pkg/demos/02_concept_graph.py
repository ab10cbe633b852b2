"""Build the commonsense concept vocabulary from a toy corpus.

Concepts are high-frequency non-stop tokens; their relation graph comes
from sentence-level co-occurrence counts, with a cosine-similarity
fallback for concepts never seen in the corpus.  The symmetric degree
normalization of the graph feeds the two-layer graph convolution.
"""

import numpy as np

from vtground.concepts import (build_relation_graph, concept_frequencies,
                               finalize_vocabulary, select_concepts)
from vtground.corpus import EmbeddingTable, Sample

SENTENCES = [
    "the man cuts an onion on the kitchen counter",
    "a man washes the pan at the kitchen sink",
    "the woman stirs the pan on the stove",
    "a man places the onion into the pan",
    "the woman wipes the kitchen counter",
]
samples = [Sample(f"v{i}", 30.0, 5.0, 15.0, s)
           for i, s in enumerate(SENTENCES)]

rng = np.random.default_rng(0)
tokens = sorted({t for s in SENTENCES for t in s.split()})
table = EmbeddingTable({t: rng.normal(size=8) for t in tokens}, 8)

print("=== token frequencies (stop words removed) ===")
for token, count in sorted(concept_frequencies(samples).items(),
                           key=lambda kv: (-kv[1], kv[0])):
    print(f"  {token:8s} {count}")

vocab = select_concepts(samples, min_freq=2, table=table)
print(f"\nconcepts at min_freq=2: {vocab.concepts}")

graph = build_relation_graph(samples, vocab)
print("\nrelation graph G (row/col order follows the concept list):")
with np.printoptions(precision=2, suppress=True):
    print(graph)

finalize_vocabulary(samples, vocab)
print("\nnormalized adjacency A = D^-1/2 G D^-1/2:")
with np.printoptions(precision=2, suppress=True):
    print(vocab.normalized_adjacency)

i, j = vocab.index("kitchen"), vocab.index("pan")
print(f"\nG[kitchen, pan] = {graph[i, j]:.2f} "
      "(they share sentences, so the edge is strong)")

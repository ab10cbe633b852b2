"""Modality encoders: 2D temporal proposal map, bidirectional gated
recurrent query encoder, and the two-layer concept GCN.

Recurrent cell (per direction, gates z/r/n, PyTorch-style candidate gating):
    xg = x W + b        hg = h U
    z  = sigmoid(xg_z + hg_z)
    r  = sigmoid(xg_r + hg_r)
    n  = tanh(xg_n + r * hg_n)
    h' = (1 - z) * n + z * h
Two stacked layers; layer 2 consumes the concatenated bidirectional output
of layer 1.  Hidden size per direction is d_q / 2.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .tensor import Tensor, concat


@dataclass
class ClipFeatureSequence:
    video_id: str
    duration_s: float
    features: np.ndarray  # T_c x d_v


@dataclass
class ProposalSet:
    spans_clip: list       # N pairs (a, b), 0 <= a <= b < N_c
    spans_s: np.ndarray    # N x 2 second boundaries
    features: np.ndarray   # N x d_v pooled features
    n_clips: int

    def __len__(self):
        return len(self.spans_clip)


def enumerate_spans(n_clips, dense=True):
    """Valid cells of the upper-triangular 2D map, row-major.

    When ``dense`` is off, spans of length <= N_c/8 are kept densely and
    longer spans are kept only when both boundaries align to a power-of-two
    stride s = 2^ceil(log2(len / (N_c/8))).
    """
    spans = []
    short = max(1, n_clips // 8)
    for a in range(n_clips):
        for b in range(a, n_clips):
            if dense:
                spans.append((a, b))
                continue
            length = b - a + 1
            if length <= short:
                spans.append((a, b))
            else:
                stride = 1
                while stride * short < length:
                    stride *= 2
                if a % stride == 0 and (b + 1) % stride == 0:
                    spans.append((a, b))
    return spans


def resample_clips(features, n_clips):
    """Average T_c clip rows into exactly n_clips uniform segments."""
    t_c = features.shape[0]
    if t_c == n_clips:
        return features
    bounds = np.floor(np.arange(n_clips + 1) * t_c / n_clips).astype(int)
    out = np.empty((n_clips, features.shape[1]))
    for s in range(n_clips):
        lo, hi = bounds[s], max(bounds[s + 1], bounds[s] + 1)
        out[s] = features[lo:hi].mean(axis=0)
    return out


def build_proposal_map(clips, n_clips, dense=True, pooling="max"):
    """Pool clip features over every valid span of the 2D temporal map."""
    if clips.features.shape[0] < 1:
        raise ContractError("clip sequence is empty")
    feats = resample_clips(np.asarray(clips.features, dtype=np.float64), n_clips)
    spans = enumerate_spans(n_clips, dense=dense)
    pooled = np.empty((len(spans), feats.shape[1]))
    for i, (a, b) in enumerate(spans):
        seg = feats[a:b + 1]
        pooled[i] = seg.max(axis=0) if pooling == "max" else seg.mean(axis=0)
    unit = clips.duration_s / n_clips
    spans_s = np.array([(a * unit, (b + 1) * unit) for a, b in spans])
    return ProposalSet(spans_clip=spans, spans_s=spans_s, features=pooled,
                       n_clips=n_clips)


def _gru_step(x, h, weights, hidden):
    xg = x.matmul(weights["W"]) + weights["b"]
    hg = h.matmul(weights["U"])
    z = (xg.cols(0, hidden) + hg.cols(0, hidden)).sigmoid()
    r = (xg.cols(hidden, 2 * hidden) + hg.cols(hidden, 2 * hidden)).sigmoid()
    n = (xg.cols(2 * hidden, 3 * hidden) + r * hg.cols(2 * hidden, 3 * hidden)).tanh()
    return (1.0 - z) * n + z * h


def _run_direction(inputs, weights, hidden, reverse):
    order = range(len(inputs) - 1, -1, -1) if reverse else range(len(inputs))
    h = Tensor(np.zeros((1, hidden)))
    states = [None] * len(inputs)
    for t in order:
        h = _gru_step(inputs[t], h, weights, hidden)
        states[t] = h
    return states


def encode_query(tokens, table, params, d_q, max_query_len=30):
    """Encode a token list into per-word features (L x d_q) and the
    sentence feature q (1 x d_q) = [forward last ; backward first]."""
    if not tokens:
        raise ContractError("cannot encode an empty token list")
    if len(tokens) > max_query_len:
        warnings.warn(f"query of {len(tokens)} tokens truncated to {max_query_len}")
        tokens = tokens[:max_query_len]
    hidden = d_q // 2
    emb = table.matrix(tokens)
    inputs = [Tensor(emb[t:t + 1]) for t in range(len(tokens))]
    for layer in (0, 1):
        wf = {k: params[f"l{layer}.f.{k}"] for k in ("W", "U", "b")}
        wb = {k: params[f"l{layer}.b.{k}"] for k in ("W", "U", "b")}
        fwd = _run_direction(inputs, wf, hidden, reverse=False)
        bwd = _run_direction(inputs, wb, hidden, reverse=True)
        inputs = [concat([f, b], axis=1) for f, b in zip(fwd, bwd)]
    word_features = concat(inputs, axis=0)
    q = concat([fwd[-1], bwd[0]], axis=1)
    # q must equal the last-forward/first-backward composition of the
    # word-level features
    composed = np.concatenate([word_features.data[-1, :hidden],
                               word_features.data[0, hidden:]])
    assert np.allclose(q.data.ravel(), composed)
    return word_features, q


def encode_concepts(vocab, gcn_params):
    """Two-layer GCN over the normalized adjacency:
    C = A . relu(A . E . W1) . W2 (ReLU after layer 1 only)."""
    if vocab.normalized_adjacency is None:
        raise ContractError("vocabulary has no normalized adjacency")
    adj = Tensor(vocab.normalized_adjacency)
    emb = Tensor(vocab.embeddings)
    w1, w2 = gcn_params["W1"], gcn_params["W2"]
    if emb.shape[1] != w1.shape[0]:
        raise ContractError(f"GCN input width {w1.shape[0]} does not match "
                            f"embedding dimension {emb.shape[1]}")
    hidden = adj.matmul(emb).matmul(w1).relu()
    return adj.matmul(hidden).matmul(w2)

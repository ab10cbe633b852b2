"""Offline gallery precomputation, the fast query path with its TE/CML
timing decomposition, model evaluation, and the latency benchmark.

The query path runs text encoding plus dot products only; the visual
fusion block is precomputed offline per video (concept features are
query-independent).  interaction.FUSION_CALLS instruments that claim.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import alignment, encoders, evaluation, model
from .corpus import tokenize
from .errors import ContractError, DataError
from .tensor import Tensor, no_grad
from .tensorio import GalleryEntry


class QueryContext:
    """Loaded model state shared by every query: parameters, the
    precomputed concept features, and the mixing weight gamma."""

    def __init__(self, params, config, vocab, table, stopwords=None):
        self.params = {k: (v if isinstance(v, Tensor) else Tensor(v))
                       for k, v in params.items()}
        self.config = config
        self.vocab = vocab
        self.table = table
        self.stopwords = stopwords
        self.gamma = float(1.0 / (1.0 + np.exp(-self.params["g"].data[0, 0])))
        if model.needs_concepts(config.ablation):
            with no_grad():
                self.conc = encoders.encode_concepts(
                    vocab, model.gcn_params(self.params))
        else:
            self.conc = None


def compute_entry(ctx, clip_sequence):
    """Offline work for one video: proposals, visual fusion, projections."""
    pset = encoders.build_proposal_map(
        clip_sequence, ctx.config.N_c,
        dense=ctx.config.dense_proposals, pooling=ctx.config.pooling)
    with no_grad():
        p_hat = model.guided_proposals(Tensor(pset.features), ctx.conc,
                                       ctx.params, ctx.config,
                                       ctx.config.ablation)
        g1 = alignment.apply_mlp(p_hat, ctx.params, "phi1").data
        g2 = alignment.apply_mlp(p_hat, ctx.params, "phi2").data
    return GalleryEntry(clip_sequence.video_id, pset.spans_s.copy(), g1, g2)


def precompute_gallery(ctx, features):
    """Build gallery entries for every video in ``features``."""
    return [compute_entry(ctx, features[vid]) for vid in sorted(features)]


def encode_sentence(ctx, sentence):
    """TE phase: tokenize and run the recurrent query encoder."""
    tokens = tokenize(sentence, ctx.stopwords)
    if not tokens:
        raise DataError(f"sentence tokenizes to nothing: {sentence!r}")
    with no_grad():
        _, q = encoders.encode_query(tokens, ctx.table,
                                     model.query_params(ctx.params),
                                     ctx.config.d_q, ctx.config.max_query_len)
    return q


def entry_scores(ctx, entry, q):
    """CML scoring against one gallery entry: concept attention on the
    query, then two dot-product batches mixed by gamma."""
    with no_grad():
        q_hat = model.guided_query(q, ctx.conc, ctx.params, ctx.config,
                                   ctx.config.ablation)
    m = entry.g1 @ q.data.ravel()
    n = entry.g2 @ q_hat.data.ravel()
    ablation = ctx.config.ablation
    if ablation == "no_cc":
        return n, m, n
    if ablation == "backbone":
        return m, m, n
    return ctx.gamma * m + (1.0 - ctx.gamma) * n, m, n


@dataclass
class TimingBreakdown:
    te_ms: float
    cml_ms: float

    @property
    def all_ms(self):
        return self.te_ms + self.cml_ms


def query(ctx, entries, video_id, sentence, top_k=5):
    """Answer one query from the gallery.

    Returns (ranked list of (start_s, end_s, score), TimingBreakdown).
    """
    if video_id not in entries:
        raise DataError(f"video_id {video_id!r} not found in gallery")
    entry = entries[video_id]

    t0 = time.perf_counter()
    q = encode_sentence(ctx, sentence)
    t1 = time.perf_counter()
    scores, _, _ = entry_scores(ctx, entry, q)
    kept = evaluation.rank_spans(entry.spans_s, scores,
                                 ctx.config.nms_threshold, top_k)
    results = [(float(entry.spans_s[i, 0]), float(entry.spans_s[i, 1]),
                float(scores[i])) for i in kept]
    t2 = time.perf_counter()
    return results, TimingBreakdown((t1 - t0) * 1e3, (t2 - t1) * 1e3)


def evaluate(ctx, samples, features=None, entries=None, top_k=5):
    """Score every annotated query through the gallery path, apply NMS, and
    build the recall table."""
    if not samples:
        raise ContractError("empty evaluation set")
    if entries is None:
        if features is None:
            raise ContractError("evaluate needs features or a prebuilt gallery")
        entries = {e.video_id: e
                   for e in precompute_gallery(ctx, features)}
    ranked, gts = [], []
    for s in samples:
        entry = entries[s.video_id]
        q = encode_sentence(ctx, s.sentence)
        scores, _, _ = entry_scores(ctx, entry, q)
        kept = evaluation.rank_spans(entry.spans_s, scores,
                                     ctx.config.nms_threshold, top_k)
        ranked.append(entry.spans_s[kept])
        gts.append((s.start_s, s.end_s))
    return evaluation.recall_report(ranked, gts)


def _no_gallery_scores(ctx, clip_sequence, q):
    """Counterfactual CML: recompute the visual fusion block per query."""
    pset = encoders.build_proposal_map(
        clip_sequence, ctx.config.N_c,
        dense=ctx.config.dense_proposals, pooling=ctx.config.pooling)
    with no_grad():
        p_hat = model.guided_proposals(Tensor(pset.features), ctx.conc,
                                       ctx.params, ctx.config,
                                       ctx.config.ablation)
        q_hat = model.guided_query(q, ctx.conc, ctx.params, ctx.config,
                                   ctx.config.ablation)
        a, m, n = alignment.match_scores(p_hat, q, q_hat, ctx.params)
        a = model.mix_scores(a, m, n, ctx.config.ablation)
    return pset.spans_s, a.data.ravel()


def bench(ctx, entries, queries, features, reps=10, warmup=3, top_k=5):
    """Median/p95 per-query latency of the TE and CML phases, plus the
    counterfactual no-gallery CML and the resulting speedup ratio.

    The first ``warmup`` repetitions of each measurement set are discarded
    (cache and allocator warm-up dominate at microsecond scale).
    """
    if reps < 3:
        raise ContractError("bench needs at least 3 repetitions")
    te_times, cml_times, slow_times = [], [], []
    for rep in range(reps + warmup):
        keep = rep >= warmup
        for video_id, sentence in queries:
            t0 = time.perf_counter()
            q = encode_sentence(ctx, sentence)
            t1 = time.perf_counter()
            entry = entries[video_id]
            scores, _, _ = entry_scores(ctx, entry, q)
            evaluation.rank_spans(entry.spans_s, scores,
                                  ctx.config.nms_threshold, top_k)
            t2 = time.perf_counter()
            spans_s, slow_scores = _no_gallery_scores(ctx, features[video_id], q)
            evaluation.rank_spans(spans_s, slow_scores,
                                  ctx.config.nms_threshold, top_k)
            t3 = time.perf_counter()
            if keep:
                te_times.append((t1 - t0) * 1e3)
                cml_times.append((t2 - t1) * 1e3)
                slow_times.append((t3 - t2) * 1e3)
    report = {
        "te_median_ms": float(np.median(te_times)),
        "te_p95_ms": float(np.percentile(te_times, 95)),
        "cml_median_ms": float(np.median(cml_times)),
        "cml_p95_ms": float(np.percentile(cml_times, 95)),
        "no_gallery_cml_median_ms": float(np.median(slow_times)),
        "queries": len(queries),
        "repetitions": reps,
    }
    report["speedup"] = report["no_gallery_cml_median_ms"] / report["cml_median_ms"]
    report["all_median_ms"] = report["te_median_ms"] + report["cml_median_ms"]
    return report


def online_scores(ctx, clip_sequence, sentence):
    """End-to-end forward scores for one pair, used by equivalence tests."""
    pset = encoders.build_proposal_map(
        clip_sequence, ctx.config.N_c,
        dense=ctx.config.dense_proposals, pooling=ctx.config.pooling)
    tokens = tokenize(sentence, ctx.stopwords)
    with no_grad():
        a, *_ = model.forward_sample(pset, tokens, ctx.vocab, ctx.params,
                                     ctx.config, conc=ctx.conc, table=ctx.table)
    return pset.spans_s, a.data.ravel()

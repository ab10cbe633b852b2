"""Greedy temporal NMS and the R@n, IoU=m recall report."""

import json
from dataclasses import dataclass, field

import numpy as np

from .alignment import iou_against
from .errors import ContractError

RECALL_NS = (1, 5)
RECALL_IOUS = (0.1, 0.3, 0.5, 0.7)


def nms(spans_s, scores, threshold):
    """Greedy non-maximum suppression.

    Repeatedly keep the highest-scoring remaining span (ties broken by
    lower index) and suppress remaining spans with IoU > threshold against
    it.  Returns kept indices in score order.
    """
    spans_s = np.asarray(spans_s, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if len(spans_s) != len(scores):
        raise ContractError("spans and scores length mismatch")
    order = np.argsort(-scores, kind="stable")
    kept = []
    while order.size:
        best = order[0]
        kept.append(int(best))
        rest = order[1:]
        if rest.size == 0:
            break
        ious = iou_against(spans_s[rest], tuple(spans_s[best]))
        order = rest[ious <= threshold]
    return kept


def rank_spans(spans_s, scores, nms_threshold, top_k=None):
    """Shared ranking used by both the query path and evaluation:
    stable score sort, NMS, then optional truncation."""
    kept = nms(spans_s, scores, nms_threshold)
    if top_k is not None:
        kept = kept[:top_k]
    return kept


@dataclass
class EvalReport:
    recalls: dict = field(default_factory=dict)  # (n, m) -> percentage
    sum_acc: float = 0.0

    def to_json(self):
        table = {f"R@{n},IoU={m}": self.recalls[(n, m)]
                 for n in RECALL_NS for m in RECALL_IOUS}
        table["sumACC"] = self.sum_acc
        return json.dumps(table)


def recall_report(ranked_spans, ground_truths):
    """Build the recall table from per-query ranked span lists.

    ranked_spans: list (one per query) of NMS-surviving (start_s, end_s)
    spans in score order; ground_truths: matching (start_s, end_s) list.
    A query is a hit at (n, m) iff any of its top-n spans has IoU > m.
    """
    if not ranked_spans:
        raise ContractError("empty evaluation set")
    hits = {(n, m): 0 for n in RECALL_NS for m in RECALL_IOUS}
    for spans, gt in zip(ranked_spans, ground_truths):
        spans = np.asarray(spans, dtype=np.float64).reshape(-1, 2)
        ious = iou_against(spans, gt) if len(spans) else np.zeros(0)
        for n in RECALL_NS:
            best = ious[:n].max() if len(ious) else 0.0
            for m in RECALL_IOUS:
                if best > m:
                    hits[(n, m)] += 1
    total = len(ranked_spans)
    recalls = {key: 100.0 * count / total for key, count in hits.items()}
    return EvalReport(recalls=recalls,
                      sum_acc=recalls[(1, 0.3)] + recalls[(1, 0.5)])

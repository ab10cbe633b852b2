"""Complementary common space: projections against the original and
commonsense-guided queries, adaptive score mixing, soft IoU labels, and the
binary cross-entropy training loss."""

import numpy as np

from .errors import ContractError
from .tensor import Tensor

LOG_CLAMP = 1e-12


def temporal_iou(span_a, span_b):
    """Intersection over union of two (start_s, end_s) spans; 0 when disjoint."""
    (a0, a1), (b0, b1) = span_a, span_b
    if a0 >= a1 or b0 >= b1:
        raise ContractError(f"degenerate span: {span_a} vs {span_b}")
    inter = min(a1, b1) - max(a0, b0)
    if inter <= 0:
        return 0.0
    union = (a1 - a0) + (b1 - b0) - inter
    return inter / union


def iou_against(spans_s, gt):
    """Vectorized temporal IoU of N (start, end) rows against one span."""
    spans_s = np.asarray(spans_s, dtype=np.float64)
    g0, g1 = gt
    if g0 >= g1:
        raise ContractError(f"degenerate ground-truth span {gt}")
    inter = np.minimum(spans_s[:, 1], g1) - np.maximum(spans_s[:, 0], g0)
    inter = np.maximum(inter, 0.0)
    union = (spans_s[:, 1] - spans_s[:, 0]) + (g1 - g0) - inter
    return inter / union


def soft_labels(spans_s, gt, t_min=0.5, t_max=1.0):
    """y_i = clamp((IoU_i - t_min) / (t_max - t_min), 0, 1)."""
    if not (0.0 <= t_min < t_max <= 1.0):
        raise ContractError("need 0 <= t_min < t_max <= 1")
    iou = iou_against(spans_s, gt)
    return np.clip((iou - t_min) / (t_max - t_min), 0.0, 1.0)


def apply_mlp(x, params, prefix):
    """Two-layer perceptron x -> relu(x A + a) B + b."""
    hidden = (x.matmul(params[f"{prefix}.A"]) + params[f"{prefix}.a"]).relu()
    return hidden.matmul(params[f"{prefix}.B"]) + params[f"{prefix}.b"]


def match_scores(p_hat, q, q_hat, params):
    """Complementary common-space scores.

    m_i = phi1(p_hat_i) . q,  n_i = phi2(p_hat_i) . q_hat,
    a_i = gamma m_i + (1 - gamma) n_i with gamma = logistic(g).
    Returns (a, m, n), each N x 1.
    """
    m = apply_mlp(p_hat, params, "phi1").matmul(q.T)
    n = apply_mlp(p_hat, params, "phi2").matmul(q_hat.T)
    gamma = params["g"].sigmoid()
    a = gamma * m + (1.0 - gamma) * n
    return a, m, n


def bce_loss(scores, labels):
    """Mean binary cross entropy of logistic(scores) against soft labels,
    log arguments clamped at 1e-12."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.min() < 0 or labels.max() > 1:
        raise ContractError("labels must lie in [0, 1]")
    y = Tensor(labels.reshape(scores.shape))
    s = scores.sigmoid()
    pos = y * s.maximum_const(LOG_CLAMP).log()
    neg = (1.0 - y) * (1.0 - s).maximum_const(LOG_CLAMP).log()
    return -(pos + neg).mean()

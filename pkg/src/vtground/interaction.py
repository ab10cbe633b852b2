"""Commonsense-aware interaction: multi-head fusion over the concatenated
proposal+concept sequence, and concept attention over the sentence vector.

FUSION_CALLS counts executions of the visual fusion block; the fast query
path asserts it never runs there.
"""

import math

from .errors import ContractError
from .tensor import concat, l2_normalize_rows, layer_norm, softmax_rows

FUSION_CALLS = 0


def visual_commonsense(proposals, conc, params, n_heads, literal_scaling=False):
    """Fuse proposal features with concept features.

    proposals: N x d_v, conc: M x d_v.  Returns the commonsense-guided
    proposal features (first N rows of the row-normalized fusion output).
    """
    global FUSION_CALLS
    FUSION_CALLS += 1
    n = proposals.shape[0]
    if n == 0:
        raise ContractError("no proposals to fuse")
    if conc.shape[1] != proposals.shape[1]:
        raise ContractError(f"concept width {conc.shape[1]} != proposal width "
                            f"{proposals.shape[1]}")
    seq = concat([proposals, conc], axis=0)
    d_v = proposals.shape[1]
    d_h = d_v // n_heads
    if literal_scaling:
        scale = 1.0 / math.sqrt(seq.shape[0] / n_heads)
    else:
        scale = 1.0 / math.sqrt(d_h)

    heads = []
    for i in range(n_heads):
        queries = seq.matmul(params[f"head{i}.WQ"])
        keys = seq.matmul(params[f"head{i}.WK"])
        values = seq.matmul(params[f"head{i}.WV"])
        attn = softmax_rows(queries.matmul(keys.T) * scale)
        heads.append(attn.matmul(values))
    mixed = concat(heads, axis=1).matmul(params["Wmul"])

    ff = (mixed.matmul(params["Wp"]) + params["bp"]).relu() \
        .matmul(params["Wq"]) + params["bq"]
    fused = mixed + layer_norm(ff, params["ln_gain"], params["ln_bias"])
    return l2_normalize_rows(fused).rows(0, n)


def text_commonsense(q, conc, params, literal_scaling=False, n_heads=1):
    """Commonsense-guided query: attention of the sentence vector q (1 x d_q)
    over concept features (M x d_c), then L2 normalization."""
    m = conc.shape[0]
    if m == 0:
        raise ContractError("cannot attend over zero concepts")
    d_a = params["WQ"].shape[1]
    if literal_scaling:
        scale = 1.0 / math.sqrt(m / n_heads)
    else:
        scale = 1.0 / math.sqrt(d_a)
    logits = q.matmul(params["WQ"]).matmul(conc.matmul(params["WK"]).T) * scale
    weights = softmax_rows(logits)
    return l2_normalize_rows(weights.matmul(conc.matmul(params["WV"])))

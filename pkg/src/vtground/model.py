"""Parameter construction and the full forward pass for one sample,
including the four ablation configurations."""

import numpy as np

from . import alignment, encoders, interaction
from .errors import ContractError
from .tensor import Tensor, l2_normalize_rows, parameter


def _uniform(rng, fan_in, shape, gain=1.0):
    bound = gain / np.sqrt(max(fan_in, 1))
    return parameter(rng.uniform(-bound, bound, size=shape))


def init_params(config, d_emb, seed=None):
    """Build every learnable tensor, keyed by a stable dotted name.

    The draw order below is fixed; together with the counter-based Philox
    stream it makes initialization reproducible across runs.
    """
    rng = np.random.Generator(np.random.Philox(
        config.seed if seed is None else seed))
    def draw(fan_in, shape):
        return _uniform(rng, fan_in, shape, gain=config.init_gain)

    d_v, d_q, d_c, d_f = config.d_v, config.d_q, config.d_c, config.d_f
    hidden = d_q // 2
    params = {}

    # bidirectional gated recurrent query encoder, two stacked layers
    for layer, in_dim in ((0, d_emb), (1, 2 * hidden)):
        for direction in ("f", "b"):
            key = f"query.l{layer}.{direction}"
            params[f"{key}.W"] = draw(in_dim, (in_dim, 3 * hidden))
            params[f"{key}.U"] = draw(hidden, (hidden, 3 * hidden))
            params[f"{key}.b"] = draw(hidden, (1, 3 * hidden))

    # concept GCN
    params["gcn.W1"] = draw(d_emb, (d_emb, d_c))
    params["gcn.W2"] = draw(d_c, (d_c, d_c))

    # visual fusion block
    d_h = config.d_h
    for i in range(config.n_heads):
        for name in ("WQ", "WK", "WV"):
            params[f"fusion.head{i}.{name}"] = draw(d_v, (d_v, d_h))
    params["fusion.Wmul"] = draw(d_v, (config.n_heads * d_h, d_v))
    params["fusion.Wp"] = draw(d_v, (d_v, d_f))
    params["fusion.bp"] = draw(d_v, (1, d_f))
    params["fusion.Wq"] = draw(d_f, (d_f, d_v))
    params["fusion.bq"] = draw(d_f, (1, d_v))
    params["fusion.ln_gain"] = parameter(np.ones((1, d_v)))
    params["fusion.ln_bias"] = parameter(np.zeros((1, d_v)))

    # text-concept attention
    params["text.WQ"] = draw(d_q, (d_q, d_q))
    params["text.WK"] = draw(d_c, (d_c, d_q))
    params["text.WV"] = draw(d_c, (d_c, d_q))

    # complementary common space
    for prefix in ("phi1", "phi2"):
        params[f"{prefix}.A"] = draw(d_v, (d_v, d_v))
        params[f"{prefix}.a"] = draw(d_v, (1, d_v))
        params[f"{prefix}.B"] = draw(d_v, (d_v, d_q))
        params[f"{prefix}.b"] = draw(d_v, (1, d_q))
    params["g"] = parameter(np.zeros((1, 1)))  # gamma = logistic(0) = 0.5

    if config.init_scheme == "orthogonal":
        # Replace every true matrix by the Q of its QR factorization,
        # rescaled to the original Frobenius norm; vectors (biases,
        # layer-norm parameters, g) keep their uniform draw.
        for p in params.values():
            w = p.data
            if w.ndim == 2 and min(w.shape) > 1:
                q, _ = np.linalg.qr(w if w.shape[0] >= w.shape[1] else w.T)
                q = q if w.shape[0] >= w.shape[1] else q.T
                p.data = q * (np.linalg.norm(w) / np.linalg.norm(q))

    return params


def group_params(params, prefix):
    return {k: v for k, v in params.items() if k.startswith(prefix)}


def query_params(params):
    return {k[len("query."):]: v for k, v in params.items()
            if k.startswith("query.")}


def fusion_params(params):
    return {k[len("fusion."):]: v for k, v in params.items()
            if k.startswith("fusion.")}


def text_params(params):
    return {k[len("text."):]: v for k, v in params.items()
            if k.startswith("text.")}


def gcn_params(params):
    return {k[len("gcn."):]: v for k, v in params.items()
            if k.startswith("gcn.")}


def needs_concepts(ablation):
    return ablation != "backbone"


def guided_proposals(proposal_features, conc, params, config, ablation):
    """P-hat per ablation: the fusion block, or plain row normalization."""
    if ablation in ("no_vc", "backbone"):
        return l2_normalize_rows(proposal_features)
    return interaction.visual_commonsense(
        proposal_features, conc, fusion_params(params), config.n_heads,
        literal_scaling=config.literal_attention_scaling)


def guided_query(q, conc, params, config, ablation):
    """q-hat per ablation: concept attention, or plain normalization."""
    if ablation in ("no_tc", "backbone"):
        return l2_normalize_rows(q)
    return interaction.text_commonsense(
        q, conc, text_params(params),
        literal_scaling=config.literal_attention_scaling,
        n_heads=config.n_heads)


def mix_scores(a, m, n, ablation):
    if ablation == "no_cc":
        return n
    if ablation == "backbone":
        return m
    return a


def forward_sample(proposals, tokens, vocab, params, config, ablation=None,
                   conc=None, table=None):
    """Full pipeline for one (video, query) pair.

    Returns (a, m, n, p_hat, q, q_hat).  ``conc`` may carry precomputed
    concept features to share the GCN across a batch.
    """
    ablation = ablation or config.ablation
    if conc is None and needs_concepts(ablation):
        conc = encoders.encode_concepts(vocab, gcn_params(params))
    if table is None:
        raise ContractError("forward_sample needs an embedding table")

    _, q = encoders.encode_query(tokens, table, query_params(params),
                                 config.d_q, config.max_query_len)
    feats = proposals.features if isinstance(proposals, Tensor) \
        else Tensor(proposals.features)
    p_hat = guided_proposals(feats, conc, params, config, ablation)
    q_hat = guided_query(q, conc, params, config, ablation)
    a, m, n = alignment.match_scores(p_hat, q, q_hat, params)
    return mix_scores(a, m, n, ablation), m, n, p_hat, q, q_hat

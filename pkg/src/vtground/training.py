"""Adam optimizer and the deterministic mini-batch training loop.

The shuffle stream is a counter-based Philox generator keyed on the config
seed, so identical (seed, config, data) always visit samples in the same
order and produce bit-identical parameters.
"""

import numpy as np

from . import alignment, encoders, model
from .corpus import tokenize
from .errors import NumericError
from .tensor import Tensor


class AdamState:
    """Per-parameter first/second moments and the shared step counter."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}


def adam_step(params, state, lr):
    """Standard bias-corrected Adam update; missing gradients count as zero."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction = np.sqrt(1.0 - b2 ** state.step) / (1.0 - b1 ** state.step)
    for name, p in params.items():
        grad = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        state.m[name] = b1 * state.m[name] + (1 - b1) * grad
        state.v[name] = b2 * state.v[name] + (1 - b2) * grad * grad
        p.data -= lr * correction * state.m[name] / (np.sqrt(state.v[name]) + state.eps)
        p.grad = None


def scheduled_lr(config, steps_done, total_steps):
    """Learning rate after ``steps_done`` of ``total_steps`` optimizer steps:
    the base rate times the factor of the last milestone fraction reached."""
    scale = 1.0
    for milestone, factor in zip(config.lr_milestones, config.lr_factors):
        if steps_done >= milestone * total_steps:
            scale = factor
    return config.learning_rate * scale


def prepare_samples(samples, features, config, stopwords=None):
    """Precompute per-sample proposal sets, tokens, and soft labels."""
    proposals = {}
    prepared = []
    for s in samples:
        if s.video_id not in proposals:
            proposals[s.video_id] = encoders.build_proposal_map(
                features[s.video_id], config.N_c,
                dense=config.dense_proposals, pooling=config.pooling)
        pset = proposals[s.video_id]
        labels = alignment.soft_labels(pset.spans_s, (s.start_s, s.end_s),
                                       config.t_min, config.t_max)
        prepared.append((s, pset, tokenize(s.sentence, stopwords), labels))
    return prepared, proposals


def train(config, samples, features, vocab, table, params=None, stopwords=None,
          on_epoch=None):
    """Mini-batch Adam training; returns (params, per-epoch mean losses)."""
    if params is None:
        params = model.init_params(config, table.dim)
    prepared, _ = prepare_samples(samples, features, config, stopwords)
    state = AdamState(params)
    shuffle_rng = np.random.Generator(np.random.Philox(config.seed))
    loss_curve = []
    steps_per_epoch = -(-len(prepared) // config.batch_size)
    total_steps = max(config.epochs * steps_per_epoch, 1)

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(prepared))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [prepared[i] for i in order[start:start + config.batch_size]]
            conc = encoders.encode_concepts(vocab, model.gcn_params(params)) \
                if model.needs_concepts(config.ablation) else None
            total = None
            for sample, pset, tokens, labels in batch:
                scores, *_ = model.forward_sample(
                    pset, tokens, vocab, params, config,
                    conc=conc, table=table)
                loss = alignment.bce_loss(scores, labels)
                if not np.isfinite(loss.data):
                    raise NumericError(
                        f"non-finite loss on sample video_id={sample.video_id!r}")
                total = loss if total is None else total + loss
                epoch_losses.append(float(loss.data))
            batch_loss = total * (1.0 / len(batch))
            batch_loss.backward()
            lr = scheduled_lr(config, state.step, total_steps)
            adam_step(params, state, lr)
            if config.weight_decay > 0.0:
                shrink = 1.0 - config.weight_decay * lr
                for name, p in params.items():
                    if not name.endswith(("ln_gain", "ln_bias")):
                        p.data *= shrink
        loss_curve.append(float(np.mean(epoch_losses)))
        if on_epoch is not None:
            on_epoch(epoch, loss_curve[-1])
    return params, loss_curve

"""Command-line surface.

Subcommands: build-concepts, synth, train, gallery, query, eval, bench.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Reports are emitted as JSON on standard output.
"""

import argparse
import json
import os
import sys

from . import concepts, corpus, gallery as gallery_mod, synth, tensorio, training
from .config import TrainConfig
from .errors import ConfigurationError, ContractError, DataError, NumericError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser():
    parser = _Parser(prog="vtground",
                     description="Fast video temporal grounding with a "
                                 "precomputed proposal gallery.")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("build-concepts", parents=[], add_help=True,
                       help="build the concept vocabulary artifact")
    p.add_argument("--annotations", required=True)
    p.add_argument("--min-freq", type=int, default=3)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--stopwords", default=None)
    p.add_argument("--extra-concepts", default=None,
                   help="file of extra tokens, one per line")
    p.add_argument("--out", required=True, help="output artifact directory")

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-train", type=int, default=200)
    p.add_argument("--n-eval", type=int, default=100)
    p.add_argument("--n-clips", type=int, default=16)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--n-concepts", type=int, default=40)
    p.add_argument("--concepts-per-query", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.1)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", required=True, help="JSON TrainConfig")
    p.add_argument("--annotations", required=True)
    p.add_argument("--features", required=True, help="clip feature directory")
    p.add_argument("--vocab", required=True, help="vocabulary artifact directory")
    p.add_argument("--out-model", required=True)

    p = sub.add_parser("gallery", help="precompute the proposal gallery")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("query", help="answer one sentence query")
    p.add_argument("--gallery", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--sentence", required=True)
    p.add_argument("--video-id", required=True)
    p.add_argument("--top-k", type=int, default=5)

    p = sub.add_parser("eval", help="compute the R@n,IoU=m recall table")
    p.add_argument("--gallery", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--annotations", required=True)

    p = sub.add_parser("bench", help="latency benchmark of the query path")
    p.add_argument("--gallery", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--queries", required=True,
                   help="JSONL of {video_id, sentence}")
    p.add_argument("--reps", type=int, default=10)
    return parser


def _load_context(args):
    params, config_dict, model_hash = tensorio.load_model(args.model)
    config = TrainConfig.from_dict(config_dict)
    vocab, table = tensorio.load_vocabulary(args.vocab)
    ctx = gallery_mod.QueryContext(params, config, vocab, table)
    return ctx, model_hash


def _load_gallery_checked(path, model_hash):
    stored_hash, entries = tensorio.load_gallery(path)
    if stored_hash != model_hash:
        raise DataError(f"gallery {path} was built with a different model "
                        f"(hash {stored_hash[:12]}... vs {model_hash[:12]}...)")
    return entries


def _cmd_build_concepts(args):
    stopwords = corpus.load_stopwords(args.stopwords)
    samples = corpus.load_annotations(args.annotations, stopwords)
    table = corpus.load_embeddings(args.embeddings)
    extra = ()
    if args.extra_concepts:
        with open(args.extra_concepts) as fh:
            extra = tuple(t for t in fh.read().split() if t)
    vocab = concepts.select_concepts(samples, args.min_freq, table,
                                     stopwords, extra)
    concepts.finalize_vocabulary(samples, vocab, stopwords)
    tensorio.save_vocabulary(args.out, vocab, table,
                             corpus.stopword_hash(stopwords))
    print(json.dumps({"concepts": vocab.size, "out": args.out}))
    return 0


def _cmd_synth(args):
    samples, features, table = synth.generate_synthetic(
        args.seed, args.n_train + args.n_eval, n_clips=args.n_clips,
        dim=args.dim, n_concepts=args.n_concepts,
        concepts_per_query=args.concepts_per_query, noise=args.noise)
    os.makedirs(args.out_dir, exist_ok=True)
    corpus.save_annotations(os.path.join(args.out_dir, "train.jsonl"),
                            samples[:args.n_train])
    corpus.save_annotations(os.path.join(args.out_dir, "eval.jsonl"),
                            samples[args.n_train:])
    tensorio.save_features_dir(os.path.join(args.out_dir, "features"), features)
    corpus.save_embeddings(os.path.join(args.out_dir, "embeddings.txt"), table)
    print(json.dumps({"out_dir": args.out_dir, "train": args.n_train,
                      "eval": args.n_eval}))
    return 0


def _cmd_train(args):
    config = TrainConfig.from_json(args.config)
    samples = corpus.load_annotations(args.annotations)
    vocab, table = tensorio.load_vocabulary(args.vocab)
    features = tensorio.load_features_dir(
        args.features, sorted({s.video_id for s in samples}))
    params, curve = training.train(
        config, samples, features, vocab, table,
        on_epoch=lambda e, l: print(json.dumps({"epoch": e, "mean_loss": l})))
    tensorio.save_model(args.out_model, params, config.to_dict())
    return 0


def _cmd_gallery(args):
    ctx, model_hash = _load_context(args)
    features = tensorio.load_features_dir(args.features)
    entries = gallery_mod.precompute_gallery(ctx, features)
    tensorio.save_gallery(args.out, model_hash, entries)
    print(json.dumps({"entries": len(entries), "out": args.out}))
    return 0


def _cmd_query(args):
    ctx, model_hash = _load_context(args)
    entries = _load_gallery_checked(args.gallery, model_hash)
    results, timing = gallery_mod.query(ctx, entries, args.video_id,
                                        args.sentence, args.top_k)
    print(json.dumps({
        "results": [{"start_s": s, "end_s": e, "score": a}
                    for s, e, a in results],
        "te_ms": timing.te_ms,
        "cml_ms": timing.cml_ms,
        "all_ms": timing.all_ms,
    }))
    return 0


def _cmd_eval(args):
    ctx, model_hash = _load_context(args)
    entries = _load_gallery_checked(args.gallery, model_hash)
    samples = corpus.load_annotations(args.annotations)
    report = gallery_mod.evaluate(ctx, samples, entries=entries)
    print(report.to_json())
    return 0


def _cmd_bench(args):
    ctx, model_hash = _load_context(args)
    entries = _load_gallery_checked(args.gallery, model_hash)
    queries = []
    with open(args.queries) as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                queries.append((obj["video_id"], obj["sentence"]))
    features = tensorio.load_features_dir(
        args.features, sorted({v for v, _ in queries}))
    report = gallery_mod.bench(ctx, entries, queries, features, reps=args.reps)
    print(json.dumps(report))
    return 0


_COMMANDS = {
    "build-concepts": _cmd_build_concepts,
    "synth": _cmd_synth,
    "train": _cmd_train,
    "gallery": _cmd_gallery,
    "query": _cmd_query,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
}


def cli(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (DataError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except (NumericError, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except (ConfigurationError, ContractError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2


def main():
    raise SystemExit(cli())


if __name__ == "__main__":
    main()

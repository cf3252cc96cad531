"""Command-line entry points.

One subcommand per pipeline stage; everything file-in/file-out so runs
are scriptable and auditable.  A JSON config file (``--config`` or the
``DOCSCRIBE_CONFIG`` environment variable) supplies the service settings
and decoding defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import acoustic_io, augmentation, corpus, evaluation, ngram_lm, rescoring
from .ctc_decoder import DecodeConfig, beam_search, greedy_decode
from .nbest import load_nbest, nbest_to_dict, save_nbest
from .orthography import load_alphabet, normalize
from .service import ServiceConfig, create_app

CONFIG_ENV = "DOCSCRIBE_CONFIG"


def _read_sentences(path, alphabet=None):
    sentences = []
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if not line:
                continue
            if alphabet is not None:
                sentences.append(list(normalize(line, alphabet).words))
            else:
                sentences.append(line.split())
    return sentences


def _read_tsv(path):
    """id<TAB>text lines -> {id: text}."""
    out = {}
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            line = line.rstrip("\n")
            if not line:
                continue
            utt_id, _, text = line.partition("\t")
            out[utt_id] = text
    return out


def cmd_lm_train(args):
    alphabet = load_alphabet(args.alphabet) if args.alphabet else None
    sentences = _read_sentences(args.corpus, alphabet)
    model = ngram_lm.train(sentences, order=args.order)
    ngram_lm.write_arpa(model, args.arpa)
    print(f"trained {model.order}-gram over {len(model.vocab)} words -> {args.arpa}")


def cmd_lm_perplexity(args):
    model = ngram_lm.read_arpa(args.arpa)
    alphabet = load_alphabet(args.alphabet) if args.alphabet else None
    sentences = _read_sentences(args.corpus, alphabet)
    print(f"perplexity: {ngram_lm.perplexity(model, sentences):.4f}")


def cmd_decode(args):
    alphabet = load_alphabet(args.alphabet)
    matrix = acoustic_io.read_logits(args.logits, alphabet)
    if args.greedy:
        hyp = greedy_decode(matrix)
        print(hyp.transcript.text)
        return
    lm = ngram_lm.read_arpa(args.arpa) if args.arpa else None
    cfg = DecodeConfig(
        beam_width=args.beam_width,
        alpha=args.alpha if lm is not None else 0.0,
        beta=args.beta if lm is not None else 0.0,
        lm=lm,
        nbest=min(args.nbest, args.beam_width),
    )
    nb = beam_search(matrix, cfg, utterance_id=args.utterance_id)
    if args.out:
        save_nbest(nb, args.out)
    print(nb.top.transcript.text)


def cmd_rescore(args):
    alphabet = load_alphabet(args.alphabet)
    lm = ngram_lm.read_arpa(args.arpa)
    nb = load_nbest(args.nbest, alphabet)
    out = rescoring.rescore(nb, lm, alpha=args.alpha, gamma_len=args.gamma_len)
    if args.out:
        save_nbest(out, args.out)
    else:
        json.dump(nbest_to_dict(out), sys.stdout, ensure_ascii=False, indent=2)
        print()


def cmd_evaluate(args):
    alphabet = load_alphabet(args.alphabet)
    if args.manifests:
        refs = {u.id: u.text for u in corpus.load_manifest(args.ref)}
        hyps = {u.id: u.text for u in corpus.load_manifest(args.hyp)}
    else:
        refs = _read_tsv(args.ref)
        hyps = _read_tsv(args.hyp)
    missing = sorted(set(refs) - set(hyps))
    if missing:
        sys.exit(f"hypothesis file lacks ids: {', '.join(missing[:5])}")
    pairs = [
        (normalize(refs[i], alphabet), normalize(hyps[i], alphabet))
        for i in sorted(refs)
    ]
    train_vocab = set()
    if args.train_manifest:
        train_manifest = corpus.load_manifest(args.train_manifest, alphabet)
        train_vocab = set(corpus.vocabulary(train_manifest))
    if args.filtered:
        report = evaluation.filtered_report(pairs, train_vocab, alphabet)
    else:
        report = evaluation.categorized_wer(pairs, train_vocab)
    sys.stdout.write(evaluation.render_report(report, fmt=args.format))


def cmd_split(args):
    manifest = corpus.load_manifest(args.manifest)
    scores = {u.id: u.difficulty for u in manifest if u.difficulty is not None}
    if args.scores:
        with open(args.scores, encoding="utf-8") as fp:
            scores.update(json.load(fp))
    train, test = corpus.split_by_difficulty(manifest, args.test_fraction, scores)
    corpus.save_manifest(train, args.train_out)
    corpus.save_manifest(test, args.test_out)
    print(f"train: {len(train)} utts, test: {len(test)} utts")


def cmd_subset(args):
    manifest = corpus.load_manifest(args.manifest)
    sub = corpus.subset_by_duration(manifest, args.budget_s, args.seed)
    corpus.save_manifest(sub, args.out)
    print(f"{len(sub)} utts, {sub.total_duration_s:.1f}s <= {args.budget_s}s")


def cmd_augment(args):
    real = corpus.load_manifest(args.real)
    synth = augmentation.load_synth_manifest(args.synth)
    budget = augmentation.ALL if args.budget_h == "all" else float(args.budget_h) * 3600.0
    merged = augmentation.merge_augment(real, synth, budget, seed=args.seed)
    corpus.save_manifest(merged, args.out)
    n_synth = len(merged) - len(real)
    print(f"merged {len(real)} real + {n_synth} synthetic utts -> {args.out}")


def cmd_stats(args):
    manifest = corpus.load_manifest(args.manifest)
    json.dump(corpus.corpus_stats(manifest), sys.stdout, indent=2)
    print()


def cmd_serve(args):
    import uvicorn

    config_path = args.config or os.environ.get(CONFIG_ENV)
    if not config_path:
        sys.exit(f"need --config or ${CONFIG_ENV}")
    cfg = ServiceConfig.from_file(config_path)
    uvicorn.run(create_app(cfg), host=args.host, port=args.port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="docscribe")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lm-train", help="estimate a Kneser-Ney n-gram LM, write ARPA")
    p.add_argument("--corpus", required=True, help="text file, one sentence per line")
    p.add_argument("--arpa", required=True, help="output ARPA path")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--alphabet", help="normalize sentences with this alphabet first")
    p.set_defaults(func=cmd_lm_train)

    p = sub.add_parser("lm-perplexity", help="perplexity of an ARPA model on text")
    p.add_argument("--arpa", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--alphabet")
    p.set_defaults(func=cmd_lm_perplexity)

    p = sub.add_parser("decode", help="decode a CTCL logit file")
    p.add_argument("--logits", required=True)
    p.add_argument("--alphabet", required=True)
    p.add_argument("--arpa", help="fuse this LM during the beam search")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--beam-width", type=int, default=8)
    p.add_argument("--nbest", type=int, default=4)
    p.add_argument("--greedy", action="store_true", help="argmax decoding, no beam")
    p.add_argument("--utterance-id", default="")
    p.add_argument("--out", help="write the n-best list as JSON")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("rescore", help="re-rank an n-best JSON file with an LM")
    p.add_argument("--nbest", required=True)
    p.add_argument("--arpa", required=True)
    p.add_argument("--alphabet", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--gamma-len", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rescore)

    p = sub.add_parser("evaluate", help="WER/CER report from id<TAB>text files")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--manifests", action="store_true",
                   help="treat --ref/--hyp as line-JSON manifests instead of TSV")
    p.add_argument("--alphabet", required=True)
    p.add_argument("--train-manifest", help="manifest defining the seen vocabulary")
    p.add_argument("--filtered", action="store_true", help="add cedilla-filtered scores")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("split", help="difficulty-balanced train/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--scores", help="JSON {id: score}; defaults to manifest difficulty")
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("subset", help="duration-budgeted manifest subset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--budget-s", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_subset)

    p = sub.add_parser("augment", help="merge synthetic data under an hour budget")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--budget-h", default="all", help="hours of synthetic audio, or 'all'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("stats", help="corpus statistics of a manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the transcription/review HTTP service")
    p.add_argument("--config", help=f"JSON config (default: ${CONFIG_ENV})")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()

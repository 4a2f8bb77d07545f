"""Command-line interface: ingest, split, train, eval, predict, gradcheck.

Every command is deterministic given its flags, the seed, and the input
bytes. Exit codes: 0 success, 1 runtime/validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import xml.etree.ElementTree as ET

import numpy as np

from . import backends
from .data import (AnnotatedSentence, parse_semeval_xml, read_jsonl,
                   sentence_to_json, split_dataset, tokenize, write_jsonl)
from .embeddings import load_word_vectors
from .errors import AbsaGruError, ConfigError, ParseError
from .gradcheck import CHECKS, run_check
from .ian import (CLASSES, IanConfig, polarity_instances, predict_polarity,
                  train_ian)
from .metrics import span_f1
from .modelio import load_model, save_model
from .ote import OteConfig, predict_ote, train_ote


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def xml_counts(path) -> tuple[int, int, int]:
    """(reviews, sentences, opinion tuples) in a SemEval XML file."""
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from None
    return (sum(1 for _ in root.iter("Review")),
            sum(1 for _ in root.iter("sentence")),
            sum(1 for _ in root.iter("Opinion")))


def cmd_ingest(args) -> int:
    reviews, n_sent, n_ops = xml_counts(args.data)
    with open(args.data, "rb") as fh:
        sentences = parse_semeval_xml(fh)
    write_jsonl(sentences, args.out)
    print(_canonical({"reviews": reviews, "sentences": n_sent,
                      "tuples": n_ops}))
    return 0


def cmd_split(args) -> int:
    sentences = read_jsonl(args.data)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    if len(ratios) != 3:
        raise ConfigError(f"--ratios needs three values, got {args.ratios!r}")
    train, val, test = split_dataset(sentences, ratios, args.seed)
    os.makedirs(args.out, exist_ok=True)
    for name, part in (("train", train), ("validation", val), ("test", test)):
        write_jsonl(part, os.path.join(args.out, f"{name}.jsonl"))
    print(_canonical({"train": len(train), "validation": len(val),
                      "test": len(test)}))
    return 0


def _load_table(args):
    if args.embeddings:
        with open(args.embeddings, encoding="utf-8") as fh:
            return load_word_vectors(fh, expected_dim=args.word_dim)
    return None


def _load_stopwords(path) -> set[str] | None:
    if not path:
        return None
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def cmd_train(args) -> int:
    train_sents = read_jsonl(args.data)
    val_sents = read_jsonl(args.val) if args.val else train_sents
    rng = np.random.default_rng(args.seed)
    if args.task == "ote":
        cfg = OteConfig(seed=args.seed)
        if args.word_dim:
            cfg.word_dim = args.word_dim
        if args.hidden_dim:
            cfg.hidden_dim = args.hidden_dim
        if args.lr is not None:
            cfg.lr0 = args.lr
        if args.dropout is not None:
            cfg.dropout = args.dropout
        if args.clip is not None:
            cfg.clip_norm = args.clip
        if args.epochs:
            cfg.max_epochs = args.epochs
        if args.batch_size:
            cfg.batch_size = args.batch_size
        if args.patience:
            cfg.patience = args.patience
        cfg.freeze_embeddings = args.freeze_embeddings
        cfg.constrain_iob = args.constrain_iob
        table = _load_table(args)
        model, history = train_ote(cfg, train_sents, val_sents, rng, table)
    else:
        cfg = IanConfig(seed=args.seed)
        if args.word_dim:
            cfg.word_dim = args.word_dim
        if args.hidden_dim:
            cfg.hidden_dim = args.hidden_dim
        if args.lr is not None:
            cfg.lr = args.lr
        if args.dropout is not None:
            cfg.dropout = args.dropout
        if args.epochs:
            cfg.epochs = args.epochs
        if args.batch_size:
            cfg.batch_size = args.batch_size
        cfg.freeze_embeddings = args.freeze_embeddings
        stopwords = _load_stopwords(args.stopwords)
        instances = polarity_instances(train_sents, stopwords)
        val_instances = polarity_instances(val_sents, stopwords)
        table = _load_table(args)
        model, history = train_ian(cfg, instances, val_instances, rng, table)
    save_model(model, args.out)
    with open(f"{args.out}.history.json", "w", encoding="utf-8") as fh:
        json.dump(history.as_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(_canonical({"model": str(args.out),
                      "best_epoch": history.best_epoch,
                      "best_metric": history.best_metric}))
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    task = "ote" if hasattr(model, "crf") else "polarity"
    if args.task and args.task != task:
        print(f"error: model at {args.model} is a {task} model, "
              f"--task {args.task} given", file=sys.stderr)
        return 1
    sentences = read_jsonl(args.data)
    if task == "ote":
        gold = [s.explicit_spans() for s in sentences]
        pred = [predict_ote(model, s) for s in sentences]
        print(_canonical(span_f1(gold, pred).as_dict()))
    else:
        preds = []
        for s in sentences:
            for op in s.opinions:
                if op.polarity not in CLASSES:
                    continue
                label, _ = predict_polarity(model, s, op.span)
                preds.append((op.polarity, label))
        correct = sum(1 for g, p in preds if g == p)
        total = len(preds)
        acc = correct / total if total else 0.0
        print(_canonical({"accuracy": acc, "correct": correct,
                          "total": total}))
    return 0


def _input_sentences(args) -> list[AnnotatedSentence]:
    if args.text is not None:
        return [AnnotatedSentence("text-0", args.text, tokenize(args.text))]
    if str(args.data).endswith(".jsonl"):
        return read_jsonl(args.data)
    sentences = []
    with open(args.data, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.rstrip("\n")
            if line:
                sentences.append(
                    AnnotatedSentence(f"line-{i}", line, tokenize(line)))
    return sentences


def cmd_predict(args) -> int:
    model = load_model(args.model)
    if not hasattr(model, "crf"):
        print(f"error: --model must be an extraction model; "
              f"{args.model} is a polarity model", file=sys.stderr)
        return 1
    polarity_model = None
    if args.polarity_model:
        polarity_model = load_model(args.polarity_model)
        if hasattr(polarity_model, "crf"):
            print(f"error: --polarity-model must be a polarity model; "
                  f"{args.polarity_model} is an extraction model",
                  file=sys.stderr)
            return 1
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for s in _input_sentences(args):
            spans = predict_ote(model, s) if s.tokens else []
            opinions = []
            for a, b in spans:
                polarity = ""
                if polarity_model is not None:
                    polarity, _ = predict_polarity(polarity_model, s, (a, b))
                opinions.append({"target": s.text[a:b], "from": a, "to": b,
                                 "category": "", "polarity": polarity})
            record = AnnotatedSentence(s.sentence_id, s.text, s.tokens)
            line = json.loads(sentence_to_json(record))
            line["opinions"] = opinions
            out.write(json.dumps(line, ensure_ascii=False, sort_keys=True,
                                 separators=(",", ":")) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_gradcheck(args) -> int:
    err, worst, threshold = run_check(args.component, args.seed)
    ok = err < threshold
    print(f"{args.component}: max relative error {err:.3e} "
          f"(threshold {threshold:g}, worst {worst}) "
          f"[{backends.backend_name()} backend]")
    if not ok:
        print(f"error: gradient check failed at {worst}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="absagru",
        description="Opinion-target extraction (BGRU-CNN-CRF) and aspect "
                    "polarity classification (IAN-BGRU).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="SemEval ABSA XML -> JSON-lines")
    p.add_argument("--data", required=True, help="input XML file")
    p.add_argument("--out", required=True, help="output JSONL file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="shuffle and split a JSONL dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", default="0.7,0.1,0.2")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model on JSONL data")
    p.add_argument("--task", required=True, choices=["ote", "polarity"])
    p.add_argument("--data", required=True, help="training JSONL")
    p.add_argument("--val", help="validation JSONL (default: training data)")
    p.add_argument("--embeddings", help="pretrained word vectors, text format")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--hidden-dim", type=int)
    p.add_argument("--word-dim", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--clip", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--freeze-embeddings", action="store_true")
    p.add_argument("--constrain-iob", action="store_true")
    p.add_argument("--stopwords", help="stopword list file (polarity only)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on JSONL data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--task", choices=["ote", "polarity"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="extract targets (and polarities)")
    p.add_argument("--model", required=True, help="extraction model file")
    p.add_argument("--polarity-model", help="optional polarity model file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="JSONL or plain-text input file")
    src.add_argument("--text", help="a single sentence")
    p.add_argument("--out", help="output JSONL (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--component", required=True, choices=sorted(CHECKS))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AbsaGruError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

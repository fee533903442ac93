"""Command-line entry point: train, predict, evaluate, selftrain, gradcheck.

Configuration precedence: profile defaults, then a JSON config file, then
explicit flags.  Exit codes: 0 success, 2 bad paths or configuration,
3 evaluation alignment mismatch.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import checks, trainer
from .config import DEFAULT_SEED, RunConfig, make_config
from .conllu import (
    load_raw_corpus,
    parse_conllu,
    read_conllu_file,
    write_conllu,
    write_conllu_file,
)
from .evaluate import AlignmentError, attachment_scores, blex_style, mlas_style, score_report
from .model import JointModel
from .modelfile import load_model, save_model
from .vocab import build_lexicon, build_trainable_embeddings, load_embeddings

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ALIGNMENT = 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _require_file(path, what):
    if path is None:
        raise CliError(f"missing {what} path")
    if not os.path.exists(path):
        raise CliError(f"{what} file not found: {path}")
    return path


def _apply_flags(cfg, args):
    updates = {}
    for flag, key in (
        ("seed", "seed"), ("K", "K"), ("max_epochs", "max_epochs"),
        ("batch_words", "batch_words"),
        ("train", "train_path"), ("dev", "dev_path"), ("raw", "raw_path"),
        ("embeddings", "embeddings_path"), ("model", "model_path"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            updates[key] = value
    if getattr(args, "no_cycle_loss", False):
        updates["cycle_loss"] = False
    return dataclasses.replace(cfg, **updates)


def _load_config(args):
    overrides = {}
    if getattr(args, "config", None):
        with open(_require_file(args.config, "config"), encoding="utf-8") as handle:
            try:
                overrides = json.load(handle)
            except json.JSONDecodeError as exc:
                raise CliError(f"bad config file: {exc}") from exc
    profile = getattr(args, "profile", None) or overrides.pop("profile", "paper")
    base = make_config(profile).to_dict()
    base.update(overrides)
    try:
        cfg = RunConfig.from_dict(base)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad configuration: {exc}") from exc
    return _apply_flags(cfg, args)


def _new_model(cfg, train_tb):
    lexicon, schema = build_lexicon(train_tb)
    if cfg.embeddings_path:
        embeddings = load_embeddings(_require_file(cfg.embeddings_path, "embeddings"),
                                     seed=cfg.seed)
    else:
        import numpy as np

        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        embeddings = build_trainable_embeddings(train_tb, cfg.d_trainable_word, rng)
    return JointModel(cfg, lexicon, schema, embeddings)


def cmd_train(args):
    cfg = _load_config(args)
    train_tb = read_conllu_file(_require_file(cfg.train_path, "train"))
    dev_tb = None
    if cfg.dev_path:
        dev_tb = read_conllu_file(_require_file(cfg.dev_path, "dev"))
    if cfg.model_path is None:
        raise CliError("missing model output path")
    model = _new_model(cfg, train_tb)
    ckpt = trainer.fit(model, train_tb, dev_tb, cfg,
                       log=lambda msg: print(msg, flush=True))
    model.restore(ckpt.params)
    save_model(model, cfg.model_path)
    print(f"model written to {cfg.model_path} (best epoch {ckpt.epoch})")
    return EXIT_OK


def cmd_predict(args):
    model = load_model(_require_file(args.model, "model"))
    path = _require_file(args.input, "input")
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    tb = load_raw_corpus(text) if args.raw else parse_conllu(text)
    pred = model.predict_treebank(tb)
    out = write_conllu(pred)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def cmd_evaluate(args):
    gold = read_conllu_file(_require_file(args.gold, "gold"))
    pred = read_conllu_file(_require_file(args.pred, "pred"))
    try:
        report = score_report(gold, pred)
    except AlignmentError as exc:
        raise CliError(f"alignment mismatch: {exc}", EXIT_ALIGNMENT) from exc
    print(report.to_text())
    print(report.to_json())
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as handle:
            handle.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_selftrain(args):
    cfg = _load_config(args)
    gold_tb = read_conllu_file(_require_file(cfg.train_path, "train"))
    with open(_require_file(cfg.raw_path, "raw corpus"), encoding="utf-8") as handle:
        raw_tb = load_raw_corpus(handle.read())
    dev_tb = None
    if cfg.dev_path:
        dev_tb = read_conllu_file(_require_file(cfg.dev_path, "dev"))
    if cfg.model_path is None:
        raise CliError("missing model output path")

    log = lambda msg: print(msg, flush=True)
    model = _new_model(cfg, gold_tb)
    log("standard training")
    std_ckpt = trainer.fit(model, gold_tb, dev_tb, cfg, log=log)
    model.restore(std_ckpt.params)
    final_ckpt, silver = trainer.self_train(model, gold_tb, raw_tb, cfg,
                                            dev_tb=dev_tb, log=log)
    silver_path = args.silver_out or (cfg.model_path + ".silver.conllu")
    write_conllu_file(silver, silver_path)
    final_model = final_ckpt.build_model()
    save_model(final_model, cfg.model_path)
    print(f"model written to {cfg.model_path}; silver data in {silver_path}")

    if dev_tb is not None:
        rows = []
        for label, m in (("std", model), ("self", final_model)):
            pred = m.predict_treebank(dev_tb)
            _, las = attachment_scores(dev_tb, pred)
            rows.append((label, las, mlas_style(dev_tb, pred), blex_style(dev_tb, pred)))
        print(f"{'model':<6}  {'LAS':>7}  {'MLAS*':>7}  {'BLEX*':>7}")
        for label, las, ml, bl in rows:
            print(f"{label:<6}  {100 * las:7.2f}  {100 * ml:7.2f}  {100 * bl:7.2f}")
    return EXIT_OK


def cmd_gradcheck(args):
    results = checks.run_suite(seed=args.seed if args.seed is not None else DEFAULT_SEED)
    print(checks.format_suite(results))
    return EXIT_OK if all(ok for _, _, ok in results) else 1


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--profile", choices=["paper", "desk"],
                     help="hyperparameter profile (default: paper)")
    sub.add_argument("--seed", type=int, help=f"random seed (default {DEFAULT_SEED})")
    sub.add_argument("--K", type=int, dest="K",
                     help="number of matrix powers in the cycle penalty")
    sub.add_argument("--no-cycle-loss", action="store_true",
                     help="train without the cycle penalty (ablation)")
    sub.add_argument("--max-epochs", type=int, dest="max_epochs")
    sub.add_argument("--batch-words", type=int, dest="batch_words")


def make_arg_parser():
    parser = argparse.ArgumentParser(
        prog="depkit",
        description="Joint tagger, lemmatizer, and graph-based dependency parser.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a CoNLL-U treebank")
    _add_common(p)
    p.add_argument("--train", help="training treebank (CoNLL-U)")
    p.add_argument("--dev", help="development treebank (CoNLL-U)")
    p.add_argument("--embeddings", help="external word embedding text file")
    p.add_argument("--model", help="output model path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="annotate a CoNLL-U or raw file")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--raw", action="store_true",
                   help="input is one whitespace-tokenized sentence per line")
    p.add_argument("--output", help="write CoNLL-U here instead of stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a prediction against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--json-out", dest="json_out", help="also write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("selftrain", help="standard training plus the self-training pipeline")
    _add_common(p)
    p.add_argument("--train")
    p.add_argument("--raw", help="raw corpus, one tokenized sentence per line")
    p.add_argument("--dev")
    p.add_argument("--embeddings")
    p.add_argument("--model")
    p.add_argument("--silver-out", dest="silver_out",
                   help="where to write the predicted silver treebank")
    p.set_defaults(func=cmd_selftrain)

    p = sub.add_parser("gradcheck", help="run the finite-difference gradient suite")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = make_arg_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

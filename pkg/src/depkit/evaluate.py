"""Scoring predicted treebanks against gold: attachment, tagging, lemma,
content-word composites, baselines, and the ablation report.

mlas_style and blex_style are deliberately simplified stand-ins for the
shared-task MLAS/BLEX: they restrict to a fixed content-relation set and
skip treebank-specific feature subsets, so the numbers are comparable only
within this codebase.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, asdict

from .conllu import Sentence, Token, Treebank, validate_tree

# every relation except these function-word relations counts as content
FUNCTION_DEPRELS = {"aux", "cop", "mark", "det", "clf", "case", "cc", "punct"}


def is_content_deprel(deprel):
    return deprel.split(":")[0] not in FUNCTION_DEPRELS


class AlignmentError(ValueError):
    pass


def _paired_tokens(gold, pred):
    if len(gold.sentences) != len(pred.sentences):
        raise AlignmentError(
            f"sentence count mismatch: gold {len(gold.sentences)}, "
            f"pred {len(pred.sentences)}"
        )
    for k, (gs, ps) in enumerate(zip(gold.sentences, pred.sentences)):
        if len(gs) != len(ps):
            raise AlignmentError(
                f"sentence {k + 1}: token count mismatch ({len(gs)} vs {len(ps)})"
            )
        yield from zip(gs.tokens, ps.tokens)


def attachment_scores(gold, pred):
    """(UAS, LAS) under gold segmentation."""
    total = heads_ok = both_ok = 0
    for gt, pt in _paired_tokens(gold, pred):
        total += 1
        if gt.head == pt.head:
            heads_ok += 1
            if gt.deprel == pt.deprel:
                both_ok += 1
    if total == 0:
        raise AlignmentError("no tokens to score")
    return heads_ok / total, both_ok / total


def tagging_scores(gold, pred):
    """(upos, xpos, feats, lemma) exact-match accuracies; feats compare as
    sets of attribute-value pairs."""
    total = 0
    ok = Counter()
    for gt, pt in _paired_tokens(gold, pred):
        total += 1
        ok["upos"] += gt.upos == pt.upos
        ok["xpos"] += gt.xpos == pt.xpos
        ok["feats"] += gt.feats == pt.feats
        ok["lemma"] += gt.lemma == pt.lemma
    if total == 0:
        raise AlignmentError("no tokens to score")
    return tuple(ok[k] / total for k in ("upos", "xpos", "feats", "lemma"))


def mlas_style(gold, pred):
    """Over gold content-relation tokens: head, deprel, UPOS, and feats all
    correct."""
    total = ok = 0
    for gt, pt in _paired_tokens(gold, pred):
        if not is_content_deprel(gt.deprel):
            continue
        total += 1
        ok += (
            gt.head == pt.head
            and gt.deprel == pt.deprel
            and gt.upos == pt.upos
            and gt.feats == pt.feats
        )
    return ok / total if total else 0.0


def blex_style(gold, pred):
    """Over gold content-relation tokens: head, deprel, and lemma correct."""
    total = ok = 0
    for gt, pt in _paired_tokens(gold, pred):
        if not is_content_deprel(gt.deprel):
            continue
        total += 1
        ok += gt.head == pt.head and gt.deprel == pt.deprel and gt.lemma == pt.lemma
    return ok / total if total else 0.0


@dataclass
class ScoreReport:
    uas: float
    las: float
    upos_acc: float
    xpos_acc: float
    feats_acc: float
    lemma_acc: float
    mlas_style: float
    blex_style: float
    cycle_rate: float
    n_tokens: int
    n_sentences: int

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    def to_text(self):
        rows = [
            ("UAS", self.uas), ("LAS", self.las),
            ("UPOS", self.upos_acc), ("XPOS", self.xpos_acc),
            ("Feats", self.feats_acc), ("Lemmas", self.lemma_acc),
            ("MLAS-style", self.mlas_style), ("BLEX-style", self.blex_style),
            ("Cycles", self.cycle_rate),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"{name:<{width}}  {100.0 * value:6.2f}" for name, value in rows]
        lines.append(f"{'Tokens':<{width}}  {self.n_tokens:6d}")
        lines.append(f"{'Sents':<{width}}  {self.n_sentences:6d}")
        return "\n".join(lines)


def score_report(gold, pred):
    uas, las = attachment_scores(gold, pred)
    upos, xpos, feats, lemma = tagging_scores(gold, pred)
    cyclic = sum(
        1 for s in pred.sentences
        if not all(t.head is not None for t in s.tokens)
        or not validate_tree(s).is_tree
    )
    return ScoreReport(
        uas=uas,
        las=las,
        upos_acc=upos,
        xpos_acc=xpos,
        feats_acc=feats,
        lemma_acc=lemma,
        mlas_style=mlas_style(gold, pred),
        blex_style=blex_style(gold, pred),
        cycle_rate=cyclic / len(pred.sentences) if pred.sentences else 0.0,
        n_tokens=gold.n_tokens(),
        n_sentences=len(gold.sentences),
    )


def baseline_prev_word(tb):
    """Attach every token to the previous one (token 1 to ROOT) and label
    everything with the treebank's most frequent deprel."""
    counts = Counter(t.deprel for s in tb.sentences for t in s.tokens if t.deprel)
    deprel = counts.most_common(1)[0][0] if counts else "dep"
    sentences = []
    for sent in tb.sentences:
        tokens = [
            Token(id=t.id, form=t.form, lemma=t.lemma, upos=t.upos, xpos=t.xpos,
                  feats=t.feats, head=t.id - 1, deprel=deprel, misc=t.misc)
            for t in sent.tokens
        ]
        sentences.append(Sentence(tokens, list(sent.comments), dict(sent.mwt_lines)))
    return Treebank(sentences)


def ablation_report(model_with, model_without, dev_tb):
    """Side-by-side UAS and greedy cycle rate for models trained with and
    without the cycle penalty, as an aligned text table."""
    from .parser import cycle_rate as greedy_cycle_rate

    rows = []
    for label, model in (("without", model_without), ("with", model_with)):
        pred = model.predict_treebank(dev_tb)
        uas, _ = attachment_scores(dev_tb, pred)
        cycles = greedy_cycle_rate(model, dev_tb)
        rows.append((label, uas, cycles))
    lines = [
        f"{'model':<8}  {'UAS':>7}  {'%cycles':>8}",
        f"{'-' * 8}  {'-' * 7}  {'-' * 8}",
    ]
    for label, uas, cycles in rows:
        lines.append(f"{label:<8}  {100 * uas:7.2f}  {100 * cycles:8.2f}")
    return "\n".join(lines)

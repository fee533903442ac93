"""Synthetic UD-style corpora for demos and desk-scale experiments.

A tiny deterministic grammar over a closed vocabulary: nouns inflect for
number (+s), verbs agree with their subject, lemmas strip the inflection.
Trees are verb-rooted, so the attach-to-previous-word baseline is weak on
this data.
"""

from __future__ import annotations

import numpy as np

from .conllu import Feats, Sentence, Token, Treebank

DETS = ["the", "a", "this", "every"]
ADJS = ["red", "big", "old", "small", "happy", "green"]
NOUNS = ["car", "dog", "bird", "house", "tree", "cat", "fish", "boat"]
VERBS = ["see", "like", "find", "paint", "draw", "move", "pull", "watch"]
ADVS = ["quickly", "slowly", "today", "twice"]
ADPS = ["in", "on", "near", "behind"]


def _det(rng):
    form = rng.choice(DETS)
    return dict(form=form, lemma=form, upos="DET", xpos="DT", feats=(), deprel="det")


def _adj(rng):
    form = rng.choice(ADJS)
    return dict(form=form, lemma=form, upos="ADJ", xpos="JJ",
                feats=(("Degree", "Pos"),), deprel="amod")


def _noun(rng, plural):
    lemma = rng.choice(NOUNS)
    form = lemma + "s" if plural else lemma
    return dict(form=form, lemma=lemma, upos="NOUN", xpos="NNS" if plural else "NN",
                feats=(("Number", "Plur" if plural else "Sing"),), deprel="")


def _verb(rng, plural_subject):
    lemma = rng.choice(VERBS)
    form = lemma if plural_subject else lemma + "s"
    return dict(form=form, lemma=lemma, upos="VERB", xpos="VBP" if plural_subject else "VBZ",
                feats=(("Number", "Plur" if plural_subject else "Sing"),), deprel="root")


def _adv(rng):
    form = rng.choice(ADVS)
    return dict(form=form, lemma=form, upos="ADV", xpos="RB", feats=(), deprel="advmod")


def _adp(rng):
    form = rng.choice(ADPS)
    return dict(form=form, lemma=form, upos="ADP", xpos="IN", feats=(), deprel="case")


def _noun_phrase(rng, deprel, with_adj):
    """Word dicts for [DET (ADJ) NOUN]; local head offsets resolved later."""
    words = [_det(rng)]
    if with_adj:
        words.append(_adj(rng))
    plural = bool(rng.integers(2))
    noun = _noun(rng, plural)
    noun["deprel"] = deprel
    words.append(noun)
    return words, plural


def _generate_sentence(rng):
    """One template instance: word dicts plus 1-based head indices."""
    template = int(rng.integers(6))
    words = []
    heads = []

    def add_np(deprel, with_adj):
        np_words, plural = _noun_phrase(rng, deprel, with_adj)
        start = len(words) + 1
        head_idx = start + len(np_words) - 1  # the noun
        for k, w in enumerate(np_words):
            words.append(w)
            heads.append(head_idx if start + k != head_idx else 0)  # 0 = fixup later
        return head_idx, plural

    subj_idx, subj_plural = add_np("nsubj", with_adj=template in (1, 4, 5))
    verb_idx = len(words) + 1
    words.append(_verb(rng, subj_plural))
    heads.append(0)
    heads[subj_idx - 1] = verb_idx

    if template in (0, 1, 5):
        obj_idx, _ = add_np("obj", with_adj=template == 5)
        heads[obj_idx - 1] = verb_idx
    elif template in (2, 4):
        words.append(_adv(rng))
        heads.append(verb_idx)
    else:  # oblique with adposition
        obj_idx, _ = add_np("obj", with_adj=False)
        heads[obj_idx - 1] = verb_idx
        adp_pos = len(words) + 1
        words.append(_adp(rng))
        heads.append(0)
        obl_idx, _ = add_np("obl", with_adj=False)
        heads[obl_idx - 1] = verb_idx
        heads[adp_pos - 1] = obl_idx
    return words, heads


def synthetic_treebank(n_sentences, seed=0, sent_id_offset=0):
    rng = np.random.default_rng(seed)
    sentences = []
    for k in range(n_sentences):
        words, heads = _generate_sentence(rng)
        tokens = [
            Token(id=i + 1, form=w["form"], lemma=w["lemma"], upos=w["upos"],
                  xpos=w["xpos"], feats=Feats(w["feats"]), head=heads[i],
                  deprel=w["deprel"])
            for i, w in enumerate(words)
        ]
        comments = [
            f"# sent_id = synth-{sent_id_offset + k + 1}",
            "# text = " + " ".join(t.form for t in tokens),
        ]
        sentences.append(Sentence(tokens, comments))
    return Treebank(sentences)


def synthetic_raw_text(n_sentences, seed=0):
    """Raw corpus lines drawn from the same grammar, annotations dropped."""
    rng = np.random.default_rng(seed)
    lines = []
    for _ in range(n_sentences):
        words, _ = _generate_sentence(rng)
        lines.append(" ".join(w["form"] for w in words))
    return "\n".join(lines) + "\n"


def overfit_fixture():
    """Eight fixed short sentences for overfitting tests."""
    return synthetic_treebank(8, seed=1234)

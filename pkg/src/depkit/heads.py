"""Prediction heads for UPOS, XPOS, morphological features, and lemmas."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import vocab as V
from .autodiff import Tensor
from .layers import Dense, DilatedConv1d, EmbeddingTable


class TaggerHead:
    """One hidden tanh layer and a softmax output over a tag set."""

    def __init__(self, d_in, hidden, n_tags, rng_pool, name, dropout=0.25):
        self.hidden = Dense(d_in, hidden, "tanh", rng_pool.derive(f"{name}.hidden"), dropout)
        self.out = Dense(hidden, n_tags, "softmax", rng_pool.derive(f"{name}.out"), dropout)

    def __call__(self, features, train=False, rng=None):
        return self.out(self.hidden(features, train, rng), train, rng)

    def named_params(self):
        return [(f"hidden.{n}", p) for n, p in self.hidden.named_params()] + [
            (f"out.{n}", p) for n, p in self.out.named_params()
        ]


class FeatsHead:
    """Independent classifier per morphological attribute, each over that
    attribute's values extended with the not-applicable label."""

    def __init__(self, d_in, hidden, schema, rng_pool, name, dropout=0.25):
        self.schema = schema
        self.classifiers = [
            TaggerHead(d_in, hidden, len(values), rng_pool, f"{name}.{attr}", dropout)
            for attr, values in schema.attributes
        ]

    def __call__(self, features, train=False, rng=None):
        return [clf(features, train, rng) for clf in self.classifiers]

    def decode(self, distributions):
        """Per-token argmax per attribute; NA predictions are dropped so the
        decoded set never contains the not-applicable label."""
        n = distributions[0].shape[0] if distributions else 0
        out = [[] for _ in range(n)]
        for (attr, values), dist in zip(self.schema.attributes, distributions):
            picks = dist.data.argmax(axis=1)
            for i, pick in enumerate(picks):
                if pick != 0:
                    out[i].append((attr, values[pick]))
        return out

    def named_params(self):
        out = []
        for (attr, _), clf in zip(self.schema.attributes, self.classifiers):
            out.extend((f"{attr}.{n}", p) for n, p in clf.named_params())
        return out


class LemmatizerHead:
    """Positional char-to-char lemmatizer.

    Each input char embedding is concatenated with the same reduced word
    feature vector, run through a dilated conv stack, and a kernel-1
    convolution predicts the output char at every position.
    """

    def __init__(self, d_in, cfg, n_chars, rng_pool, name="lemma"):
        self.reduce = Dense(d_in, cfg.lemma_reduce, "tanh",
                            rng_pool.derive(f"{name}.reduce"), cfg.dropout)
        self.char_table = EmbeddingTable(n_chars, cfg.lemma_char_emb,
                                         rng_pool.derive(f"{name}.chars"))
        self.convs = []
        prev = cfg.lemma_char_emb + cfg.lemma_reduce
        for i, (c_out, dil) in enumerate(zip(cfg.lemma_filters, cfg.lemma_dilations)):
            self.convs.append(DilatedConv1d(
                cfg.lemma_kernel, prev, c_out, dil, "relu",
                rng_pool.derive(f"{name}.conv{i}"),
            ))
            prev = c_out
        self.final = DilatedConv1d(1, prev, n_chars, 1, "linear",
                                   rng_pool.derive(f"{name}.final"))

    def __call__(self, char_ids, feature_row, train=False, rng=None):
        """Distributions over the char vocabulary, one row per padded
        position of one word.  feature_row is that word's (1, d) features."""
        embedded = ad.take_rows(self.char_table.table, char_ids)
        reduced = self.reduce(feature_row, train, rng)
        tiled = ad.broadcast_rows(reduced, len(char_ids))
        x = ad.concat([embedded, tiled], axis=1)
        for conv in self.convs:
            x = conv(x)
        return ad.softmax_rows(self.final(x))

    def named_params(self):
        out = [(f"reduce.{n}", p) for n, p in self.reduce.named_params()]
        out += [(f"chars.{n}", p) for n, p in self.char_table.named_params()]
        for i, conv in enumerate(self.convs):
            out.extend((f"conv{i}.{n}", p) for n, p in conv.named_params())
        out += [(f"final.{n}", p) for n, p in self.final.named_params()]
        return out


def decode_lemma(distributions, char_index):
    """Greedy positional decode: argmax per position, reading characters
    after the leading BOW until the first EOW or PAD."""
    picks = distributions.data.argmax(axis=1) if isinstance(distributions, Tensor) \
        else np.asarray(distributions).argmax(axis=1)
    chars = []
    for pos, pick in enumerate(picks):
        if pos == 0:
            continue  # leading BOW slot
        if pick in (V.EOW, V.PAD):
            break
        if pick in (V.BOW, V.UNK):
            continue
        chars.append(char_index[pick])
    return "".join(chars)


def tag_cross_entropy(distributions, targets):
    """Cross-entropy averaged per word."""
    n = distributions.shape[0]
    weights = np.full(n, 1.0 / n)
    return ad.cross_entropy_rows(distributions, targets, weights)


def lemma_cross_entropy(distributions, targets):
    """Cross-entropy averaged over non-PAD target positions of one word."""
    keep = targets != V.PAD
    count = int(keep.sum())
    weights = np.where(keep, 1.0 / max(count, 1), 0.0)
    return ad.cross_entropy_rows(distributions, targets, weights)


def heads_loss(task_distributions, enc):
    """Per-task scalar losses for one sentence.

    Tag and feats losses average per word; the lemma loss averages per
    non-PAD char position and then per word.  Tasks without gold targets
    are omitted from the result.
    """
    losses = {}
    if "upos" in task_distributions and enc.upos is not None:
        losses["upos"] = tag_cross_entropy(task_distributions["upos"], enc.upos)
    if "xpos" in task_distributions and enc.xpos is not None:
        losses["xpos"] = tag_cross_entropy(task_distributions["xpos"], enc.xpos)
    if "feats" in task_distributions and enc.feats is not None:
        per_attr = [
            tag_cross_entropy(dist, enc.feats[:, j])
            for j, dist in enumerate(task_distributions["feats"])
        ]
        if per_attr:
            total = per_attr[0]
            for term in per_attr[1:]:
                total = ad.add(total, term)
            losses["feats"] = total
    if "lemma" in task_distributions and enc.lemma_targets is not None:
        per_word = [
            lemma_cross_entropy(dist, tgt)
            for dist, tgt in zip(task_distributions["lemma"], enc.lemma_targets)
        ]
        total = per_word[0]
        for term in per_word[1:]:
            total = ad.add(total, term)
        losses["lemma"] = ad.scale(total, 1.0 / len(per_word))
    return losses

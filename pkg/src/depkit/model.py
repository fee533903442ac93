"""The joint tagger/lemmatizer/parser model: wiring, parameter registry,
loss assembly, and whole-sentence prediction."""

from __future__ import annotations

import copy
from collections import OrderedDict

import numpy as np

from . import autodiff as ad
from . import heads as H
from . import parser as P
from . import vocab as V
from .conllu import Feats, Sentence, Token, Treebank
from .encoder import Encoder


class JointModel:
    """All trainable state for one treebank.

    Heads are only instantiated for annotation layers present in the
    training data; missing layers yield empty predictions.
    """

    def __init__(self, cfg, lexicon, schema, embeddings, seed=None):
        self.cfg = cfg
        self.lexicon = lexicon
        self.schema = schema
        self.embeddings = embeddings
        self.seed = cfg.seed if seed is None else seed
        self.rng_pool = ad.RngPool(self.seed)
        self.noise_rng = self.rng_pool.derive("train.noise")

        self.encoder = Encoder(cfg, lexicon, embeddings, self.rng_pool)
        d_feat = 2 * cfg.hidden
        drop = cfg.dropout

        self.upos_head = None
        if len(lexicon.upos_index):
            self.upos_head = H.TaggerHead(
                d_feat, cfg.upos_hidden, len(lexicon.upos_index),
                self.rng_pool, "upos", drop,
            )
        self.xpos_head = None
        if lexicon.has_xpos and len(lexicon.xpos_index):
            self.xpos_head = H.TaggerHead(
                d_feat, cfg.xpos_hidden, len(lexicon.xpos_index),
                self.rng_pool, "xpos", drop,
            )
        self.feats_head = None
        if lexicon.has_feats and len(schema):
            self.feats_head = H.FeatsHead(
                d_feat, cfg.feats_hidden, schema, self.rng_pool, "feats", drop
            )
        self.lemma_head = None
        if lexicon.has_lemma:
            self.lemma_head = H.LemmatizerHead(
                d_feat, cfg, len(lexicon.char_index), self.rng_pool, "lemma"
            )
        self.arc_scorer = P.ArcScorer(d_feat, cfg.arc_dim, self.rng_pool, drop)
        self.labeler = None
        if len(lexicon.deprel_index):
            self.labeler = P.Labeler(
                d_feat, cfg.label_dim, len(lexicon.deprel_index), self.rng_pool, drop
            )

        self.params = OrderedDict()
        self._register("encoder", self.encoder)
        for name, part in (
            ("upos", self.upos_head), ("xpos", self.xpos_head),
            ("feats", self.feats_head), ("lemma", self.lemma_head),
            ("arc", self.arc_scorer), ("label", self.labeler),
        ):
            if part is not None:
                self._register(name, part)
        for name, tensor in self.params.items():
            tensor.name = name

    def _register(self, prefix, part):
        for name, tensor in part.named_params():
            self.params[f"{prefix}.{name}"] = tensor

    # -- parameter plumbing -------------------------------------------------

    def parameters(self):
        return list(self.params.values())

    def l2_terms(self):
        """Weight-decay rates: biLSTM and convolution weights at the network
        rate, trainable embedding tables and the ROOT vector at the
        embedding rate.  Dense layers and biases are not decayed."""
        terms = {}
        for name, p in self.params.items():
            if name.endswith(".kernel") or (
                ".bilstm." in name and name.rsplit(".", 1)[1] in ("W", "U")
            ):
                lam = self.cfg.l2_network
            elif name.endswith("chars.table") or name in ("encoder.word_table", "encoder.root"):
                lam = self.cfg.l2_embeddings
            else:
                lam = 0.0
            if lam:
                terms[id(p)] = lam
        return terms

    def zero_grads(self):
        for p in self.params.values():
            p.zero_grad()

    def snapshot(self):
        return {name: p.data.copy() for name, p in self.params.items()}

    def restore(self, snap):
        for name, p in self.params.items():
            np.copyto(p.data, snap[name])

    def active_tasks(self):
        tasks = []
        if self.upos_head is not None:
            tasks.append("upos")
        if self.xpos_head is not None:
            tasks.append("xpos")
        if self.feats_head is not None:
            tasks.append("feats")
        if self.lemma_head is not None:
            tasks.append("lemma")
        tasks.append("arc")
        if self.labeler is not None:
            tasks.append("label")
        return tasks

    # -- forward ------------------------------------------------------------

    def encode(self, sent, with_targets=True):
        return V.encode_sentence(
            sent, self.lexicon, self.schema, self.embeddings,
            self.cfg.lemma_slack, with_targets,
        )

    def features_for(self, enc, train=False):
        return self.encoder.encode(enc, train, self.noise_rng if train else None)

    def sentence_losses(self, enc, train=True):
        """Per-task scalar loss tensors for one encoded sentence, plus the
        arc loss split into (cross-entropy, cycle penalty) for reporting."""
        rng = self.noise_rng if train else None
        features = self.features_for(enc, train)
        token_rows = ad.take_rows(features, np.arange(1, enc.n + 1))

        dists = {}
        if self.upos_head is not None and enc.upos is not None:
            dists["upos"] = self.upos_head(token_rows, train, rng)
        if self.xpos_head is not None and enc.xpos is not None:
            dists["xpos"] = self.xpos_head(token_rows, train, rng)
        if self.feats_head is not None and enc.feats is not None:
            dists["feats"] = self.feats_head(token_rows, train, rng)
        if self.lemma_head is not None and enc.lemma_targets is not None:
            dists["lemma"] = [
                self.lemma_head(ids, ad.take_rows(features, [i + 1]), train, rng)
                for i, ids in enumerate(enc.lemma_inputs)
            ]
        losses = H.heads_loss(dists, enc)

        parts = {}
        if enc.heads is not None:
            adjacency = self.arc_scorer(features, train, rng)
            total, ce, penalty = P.arc_loss(
                adjacency, enc.heads, self.cfg.K, self.cfg.cycle_loss
            )
            losses["arc"] = total
            parts["arc_ce"] = ce
            parts["arc_penalty"] = penalty
            if self.labeler is not None and enc.deprels is not None:
                label_dists = self.labeler(adjacency=adjacency, features=features,
                                           train=train, rng=rng)
                losses["label"] = P.label_loss(label_dists, enc.deprels)
        return losses, parts

    # -- prediction -----------------------------------------------------------

    def adjacency_for(self, sent):
        enc = self.encode(sent, with_targets=False)
        features = self.features_for(enc, train=False)
        return self.arc_scorer(features).data

    def predict_sentence(self, sent):
        """Fully annotate one sentence: tags, feats, lemmas, heads, deprels.
        The returned tree always passes validation with a single root."""
        enc = self.encode(sent, with_targets=False)
        features = self.features_for(enc, train=False)
        token_rows = ad.take_rows(features, np.arange(1, enc.n + 1))

        adjacency = self.arc_scorer(features)
        pred_heads = P.decode_heads(adjacency)

        deprels = [""] * enc.n
        if self.labeler is not None:
            dists = self.labeler(features, adjacency)
            picks = dists.data.argmax(axis=1)
            deprels = [self.lexicon.deprel_index[i] for i in picks]

        upos = [""] * enc.n
        if self.upos_head is not None:
            picks = self.upos_head(token_rows).data.argmax(axis=1)
            upos = [self.lexicon.upos_index[i] for i in picks]
        xpos = [""] * enc.n
        if self.xpos_head is not None:
            picks = self.xpos_head(token_rows).data.argmax(axis=1)
            xpos = [self.lexicon.xpos_index[i] for i in picks]

        feats = [Feats() for _ in range(enc.n)]
        if self.feats_head is not None:
            decoded = self.feats_head.decode(self.feats_head(token_rows))
            feats = [Feats(pairs) for pairs in decoded]

        lemmas = [""] * enc.n
        if self.lemma_head is not None:
            for i, ids in enumerate(enc.lemma_inputs):
                dist = self.lemma_head(ids, ad.take_rows(features, [i + 1]))
                lemmas[i] = H.decode_lemma(dist, self.lexicon.char_index)

        tokens = [
            Token(
                id=i + 1,
                form=tok.form,
                lemma=lemmas[i],
                upos=upos[i],
                xpos=xpos[i],
                feats=feats[i],
                head=int(pred_heads[i]),
                deprel=deprels[i],
                misc=tok.misc,
            )
            for i, tok in enumerate(sent.tokens)
        ]
        return Sentence(tokens, list(sent.comments), dict(sent.mwt_lines))

    def predict_treebank(self, tb):
        return Treebank([self.predict_sentence(s) for s in tb.sentences])

    def clone_architecture(self, seed):
        """A freshly initialized model with the same configuration and
        vocabulary (used by self-training)."""
        return JointModel(self.cfg, self.lexicon, self.schema, self.embeddings, seed)

    def copy(self):
        dup = JointModel(self.cfg, self.lexicon, self.schema, self.embeddings, self.seed)
        dup.restore(self.snapshot())
        return dup

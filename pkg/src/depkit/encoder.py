"""Per-word feature extraction: transformed word embedding, character CNN
embedding, concatenation with a synthetic ROOT position, sentence biLSTM."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .layers import BiLSTMStack, ConvStack, Dense, EmbeddingTable, RegularizationConfig


class Encoder:
    """Maps an EncodedSentence to a (n+1, 2*hidden) feature matrix.

    Row 0 is the ROOT position.  By default ROOT enters as a trainable
    vector before the biLSTM so its feature row is context-aware; setting
    root_at_features appends a trainable feature row after the biLSTM
    instead.
    """

    def __init__(self, cfg, lexicon, embeddings, rng_pool):
        self.cfg = cfg
        self.embeddings = embeddings
        reg = RegularizationConfig(
            cfg.gaussian_dropout_rate, cfg.gaussian_noise_std,
            cfg.dropout, cfg.recurrent_dropout, cfg.l2_network, cfg.l2_embeddings,
        )
        self.reg = reg

        self.word_table = None
        if embeddings.trainable:
            self.word_table = Tensor(embeddings.vectors, requires_grad=True)
        self.word_dense = Dense(
            embeddings.dim, cfg.d_word, "tanh",
            rng_pool.derive("encoder.word_dense"), cfg.dropout,
        )
        self.char_table = EmbeddingTable(
            len(lexicon.char_index), cfg.d_char_emb, rng_pool.derive("encoder.chars")
        )
        self.char_stack = ConvStack(
            cfg.d_char_emb, cfg.char_filters, cfg.char_dilations, cfg.char_kernel,
            rng_pool, "encoder.char_stack",
        )
        root_dim = cfg.d_concat if not cfg.root_at_features else 2 * cfg.hidden
        root_rng = rng_pool.derive("encoder.root")
        self.root_vec = Tensor(
            root_rng.normal(0.0, 1.0 / root_dim ** 0.5, size=(1, root_dim))
            .astype(np.float32),
            requires_grad=True,
        )
        self.bilstm = BiLSTMStack(
            cfg.d_concat, cfg.hidden, cfg.bilstm_layers, rng_pool, "encoder.bilstm", reg
        )

    # -- word level -------------------------------------------------------

    def embed_word_level(self, enc, train=False, rng=None):
        """Fixed external rows (or trainable table rows) through the shared
        tanh transform.  External rows never receive gradient."""
        if self.word_table is not None:
            rows = ad.take_rows(self.word_table, enc.word_ids)
        else:
            rows = Tensor(enc.word_rows)
        return self.word_dense(rows, train, rng)

    # -- character level ----------------------------------------------------

    def embed_char_level(self, char_ids):
        """Char embeddings through the dilated stack, max-pooled over
        positions; returns a (1, d_char_out) row."""
        embedded = ad.take_rows(self.char_table.table, char_ids)
        convolved = self.char_stack(embedded)
        pooled = ad.global_max_pool(convolved)
        return ad.reshape(pooled, (1, self.cfg.d_char_out))

    # -- sentence level -----------------------------------------------------

    def encode(self, enc, train=False, rng=None):
        if enc.n == 0:
            raise ValueError("cannot encode an empty sentence")
        word_feats = self.embed_word_level(enc, train, rng)
        char_rows = [self.embed_char_level(ids) for ids in enc.char_ids]
        char_feats = ad.concat(char_rows, axis=0) if len(char_rows) > 1 else char_rows[0]
        concat = ad.concat([word_feats, char_feats], axis=1)
        concat = ad.gaussian_dropout(concat, self.reg.gaussian_dropout_rate, train, rng)
        concat = ad.gaussian_noise(concat, self.reg.gaussian_noise_std, train, rng)
        if self.cfg.root_at_features:
            features = self.bilstm(concat, train, rng)
            return ad.concat([self.root_vec, features], axis=0)
        with_root = ad.concat([self.root_vec, concat], axis=0)
        return self.bilstm(with_root, train, rng)

    def named_params(self):
        out = [("root", self.root_vec)]
        if self.word_table is not None:
            out.append(("word_table", self.word_table))
        out.extend((f"word_dense.{n}", p) for n, p in self.word_dense.named_params())
        out.extend((f"chars.{n}", p) for n, p in self.char_table.named_params())
        out.extend((f"char_stack.{n}", p) for n, p in self.char_stack.named_params())
        out.extend((f"bilstm.{n}", p) for n, p in self.bilstm.named_params())
        return out

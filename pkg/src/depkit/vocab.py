"""Index spaces for words, characters, tags, labels, and morphological
attributes, plus external embedding loading and sentence numericalization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

PAD, UNK, BOW, EOW = 0, 1, 2, 3
RESERVED_CHARS = ("<pad>", "<unk>", "<bow>", "<eow>")
MISS = -1  # eval-time index for items never seen in training


class Indexer:
    """Insertion-ordered bidirectional string/int map."""

    def __init__(self, items=()):
        self._items = []
        self._index = {}
        for item in items:
            self.add(item)

    def add(self, item):
        if item not in self._index:
            self._index[item] = len(self._items)
            self._items.append(item)
        return self._index[item]

    def get(self, item, default=MISS):
        return self._index.get(item, default)

    def __getitem__(self, idx):
        return self._items[idx]

    def __len__(self):
        return len(self._items)

    def __contains__(self, item):
        return item in self._index

    def items(self):
        return list(self._items)


@dataclass
class Lexicon:
    upos_index: Indexer
    xpos_index: Indexer
    deprel_index: Indexer
    char_index: Indexer
    has_xpos: bool = True
    has_feats: bool = True
    has_lemma: bool = True

    def to_dict(self):
        return {
            "upos": self.upos_index.items(),
            "xpos": self.xpos_index.items(),
            "deprel": self.deprel_index.items(),
            "char": self.char_index.items(),
            "has_xpos": self.has_xpos,
            "has_feats": self.has_feats,
            "has_lemma": self.has_lemma,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            Indexer(d["upos"]), Indexer(d["xpos"]), Indexer(d["deprel"]),
            Indexer(d["char"]), d["has_xpos"], d["has_feats"], d["has_lemma"],
        )


NA = "<na>"  # "not applicable": the attribute is absent from the word's feats


@dataclass
class FeatureSchema:
    """Ordered morphological attributes, each with NA at value index 0."""

    attributes: list = field(default_factory=list)  # [(name, [NA, v1, ...])]

    def attr_names(self):
        return [name for name, _ in self.attributes]

    def values_for(self, name):
        for attr, values in self.attributes:
            if attr == name:
                return values
        raise KeyError(name)

    def __len__(self):
        return len(self.attributes)

    def to_dict(self):
        return {"attributes": [[n, list(v)] for n, v in self.attributes]}

    @classmethod
    def from_dict(cls, d):
        return cls([(n, list(v)) for n, v in d["attributes"]])


def build_lexicon(tb):
    """Collect every character, tag, deprel, and feats attribute/value in
    first-occurrence order.  Lemma characters are included so the
    lemmatizer's output vocabulary covers its training targets."""
    if not tb.sentences:
        raise ValueError("cannot build a lexicon from an empty treebank")
    upos, xpos, deprel = Indexer(), Indexer(), Indexer()
    chars = Indexer(RESERVED_CHARS)
    attr_values: dict[str, Indexer] = {}
    attr_order = Indexer()
    any_xpos = any_feats = any_lemma = False
    for sent in tb.sentences:
        for tok in sent.tokens:
            for ch in tok.form:
                chars.add(ch)
            for ch in tok.lemma:
                chars.add(ch)
            if tok.lemma:
                any_lemma = True
            if tok.upos:
                upos.add(tok.upos)
            if tok.xpos:
                xpos.add(tok.xpos)
                any_xpos = True
            if tok.deprel:
                deprel.add(tok.deprel)
            for attr, value in tok.feats.pairs:
                any_feats = True
                attr_order.add(attr)
                attr_values.setdefault(attr, Indexer([NA])).add(value)
    schema = FeatureSchema(
        [(name, attr_values[name].items()) for name in attr_order.items()]
    )
    lexicon = Lexicon(upos, xpos, deprel, chars, any_xpos, any_feats, any_lemma)
    return lexicon, schema


class EmbeddingMatrix:
    """Word to row-vector map.  When built from an external file the rows
    and the unknown vector stay fixed for the whole training run."""

    def __init__(self, vocab, vectors, unknown_vector, trainable=False):
        self.vocab = dict(vocab)  # word -> row
        self.vectors = np.asarray(vectors, dtype=np.float32)
        self.unknown_vector = np.asarray(unknown_vector, dtype=np.float32)
        self.trainable = trainable

    @property
    def dim(self):
        return self.vectors.shape[1]

    def row_index(self, word):
        """Exact match first, then lowercase, then the unknown row (-1)."""
        idx = self.vocab.get(word)
        if idx is None:
            idx = self.vocab.get(word.lower())
        return -1 if idx is None else idx

    def lookup(self, word):
        idx = self.row_index(word)
        return self.unknown_vector if idx < 0 else self.vectors[idx]


def unknown_vector_init(rows, seed):
    """Draw the unknown-word vector from per-coordinate Normal(mean, var)
    statistics of the given embedding rows."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError("unknown_vector_init needs at least one row")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    rng = np.random.Generator(np.random.PCG64(seed))
    return (mean + std * rng.standard_normal(rows.shape[1])).astype(np.float32)


def load_embeddings(path, seed=0):
    """Read a text embedding file: optional `count dim` header, then one
    `word v1 ... v_d` per line.  Duplicate words keep the last occurrence."""
    vocab: dict[str, int] = {}
    vectors: list[np.ndarray] = []
    dim = None
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            parts = line.rstrip("\n").split(" ")
            if line_no == 1 and len(parts) == 2:
                continue  # header
            if len(parts) < 2:
                continue
            word, values = parts[0], parts[1:]
            vec = np.array([float(v) for v in values], dtype=np.float32)
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise ValueError(
                    f"line {line_no}: vector of length {vec.shape[0]}, expected {dim}"
                )
            if word in vocab:
                warnings.warn(f"duplicate embedding entry {word!r}, keeping the last")
                vectors[vocab[word]] = vec
            else:
                vocab[word] = len(vectors)
                vectors.append(vec)
    if not vectors:
        raise ValueError(f"no embedding vectors found in {path}")
    matrix = np.stack(vectors)
    unknown = unknown_vector_init(matrix, seed)
    return EmbeddingMatrix(vocab, matrix, unknown, trainable=False)


def build_trainable_embeddings(tb, dim, rng):
    """Fallback when no external file is given: a trainable table over the
    training vocabulary, with a trainable unknown row at index 0."""
    vocab: dict[str, int] = {}
    for sent in tb.sentences:
        for tok in sent.tokens:
            if tok.form not in vocab:
                vocab[tok.form] = len(vocab) + 1  # row 0 is the unknown word
    scale = 1.0 / dim ** 0.5
    vectors = rng.normal(0.0, scale, size=(len(vocab) + 1, dim)).astype(np.float32)
    return EmbeddingMatrix(vocab, vectors, vectors[0], trainable=True)


@dataclass
class EncodedSentence:
    """Numericalized view of one sentence.

    Annotation targets are None for unannotated (raw) sentences or for
    tasks the treebank does not carry.
    """

    sentence: object
    n: int
    word_rows: np.ndarray | None      # (n, d) fixed external rows
    word_ids: np.ndarray | None       # (n,) rows into a trainable table
    char_ids: list                    # per word: [BOW, c1..cm, EOW]
    upos: np.ndarray | None = None
    xpos: np.ndarray | None = None
    deprels: np.ndarray | None = None
    heads: np.ndarray | None = None
    feats: np.ndarray | None = None   # (n, n_attributes) value indices
    lemma_inputs: list | None = None  # per word: padded form chars
    lemma_targets: list | None = None  # per word: padded lemma chars


def _char_seq(lex, text):
    return np.array(
        [BOW] + [lex.char_index.get(c, UNK) for c in text] + [EOW], dtype=np.intp
    )


def lemma_padded_length(form_len, slack):
    return form_len + 2 + slack


def encode_lemma_pair(lex, form, lemma, slack):
    """Padded input/target char sequences for the positional lemmatizer.

    Both are right-padded with PAD to len(form)+2+slack; a lemma that does
    not fit is an error asking for a larger slack.
    """
    length = lemma_padded_length(len(form), slack)
    inp = np.full(length, PAD, dtype=np.intp)
    seq = _char_seq(lex, form)
    inp[: len(seq)] = seq
    tgt = None
    if lemma is not None:
        tseq = _char_seq(lex, lemma)
        if len(tseq) > length:
            raise ValueError(
                f"lemma {lemma!r} needs {len(tseq)} positions but the padded "
                f"form {form!r} offers {length}; increase lemma_slack"
            )
        tgt = np.full(length, PAD, dtype=np.intp)
        tgt[: len(tseq)] = tseq
    return inp, tgt


def encode_sentence(sent, lexicon, schema, embeddings, slack=5, with_targets=True):
    """Numericalize one sentence against a built lexicon."""
    n = len(sent.tokens)
    forms = [t.form for t in sent.tokens]
    char_ids = [_char_seq(lexicon, f) for f in forms]
    word_rows = word_ids = None
    if embeddings.trainable:
        word_ids = np.array(
            [max(embeddings.row_index(f), 0) for f in forms], dtype=np.intp
        )
    else:
        word_rows = np.stack([embeddings.lookup(f) for f in forms])

    enc = EncodedSentence(sent, n, word_rows, word_ids, char_ids)
    if not with_targets:
        enc.lemma_inputs = [
            encode_lemma_pair(lexicon, f, None, slack)[0] for f in forms
        ]
        return enc

    if all(t.upos for t in sent.tokens):
        enc.upos = np.array([lexicon.upos_index.get(t.upos) for t in sent.tokens])
    if lexicon.has_xpos and all(t.xpos for t in sent.tokens):
        enc.xpos = np.array([lexicon.xpos_index.get(t.xpos) for t in sent.tokens])
    if all(t.deprel for t in sent.tokens):
        enc.deprels = np.array(
            [lexicon.deprel_index.get(t.deprel) for t in sent.tokens]
        )
    if all(t.head is not None for t in sent.tokens):
        enc.heads = np.array([t.head for t in sent.tokens], dtype=np.intp)
    if lexicon.has_feats:
        feats = np.zeros((n, len(schema)), dtype=np.intp)
        for i, tok in enumerate(sent.tokens):
            lookup = dict(tok.feats.pairs)
            for j, (attr, values) in enumerate(schema.attributes):
                value = lookup.get(attr)
                # absent and never-seen values both fall back to NA (index 0)
                feats[i, j] = values.index(value) if value in values else 0
        enc.feats = feats
    if lexicon.has_lemma and all(t.lemma for t in sent.tokens):
        enc.lemma_inputs, enc.lemma_targets = [], []
        for tok in sent.tokens:
            inp, tgt = encode_lemma_pair(lexicon, tok.form, tok.lemma, slack)
            enc.lemma_inputs.append(inp)
            enc.lemma_targets.append(tgt)
    else:
        enc.lemma_inputs = [
            encode_lemma_pair(lexicon, f, None, slack)[0] for f in forms
        ]
    return enc

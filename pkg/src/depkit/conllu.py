"""CoNLL-U treebank reading, validation, and writing.

Handles UD v2 files restricted to syntactic words: multiword-token ranges and
comment lines are preserved verbatim but never annotated, and empty nodes
(decimal ids) are rejected.  The only normalization applied on output is the
case-insensitive sorting of morphological feature attributes.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ConlluError(ValueError):
    """Malformed CoNLL-U input; carries the 1-based offending line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class Feats:
    """Morphological features as ordered attribute=value pairs.

    Attributes are unique within a set.  Two Feats compare equal when they
    contain the same pairs regardless of order; serialization sorts
    attributes case-insensitively and renders the empty set as "_".
    """

    __slots__ = ("pairs",)

    def __init__(self, pairs=()):
        out = []
        seen = set()
        for attr, value in pairs:
            if attr in seen:
                raise ValueError(f"duplicate feats attribute {attr!r}")
            seen.add(attr)
            out.append((attr, value))
        self.pairs = tuple(out)

    @classmethod
    def parse(cls, text, line_no=None):
        if text == "_" or text == "":
            return cls()
        pairs = []
        for chunk in text.split("|"):
            attr, sep, value = chunk.partition("=")
            if not sep or not attr or not value:
                raise ConlluError(f"bad feats item {chunk!r}", line_no)
            pairs.append((attr, value))
        try:
            return cls(pairs)
        except ValueError as exc:
            raise ConlluError(str(exc), line_no) from None

    def __str__(self):
        if not self.pairs:
            return "_"
        ordered = sorted(self.pairs, key=lambda kv: (kv[0].lower(), kv[0], kv[1]))
        return "|".join(f"{a}={v}" for a, v in ordered)

    def __bool__(self):
        return bool(self.pairs)

    def __eq__(self, other):
        if not isinstance(other, Feats):
            return NotImplemented
        return frozenset(self.pairs) == frozenset(other.pairs)

    def __hash__(self):
        return hash(frozenset(self.pairs))

    def __repr__(self):
        return f"Feats({str(self)!r})"


@dataclass
class Token:
    """One syntactic word.  Empty annotation fields round-trip as "_"."""

    id: int
    form: str
    lemma: str = ""
    upos: str = ""
    xpos: str = ""
    feats: Feats = field(default_factory=Feats)
    head: int | None = None
    deprel: str = ""
    deps: str = "_"   # enhanced dependencies, kept verbatim, not modeled
    misc: str = "_"   # kept verbatim


@dataclass
class Sentence:
    tokens: list[Token]
    comments: list[str] = field(default_factory=list)
    mwt_lines: dict[int, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.tokens)

    def forms(self):
        return [t.form for t in self.tokens]

    def heads(self):
        return [t.head for t in self.tokens]


@dataclass
class Treebank:
    sentences: list[Sentence] = field(default_factory=list)

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def n_tokens(self):
        return sum(len(s) for s in self.sentences)


def _opt(col):
    return "" if col == "_" else col


def _unopt(value):
    return value if value else "_"


def parse_conllu(text):
    """Parse a CoNLL-U document into a Treebank.

    Raises ConlluError (with a line number) on malformed token lines,
    non-contiguous ids, out-of-range heads, or empty nodes.
    """
    sentences = []
    comments: list[str] = []
    tokens: list[Token] = []
    mwt: dict[int, str] = {}
    start_line = None

    def flush(line_no):
        nonlocal comments, tokens, mwt, start_line
        if not tokens and not comments and not mwt:
            return
        if not tokens:
            raise ConlluError("sentence block without token lines", line_no)
        for tok in tokens:
            if tok.head is not None and tok.head > len(tokens):
                raise ConlluError(
                    f"head {tok.head} out of range for {len(tokens)} tokens",
                    start_line,
                )
        sentences.append(Sentence(tokens, comments, mwt))
        comments, tokens, mwt = [], [], {}
        start_line = None

    for line_no, line in enumerate(text.split("\n"), start=1):
        if line == "":
            flush(line_no)
            continue
        if start_line is None:
            start_line = line_no
        if line.startswith("#"):
            if tokens:
                raise ConlluError("comment after token lines", line_no)
            comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"expected 10 columns, got {len(cols)}", line_no)
        tid = cols[0]
        if "." in tid:
            raise ConlluError(f"empty nodes are not supported: id {tid!r}", line_no)
        if "-" in tid:
            lo, _, hi = tid.partition("-")
            if not (lo.isdigit() and hi.isdigit()):
                raise ConlluError(f"bad multiword range {tid!r}", line_no)
            mwt[int(lo)] = line
            continue
        if not tid.isdigit():
            raise ConlluError(f"bad token id {tid!r}", line_no)
        tid = int(tid)
        if tid != len(tokens) + 1:
            raise ConlluError(
                f"non-contiguous token id {tid} (expected {len(tokens) + 1})", line_no
            )
        head_col = cols[6]
        if head_col == "_":
            head = None
        elif head_col.isdigit():
            head = int(head_col)
        else:
            raise ConlluError(f"bad head {head_col!r}", line_no)
        if head is not None and head == tid:
            raise ConlluError(f"token {tid} is its own head", line_no)
        tokens.append(
            Token(
                id=tid,
                form=cols[1],
                lemma=_opt(cols[2]),
                upos=_opt(cols[3]),
                xpos=_opt(cols[4]),
                feats=Feats.parse(cols[5], line_no),
                head=head,
                deprel=_opt(cols[7]),
                deps=cols[8],
                misc=cols[9],
            )
        )
    flush(len(text.split("\n")))
    return Treebank(sentences)


def write_conllu(tb):
    """Serialize a Treebank back to CoNLL-U text.

    Inverse of parse_conllu up to the documented feats re-sorting; every
    sentence block is terminated by a blank line.
    """
    blocks = []
    for sent in tb.sentences:
        lines = list(sent.comments)
        for tok in sent.tokens:
            if tok.id in sent.mwt_lines:
                lines.append(sent.mwt_lines[tok.id])
            lines.append(
                "\t".join(
                    (
                        str(tok.id),
                        _unopt(tok.form),
                        _unopt(tok.lemma),
                        _unopt(tok.upos),
                        _unopt(tok.xpos),
                        str(tok.feats),
                        "_" if tok.head is None else str(tok.head),
                        _unopt(tok.deprel),
                        tok.deps,
                        tok.misc,
                    )
                )
            )
        blocks.append("\n".join(lines) + "\n")
    # every sentence block, including the last, is terminated by a blank line
    return "\n".join(blocks + [""]) if blocks else ""


@dataclass
class TreeReport:
    is_tree: bool
    single_root: bool
    root_count: int
    cycle: frozenset | None = None

    @property
    def ok(self):
        return self.is_tree and self.single_root


def validate_tree(sentence):
    """Check that the head function forms a tree rooted at node 0.

    Returns a TreeReport stating whether every token reaches ROOT without
    cycles and whether exactly one token attaches directly to ROOT.
    Raises ValueError when any head is unset.
    """
    heads = sentence.heads() if isinstance(sentence, Sentence) else list(sentence)
    n = len(heads)
    if any(h is None for h in heads):
        raise ValueError("validate_tree requires all heads to be set")
    root_count = sum(1 for h in heads if h == 0)

    # color: 0 unvisited, 1 on current walk, 2 proven to reach ROOT
    color = [0] * (n + 1)
    color[0] = 2
    cycle = None
    for start in range(1, n + 1):
        path = []
        node = start
        while color[node] == 0:
            color[node] = 1
            path.append(node)
            node = heads[node - 1]
        if color[node] == 1 and cycle is None:
            cycle = frozenset(path[path.index(node):])
        mark = 2 if color[node] == 2 else color[node]
        for visited in path:
            color[visited] = mark
    is_tree = cycle is None
    return TreeReport(is_tree, root_count == 1, root_count, cycle)


def load_raw_corpus(text):
    """Build a Treebank of unannotated sentences from raw pre-tokenized text.

    One sentence per line, tokens separated by any whitespace run.  Blank
    lines are skipped; a document with no sentences is an error.
    """
    sentences = []
    for line in text.split("\n"):
        forms = line.split()
        if not forms:
            continue
        tokens = [Token(id=i, form=form) for i, form in enumerate(forms, start=1)]
        sentences.append(Sentence(tokens))
    if not sentences:
        raise ValueError("raw corpus contains no sentences")
    return Treebank(sentences)


def read_conllu_file(path):
    with open(path, encoding="utf-8") as handle:
        return parse_conllu(handle.read())


def write_conllu_file(tb, path):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(write_conllu(tb))

"""Arc scoring, cycle-penalty arc loss, greedy and Chu-Liu-Edmonds decoding,
and arc labeling with soft head vectors.

The adjacency matrix A is (n+1) x (n+1) and row-stochastic: row i is the
head distribution of dependent i, column j is candidate head j, index 0 is
ROOT.  The diagonal is not masked; the k=1 trace term of the cycle penalty
is what discourages self-loops.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .layers import Dense

NEG_INF = -np.inf
_LOG_FLOOR = 1e-38


class ArcScorer:
    """Head/dependent tanh projections scored by dot products."""

    def __init__(self, d_in, arc_dim, rng_pool, dropout=0.25):
        self.head_dense = Dense(d_in, arc_dim, "tanh",
                                rng_pool.derive("parser.arc.head"), dropout)
        self.dep_dense = Dense(d_in, arc_dim, "tanh",
                               rng_pool.derive("parser.arc.dep"), dropout)

    def __call__(self, features, train=False, rng=None):
        """Row-softmaxed (n+1) x (n+1) adjacency matrix.  ROOT's own row is
        computed but callers exclude it from losses and decoding."""
        heads = self.head_dense(features, train, rng)
        deps = self.dep_dense(features, train, rng)
        scores = ad.matmul(deps, ad.transpose(heads))
        return ad.softmax_rows(scores)

    def named_params(self):
        return [(f"head.{n}", p) for n, p in self.head_dense.named_params()] + [
            (f"dep.{n}", p) for n, p in self.dep_dense.named_params()
        ]


def cycle_penalty(adjacency, k_max):
    """Trace-of-powers penalty with the ROOT row zeroed, so ROOT cannot
    take part in a closed walk."""
    n1 = adjacency.shape[0]
    mask = np.ones((n1, 1), dtype=adjacency.dtype)
    mask[0, 0] = 0.0
    no_root = ad.mul(adjacency, Tensor(mask))
    return ad.trace_powers(no_root, k_max)


def arc_loss(adjacency, gold_heads, k_max, with_cycle_loss=True):
    """Mean cross-entropy of the dependent rows against their gold heads,
    plus the cycle penalty.  Returns (total, cross_entropy, penalty)."""
    n = len(gold_heads)
    rows = ad.take_rows(adjacency, np.arange(1, n + 1))
    ce = ad.cross_entropy_rows(rows, gold_heads, np.full(n, 1.0 / n))
    penalty = cycle_penalty(adjacency, k_max)
    total = ad.add(ce, penalty) if with_cycle_loss else ce
    return total, ce, penalty


def _find_cycle(heads):
    """First cycle in a head function over nodes 1..n (0 has no head).
    Self-loops count.  Returns a list of nodes or None."""
    n = len(heads) - 1
    color = [0] * (n + 1)
    color[0] = 2
    for start in range(1, n + 1):
        path = []
        node = start
        while color[node] == 0:
            color[node] = 1
            path.append(node)
            node = heads[node]
        if color[node] == 1:
            return path[path.index(node):]
        for visited in path:
            color[visited] = 2
    return None


def greedy_decode(adjacency):
    """Per-row argmax heads (ties to the lower index) and a flag that is
    true iff the resulting head function contains any cycle."""
    a = adjacency.data if isinstance(adjacency, Tensor) else np.asarray(adjacency)
    n = a.shape[0] - 1
    heads = np.zeros(n + 1, dtype=np.intp)
    heads[1:] = a[1:].argmax(axis=1)
    cyclic = _find_cycle(list(heads)) is not None
    return heads[1:].copy(), cyclic


def _cle(scores):
    """Maximum spanning arborescence rooted at node 0 of a complete score
    matrix scores[dependent, head].  Returns head[i] for every node, with
    head[0] = 0 as a sentinel.  Classic recursive cycle contraction."""
    m = scores.shape[0]
    heads = np.zeros(m, dtype=np.intp)
    if m == 1:
        return heads
    heads[1:] = scores[1:].argmax(axis=1)
    cycle = _find_cycle(list(heads))
    if cycle is None:
        return heads

    in_cycle = np.zeros(m, dtype=bool)
    in_cycle[cycle] = True
    outside = [i for i in range(m) if not in_cycle[i]]

    # reduced problem: outside nodes keep their indices (remapped), the
    # whole cycle becomes one supernode at the end
    node_of = {node: idx for idx, node in enumerate(outside)}
    c_idx = len(outside)
    size = c_idx + 1
    red = np.full((size, size), NEG_INF)
    enter_choice = {}  # outside head (original id) -> cycle node it attaches
    leave_choice = {}  # outside dependent (original id) -> cycle head used
    for i in outside:
        for j in outside:
            if i != j:
                red[node_of[i], node_of[j]] = scores[i, j]
    for h in outside:
        gains = [scores[i, h] - scores[i, heads[i]] for i in cycle]
        best = int(np.argmax(gains))
        red[c_idx, node_of[h]] = gains[best]
        enter_choice[h] = cycle[best]
    for d in outside:
        if d == 0:
            continue
        inner = [scores[d, h] for h in cycle]
        best = int(np.argmax(inner))
        red[node_of[d], c_idx] = inner[best]
        leave_choice[d] = cycle[best]

    sub = _cle(red)
    result = np.zeros(m, dtype=np.intp)
    # arcs among outside nodes, and arcs out of the cycle
    for d in outside:
        if d == 0:
            continue
        sub_head = sub[node_of[d]]
        result[d] = leave_choice[d] if sub_head == c_idx else outside[sub_head]
    # the cycle keeps its internal arcs except where the entering arc breaks it
    entering_head = outside[sub[c_idx]]
    broken = enter_choice[entering_head]
    for i in cycle:
        result[i] = entering_head if i == broken else heads[i]
    return result


def _tree_weight(scores, heads):
    return float(sum(scores[i, heads[i]] for i in range(1, len(heads))))


def chu_liu_edmonds(weights):
    """Maximum-weight spanning arborescence rooted at 0 with exactly one
    ROOT child.

    weights[dependent, head] should be finite on permitted arcs; the
    diagonal and ROOT's own row are forced to -inf here.  When the
    unconstrained optimum attaches several nodes to ROOT, every candidate
    root child is tried with the other root arcs disabled and the best
    single-root tree wins.
    """
    scores = np.array(weights, dtype=np.float64)
    m = scores.shape[0]
    np.fill_diagonal(scores, NEG_INF)
    scores[0, :] = NEG_INF
    heads = _cle(scores)
    roots = [i for i in range(1, m) if heads[i] == 0]
    if len(roots) <= 1:
        return heads[1:].copy()
    best_heads, best_weight = None, NEG_INF
    for r in range(1, m):
        if scores[r, 0] == NEG_INF:
            continue
        restricted = scores.copy()
        restricted[1:, 0] = NEG_INF
        restricted[r, 0] = scores[r, 0]
        candidate = _cle(restricted)
        weight = _tree_weight(restricted, candidate)
        if weight > best_weight:
            best_weight, best_heads = weight, candidate
    return best_heads[1:].copy()


def decode_heads(adjacency):
    """CLE decode over log probabilities, maximizing tree log-likelihood."""
    a = adjacency.data if isinstance(adjacency, Tensor) else np.asarray(adjacency)
    return chu_liu_edmonds(np.log(np.maximum(a, _LOG_FLOOR)))


class Labeler:
    """Dependency label prediction from the dependent's projection
    concatenated with the probability-weighted average of head projections.

    The soft average keeps the labeler differentiable end to end; it is
    used unchanged at inference, where the label attaches to the decoded
    arc.
    """

    def __init__(self, d_in, label_dim, n_labels, rng_pool, dropout=0.25):
        self.head_dense = Dense(d_in, label_dim, "tanh",
                                rng_pool.derive("parser.label.head"), dropout)
        self.dep_dense = Dense(d_in, label_dim, "tanh",
                               rng_pool.derive("parser.label.dep"), dropout)
        self.out = Dense(2 * label_dim, n_labels, "softmax",
                         rng_pool.derive("parser.label.out"), dropout)

    def __call__(self, features, adjacency, train=False, rng=None):
        """Per-dependent deprel distributions, one row per token 1..n."""
        n = features.shape[0] - 1
        head_vecs = self.head_dense(features, train, rng)
        dep_vecs = self.dep_dense(features, train, rng)
        dep_rows = ad.take_rows(dep_vecs, np.arange(1, n + 1))
        arc_rows = ad.take_rows(adjacency, np.arange(1, n + 1))
        soft_heads = ad.matmul(arc_rows, head_vecs)
        return self.out(ad.concat([dep_rows, soft_heads], axis=1), train, rng)

    def named_params(self):
        out = [(f"head.{n}", p) for n, p in self.head_dense.named_params()]
        out += [(f"dep.{n}", p) for n, p in self.dep_dense.named_params()]
        out += [(f"out.{n}", p) for n, p in self.out.named_params()]
        return out


def label_loss(distributions, gold_deprels):
    n = distributions.shape[0]
    return ad.cross_entropy_rows(distributions, gold_deprels, np.full(n, 1.0 / n))


def cycle_rate(model, tb):
    """Fraction of sentences whose greedy decode contains a cycle."""
    cyclic = 0
    for sent in tb.sentences:
        adjacency = model.adjacency_for(sent)
        _, flag = greedy_decode(adjacency)
        cyclic += bool(flag)
    return cyclic / len(tb.sentences) if tb.sentences else 0.0

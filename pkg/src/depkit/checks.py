"""Finite-difference verification suite over every primitive and the layer
compositions the system actually uses.  Run via the gradcheck CLI command
or the test suite."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def _t(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True, dtype=np.float64)


def _pos(rng, *shape):
    # bounded away from zero for kinked ops (relu, max pool)
    data = rng.uniform(0.2, 1.5, size=shape) * rng.choice([-1.0, 1.0], size=shape)
    return Tensor(data, requires_grad=True, dtype=np.float64)


def _suite_cases(seed):
    """Yield (name, function, point) gradient-check cases."""
    pool = ad.RngPool(seed)

    def rng_for(name, i):
        return pool.derive(f"{name}.{i}")

    cases = []

    def add_case(name, make, n=20):
        for i in range(n):
            fn, point = make(rng_for(name, i))
            cases.append((f"{name}[{i}]", fn, point))

    add_case("add", lambda r: (lambda a, b: ad.sum_all(ad.add(a, b)),
                               [_t(r, 3, 4), _t(r, 3, 4)]))
    add_case("add_broadcast", lambda r: (lambda a, b: ad.sum_all(ad.add(a, b)),
                                         [_t(r, 3, 4), _t(r, 4)]))
    add_case("mul", lambda r: (lambda a, b: ad.sum_all(ad.mul(a, b)),
                               [_t(r, 3, 4), _t(r, 3, 4)]))
    add_case("matmul", lambda r: (lambda a, b: ad.sum_all(ad.matmul(a, b)),
                                  [_t(r, 3, 4), _t(r, 4, 2)]))
    add_case("transpose", lambda r: (lambda a: ad.sum_all(ad.mul(ad.transpose(a), ad.transpose(a))),
                                     [_t(r, 3, 4)]))
    add_case("concat", lambda r: (
        lambda a, b: ad.sum_all(ad.mul(c := ad.concat([a, b], axis=1), c)),
        [_t(r, 3, 2), _t(r, 3, 4)]))
    add_case("take_rows", lambda r: (
        lambda a: ad.sum_all(ad.mul(t := ad.take_rows(a, [0, 2, 2]), t)),
        [_t(r, 4, 3)]))
    add_case("slice_cols", lambda r: (
        lambda a: ad.sum_all(ad.mul(s := ad.slice_cols(a, 1, 3), s)),
        [_t(r, 3, 5)]))
    add_case("broadcast_rows", lambda r: (
        lambda a: ad.sum_all(ad.mul(b := ad.broadcast_rows(a, 4), b)),
        [_t(r, 1, 3)]))
    add_case("tanh", lambda r: (lambda a: ad.sum_all(ad.mul(ad.tanh(a), ad.tanh(a))),
                                [_t(r, 3, 3)]))
    add_case("relu", lambda r: (lambda a: ad.sum_all(ad.mul(ad.relu(a), ad.relu(a))),
                                [_pos(r, 3, 3)]))
    add_case("sigmoid", lambda r: (lambda a: ad.sum_all(ad.mul(ad.sigmoid(a), ad.sigmoid(a))),
                                   [_t(r, 3, 3)]))
    add_case("softmax_rows", lambda r: (
        lambda a: ad.sum_all(ad.mul(s := ad.softmax_rows(a), s)),
        [_t(r, 3, 4)]))

    def ce_case(r):
        targets = r.integers(0, 4, size=3)
        weights = r.uniform(0.5, 1.5, size=3)
        return (
            lambda a: ad.cross_entropy_rows(ad.softmax_rows(a), targets, weights),
            [_t(r, 3, 4)],
        )

    add_case("cross_entropy_rows", ce_case)
    add_case("global_max_pool", lambda r: (
        lambda a: ad.sum_all(ad.mul(p := ad.reshape(ad.global_max_pool(a), (1, 3)), p)),
        [_pos(r, 5, 3)]))

    def conv_case(r):
        dil = int(r.integers(1, 4))
        return (
            lambda x, k: ad.sum_all(ad.mul(c := ad.dilated_conv1d(x, k, dil), c)),
            [_t(r, 6, 3), _t(r, 3, 3, 2)],
        )

    add_case("dilated_conv1d", conv_case)

    def dropout_case(r, which):
        seed = int(r.integers(0, 2 ** 31))

        def fn(a):
            rng = np.random.Generator(np.random.PCG64(seed))
            if which == "dropout":
                out = ad.dropout(a, 0.25, True, rng)
            elif which == "gaussian_dropout":
                out = ad.gaussian_dropout(a, 0.25, True, rng)
            else:
                out = ad.gaussian_noise(a, 0.2, True, rng)
            return ad.sum_all(ad.mul(out, out))

        return fn, [_t(r, 3, 4)]

    add_case("dropout", lambda r: dropout_case(r, "dropout"))
    add_case("gaussian_dropout", lambda r: dropout_case(r, "gaussian_dropout"))
    add_case("gaussian_noise", lambda r: dropout_case(r, "gaussian_noise"))

    def trace_case(r):
        k = int(r.integers(1, 5))
        return lambda a: ad.trace_powers(a, k), [_t(r, 5, 5)]

    add_case("trace_powers", trace_case)

    # layer compositions used by the system (mirrored at float64, tiny dims)
    def dense_chain(r):
        def fn(x, w1, b1, w2, b2):
            h = ad.tanh(ad.add(ad.matmul(x, w1), b1))
            return ad.sum_all(ad.softmax_rows(ad.add(ad.matmul(h, w2), b2)))

        return fn, [_t(r, 3, 4), _t(r, 4, 5), _t(r, 5), _t(r, 5, 3), _t(r, 3)]

    add_case("dense_tanh_softmax", dense_chain)

    def conv_stack_chain(r):
        def fn(x, k1, k2):
            h = ad.relu(ad.dilated_conv1d(x, k1, 1))
            h = ad.relu(ad.dilated_conv1d(h, k2, 2))
            p = ad.reshape(ad.global_max_pool(h), (1, 2))
            return ad.sum_all(ad.mul(p, p))

        return fn, [_t(r, 5, 2), _t(r, 3, 2, 3), _t(r, 3, 3, 2)]

    add_case("char_conv_stack", conv_stack_chain)

    def lstm_chain(r):
        h_dim = 2

        def fn(xs, w, u, b):
            pre = ad.add(ad.matmul(xs, w), b)
            h = Tensor(np.zeros((1, h_dim)), dtype=np.float64)
            c = Tensor(np.zeros((1, h_dim)), dtype=np.float64)
            outs = []
            for t in range(xs.shape[0]):
                z = ad.add(ad.take_rows(pre, [t]), ad.matmul(h, u))
                i = ad.sigmoid(ad.slice_cols(z, 0, h_dim))
                f = ad.sigmoid(ad.slice_cols(z, h_dim, 2 * h_dim))
                g = ad.tanh(ad.slice_cols(z, 2 * h_dim, 3 * h_dim))
                o = ad.sigmoid(ad.slice_cols(z, 3 * h_dim, 4 * h_dim))
                c = ad.add(ad.mul(f, c), ad.mul(i, g))
                h = ad.mul(o, ad.tanh(c))
                outs.append(h)
            seq = ad.concat(outs, axis=0)
            return ad.sum_all(ad.mul(seq, seq))

        return fn, [_t(r, 3, 3), _t(r, 3, 4 * h_dim), _t(r, h_dim, 4 * h_dim),
                    _t(r, 4 * h_dim)]

    add_case("lstm_cell_chain", lstm_chain)

    def arc_path(r):
        gold = r.integers(0, 4, size=3)

        def fn(feat, wh, wd):
            heads = ad.tanh(ad.matmul(feat, wh))
            deps = ad.tanh(ad.matmul(feat, wd))
            a = ad.softmax_rows(ad.matmul(deps, ad.transpose(heads)))
            rows = ad.take_rows(a, [1, 2, 3])
            ce = ad.cross_entropy_rows(rows, gold, np.full(3, 1 / 3))
            mask = np.ones((4, 1))
            mask[0, 0] = 0.0
            penalty = ad.trace_powers(ad.mul(a, Tensor(mask, dtype=np.float64)), 3)
            return ad.add(ce, penalty)

        return fn, [_t(r, 4, 3), _t(r, 3, 4), _t(r, 3, 4)]

    add_case("arc_loss_path", arc_path)
    return cases


def run_suite(seed=94, tolerance=1e-4):
    """Gradient-check the whole op inventory; returns a list of
    (group, max_rel_err, passed) summaries."""
    groups = {}
    for name, fn, point in _suite_cases(seed):
        group = name.split("[")[0]
        report = ad.grad_check(fn, point, tolerance)
        worst, ok = groups.get(group, (0.0, True))
        groups[group] = (max(worst, report.max_rel_err), ok and report.passed)
    return [(g, err, ok) for g, (err, ok) in groups.items()]


def format_suite(results):
    width = max(len(g) for g, _, _ in results)
    lines = [f"{'op':<{width}}  {'max rel err':>12}  status"]
    for group, err, ok in results:
        lines.append(f"{group:<{width}}  {err:12.3e}  {'ok' if ok else 'FAIL'}")
    return "\n".join(lines)

"""Reverse-mode automatic differentiation over dense numpy tensors.

Operations record onto the thread-active Tape; with no active tape they are
plain forward computations.  Training runs in float32, gradient checking in
float64.  All stochastic ops draw from explicitly passed numpy Generators so
that runs are bitwise reproducible given a seed.
"""

from __future__ import annotations

import hashlib
import threading

import numpy as np

_FLOATS = (np.float32, np.float64)


class ShapeError(ValueError):
    pass


class Tensor:
    """A dense n-dimensional value, optionally carrying a gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_tape")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.type not in _FLOATS:
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None
        self.name = name
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, dtype={self.data.dtype.name})"


_ACTIVE = threading.local()


class Tape:
    """Ordered record of operations for one forward pass.

    Records are appended in execution order, so walking them in reverse is a
    reverse topological order and backward touches each node exactly once.
    Use as a context manager; tapes on distinct threads are independent.
    """

    def __init__(self):
        self._records = []  # (output, inputs, backward_fn)

    def __enter__(self):
        stack = getattr(_ACTIVE, "stack", None)
        if stack is None:
            stack = _ACTIVE.stack = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE.stack.pop()
        return False

    @staticmethod
    def active():
        stack = getattr(_ACTIVE, "stack", None)
        return stack[-1] if stack else None

    def __len__(self):
        return len(self._records)


def _emit(out, inputs, backward_fn):
    tape = Tape.active()
    if tape is not None and (
        any(t.requires_grad or t._tape is tape for t in inputs)
    ):
        out._tape = tape
        tape._records.append((out, inputs, backward_fn))
    return out


def backward(loss):
    """Run reverse-mode accumulation from a recorded scalar loss.

    Populates .grad on every requires_grad tensor reachable from the loss;
    unreachable parameters keep their (zero-initialized) buffers.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = loss._tape
    if tape is None:
        raise ValueError("loss has no recorded tape")
    grads = {id(loss): np.ones_like(loss.data)}
    for out, inputs, backward_fn in reversed(tape._records):
        gout = grads.pop(id(out), None)
        if gout is None:
            continue
        for tensor, gin in zip(inputs, backward_fn(gout)):
            if gin is None:
                continue
            if tensor._tape is tape:
                acc = grads.get(id(tensor))
                grads[id(tensor)] = gin if acc is None else acc + gin
            elif tensor.requires_grad:
                tensor.grad += gin


def _check_dtype(*tensors):
    dtype = tensors[0].dtype
    for t in tensors[1:]:
        if t.dtype != dtype:
            raise ShapeError(f"mixed dtypes {dtype} and {t.dtype}")
    return dtype


def _unbroadcast(grad, shape):
    """Sum a gradient over the axes numpy broadcasting expanded."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# primitives


def add(a, b):
    _check_dtype(a, b)
    out = Tensor(a.data + b.data)
    return _emit(
        out,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def mul(a, b):
    _check_dtype(a, b)
    out = Tensor(a.data * b.data)
    return _emit(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def scale(x, c):
    c = float(c)
    out = Tensor(x.data * c)
    return _emit(out, (x,), lambda g: (g * c,))


def matmul(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} x {b.shape}")
    _check_dtype(a, b)
    out = Tensor(a.data @ b.data)
    return _emit(out, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(x):
    if x.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {x.shape}")
    out = Tensor(x.data.T.copy())
    return _emit(out, (x,), lambda g: (g.T,))


def reshape(x, shape):
    out = Tensor(x.data.reshape(shape))
    return _emit(out, (x,), lambda g: (g.reshape(x.shape),))


def concat(tensors, axis=0):
    tensors = list(tensors)
    _check_dtype(*tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, offsets, axis=axis))

    return _emit(out, tuple(tensors), bw)


def take_rows(x, indices):
    indices = np.asarray(indices, dtype=np.intp)
    out = Tensor(x.data[indices])

    def bw(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, indices, g)
        return (gx,)

    return _emit(out, (x,), bw)


def slice_cols(x, start, stop):
    if x.ndim != 2:
        raise ShapeError(f"slice_cols expects a matrix, got shape {x.shape}")
    out = Tensor(x.data[:, start:stop])

    def bw(g):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = g
        return (gx,)

    return _emit(out, (x,), bw)


def broadcast_rows(x, n):
    """Repeat a (1, d) row n times; gradient sums back over the copies."""
    if x.ndim != 2 or x.shape[0] != 1:
        raise ShapeError(f"broadcast_rows expects shape (1, d), got {x.shape}")
    out = Tensor(np.broadcast_to(x.data, (n, x.shape[1])).copy())
    return _emit(out, (x,), lambda g: (g.sum(axis=0, keepdims=True),))


def tanh(x):
    out = Tensor(np.tanh(x.data))
    return _emit(out, (x,), lambda g: (g * (1.0 - out.data * out.data),))


def relu(x):
    out = Tensor(np.maximum(x.data, 0))
    return _emit(out, (x,), lambda g: (g * (x.data > 0),))


def sigmoid(x):
    # tanh form: stable for large |x|, no overflow branches
    out = Tensor(0.5 * (np.tanh(0.5 * x.data) + 1.0))
    return _emit(out, (x,), lambda g: (g * out.data * (1.0 - out.data),))


def softmax_rows(x):
    if x.ndim != 2:
        raise ShapeError(f"softmax_rows expects a matrix, got shape {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)
    out = Tensor(p)

    def bw(g):
        dot = (g * p).sum(axis=1, keepdims=True)
        return (p * (g - dot),)

    return _emit(out, (x,), bw)


def sum_all(x):
    out = Tensor(np.asarray(x.data.sum(), dtype=x.dtype))
    return _emit(out, (x,), lambda g: (np.broadcast_to(g, x.shape).astype(x.dtype),))


_P_FLOOR = 1e-12


def cross_entropy_rows(probs, targets, weights):
    """Weighted negative log-likelihood of one target class per row.

    probs are probabilities (softmax output), not logits.  targets and
    weights are constant index/weight vectors, one entry per row.
    """
    if probs.ndim != 2:
        raise ShapeError(f"cross_entropy_rows expects a matrix, got {probs.shape}")
    targets = np.asarray(targets, dtype=np.intp)
    weights = np.asarray(weights, dtype=probs.dtype)
    if targets.shape != (probs.shape[0],) or weights.shape != (probs.shape[0],):
        raise ShapeError(
            f"targets/weights {targets.shape}/{weights.shape} do not match "
            f"{probs.shape[0]} rows"
        )
    rows = np.arange(probs.shape[0])
    picked = np.maximum(probs.data[rows, targets], _P_FLOOR)
    value = -(weights * np.log(picked)).sum()
    out = Tensor(np.asarray(value, dtype=probs.dtype))

    def bw(g):
        gp = np.zeros_like(probs.data)
        gp[rows, targets] = -weights / picked * g
        return (gp,)

    return _emit(out, (probs,), bw)


def global_max_pool(x):
    """Max over the time axis of a (T, C) sequence; gradient routes to the
    first maximal position per channel."""
    if x.ndim != 2:
        raise ShapeError(f"global_max_pool expects (T, C), got {x.shape}")
    am = x.data.argmax(axis=0)
    cols = np.arange(x.shape[1])
    out = Tensor(x.data[am, cols])

    def bw(g):
        gx = np.zeros_like(x.data)
        gx[am, cols] = g
        return (gx,)

    return _emit(out, (x,), bw)


def _shift_rows(arr, offset):
    """result[t] = arr[t + offset], zero-filled outside the sequence."""
    if offset == 0:
        return arr
    out = np.zeros_like(arr)
    if offset > 0:
        out[:-offset or None] = arr[offset:]
    else:
        out[-offset:] = arr[:offset]
    return out


def dilated_conv1d(x, kernel, dilation):
    """Same-length 1-d convolution with dilated taps and zero padding.

    x is (T, C_in), kernel is (k, C_in, C_out); tap j reads offset
    (j - k//2) * dilation relative to the output position.
    """
    if x.ndim != 2 or kernel.ndim != 3 or kernel.shape[1] != x.shape[1]:
        raise ShapeError(f"dilated_conv1d shapes {x.shape} * {kernel.shape}")
    _check_dtype(x, kernel)
    k = kernel.shape[0]
    center = k // 2
    offsets = [(j - center) * dilation for j in range(k)]
    out_data = np.zeros((x.shape[0], kernel.shape[2]), dtype=x.dtype)
    for j, off in enumerate(offsets):
        out_data += _shift_rows(x.data, off) @ kernel.data[j]
    out = Tensor(out_data)

    def bw(g):
        gx = np.zeros_like(x.data)
        gk = np.zeros_like(kernel.data)
        for j, off in enumerate(offsets):
            gx += _shift_rows(g @ kernel.data[j].T, -off)
            gk[j] = _shift_rows(x.data, off).T @ g
        return (gx, gk)

    return _emit(out, (x, kernel), bw)


def dropout(x, rate, train, rng):
    """Standard inverted dropout: zero with probability rate, scale kept
    entries by 1/(1-rate).  Identity when train is false."""
    if not train or rate <= 0.0:
        return x
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    out = Tensor(x.data * mask)
    return _emit(out, (x,), lambda g: (g * mask,))


def gaussian_dropout(x, rate, train, rng):
    """Multiplicative Normal(1, rate/(1-rate)) noise at train time."""
    if not train or rate <= 0.0:
        return x
    std = (rate / (1.0 - rate)) ** 0.5
    mult = rng.normal(1.0, std, size=x.shape).astype(x.dtype)
    out = Tensor(x.data * mult)
    return _emit(out, (x,), lambda g: (g * mult,))


def gaussian_noise(x, std, train, rng):
    """Additive zero-mean Gaussian noise at train time."""
    if not train or std <= 0.0:
        return x
    noise = rng.normal(0.0, std, size=x.shape).astype(x.dtype)
    out = Tensor(x.data + noise)
    return _emit(out, (x,), lambda g: (g,))


def trace_powers(a, k_max):
    """Sum of traces of the first k_max matrix powers of a square matrix.

    value = sum_{k=1..K} tr(A^k); gradient is sum_{k=1..K} k * (A^{k-1})^T.
    The trace of A^k totals the weighted closed walks of length k, so this
    penalizes cycle mass in an adjacency matrix.
    """
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"trace_powers expects a square matrix, got {a.shape}")
    if k_max < 1:
        raise ValueError("trace_powers needs K >= 1")
    # powers[k] = A^k, kept for the gradient; powers[0] = I
    powers = [np.eye(a.shape[0], dtype=a.dtype)]
    total = a.dtype.type(0.0)
    for _ in range(k_max):
        powers.append(powers[-1] @ a.data)
        total += np.trace(powers[-1])
    out = Tensor(np.asarray(total, dtype=a.dtype))

    def bw(g):
        grad = np.zeros_like(a.data)
        for k in range(1, k_max + 1):
            grad += k * powers[k - 1].T
        return (grad * g,)

    return _emit(out, (a,), bw)


# ---------------------------------------------------------------------------
# optimizer


class AdamState:
    """Bias-corrected ADAM moments for an ordered parameter list."""

    def __init__(self, params, lr=0.002, beta1=0.9, beta2=0.9, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]


def adam_step(state, l2_terms=None):
    """One ADAM update over state.params, reading each tensor's .grad.

    l2_terms maps parameter id to a weight-decay rate; the decay enters as
    an added gradient 2 * lambda * w before the moment updates.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for i, p in enumerate(state.params):
        g = p.grad
        lam = l2_terms.get(id(p), 0.0) if l2_terms else 0.0
        if lam:
            g = g + (2.0 * lam) * p.data
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / bias1
        v_hat = state.v[i] / bias2
        p.data -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)


# ---------------------------------------------------------------------------
# gradient checking


class GradCheckReport:
    def __init__(self, max_rel_err, per_input, tolerance):
        self.max_rel_err = max_rel_err
        self.per_input = per_input
        self.tolerance = tolerance

    @property
    def passed(self):
        return self.max_rel_err <= self.tolerance

    def __repr__(self):
        state = "ok" if self.passed else "FAIL"
        return f"GradCheckReport({state}, max_rel_err={self.max_rel_err:.3e})"


def grad_check(f, point, tolerance=1e-4, h=1e-5):
    """Compare tape gradients of a scalar function to central differences.

    point is a list of float64 Tensors with requires_grad set; f must not
    capture state across calls (stochastic ops should rebuild their rng).
    """
    for t in point:
        t.zero_grad()
    with Tape():
        loss = f(*point)
    backward(loss)
    analytic = [t.grad.copy() for t in point]

    errs = []
    for t, ana in zip(point, analytic):
        flat = t.data.reshape(-1)
        fd = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f(*point).item()
            flat[i] = orig - h
            down = f(*point).item()
            flat[i] = orig
            fd[i] = (up - down) / (2.0 * h)
        fd = fd.reshape(t.shape)
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(fd)), 1e-4)
        errs.append(float((np.abs(ana - fd) / denom).max()) if fd.size else 0.0)
    max_err = max(errs) if errs else 0.0
    return GradCheckReport(max_err, errs, tolerance)


# ---------------------------------------------------------------------------
# deterministic rng derivation


def _name_key(name):
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


class RngPool:
    """One master seed, split into independent named streams.

    Derivation hashes the stream name, so layer initialization does not
    depend on construction order.
    """

    def __init__(self, seed):
        self.seed = int(seed)

    def derive(self, name):
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(_name_key(name),))
        return np.random.Generator(np.random.PCG64(seq))

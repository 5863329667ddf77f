"""Minimal reverse-mode automatic differentiation over dense float64 matrices.

Supports exactly the operator set the graph-attention encoder and fusion
network need: matmul, elementwise arithmetic, leaky ReLU, exp/log,
row-wise log-softmax, segment softmax/sum over edge groups, row gather,
concatenation, dropout masks and a batched outer product. Every value is
a ``numpy.float64`` array; there is no GPU path and no operator fusion.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "constant",
    "parameter",
    "add",
    "sub",
    "mul",
    "scale",
    "matmul",
    "total",
    "mean_all",
    "leaky_relu",
    "exp",
    "log",
    "log_softmax",
    "reshape",
    "gather_rows",
    "segment_sum",
    "segment_mean",
    "segment_softmax",
    "concat_cols",
    "dropout",
    "pairwise_expand",
    "save_params",
    "load_params",
    "backward",
]


class Tensor:
    """One node of the computation record.

    Holds a dense value, references to the operand tensors it was computed
    from, a backward rule that maps the output gradient to operand-gradient
    contributions, and a gradient accumulator of the same shape as the value.
    """

    __slots__ = ("value", "grad", "parents", "_backward_rule", "requires_grad")

    def __init__(self, value, parents=(), backward_rule=None, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = tuple(parents)
        self._backward_rule = backward_rule
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            # own a copy: rules may hand back views of shared buffers
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    # Operator sugar for scalar-heavy call sites.
    def __add__(self, other):
        return add(self, _lift(other))

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def constant(value):
    """Tensor that never receives a gradient."""
    return Tensor(value)


def parameter(value):
    """Trainable leaf tensor."""
    return Tensor(value, requires_grad=True)


def _unbroadcast(g, shape):
    """Reduce gradient ``g`` back to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a, b = _lift(a), _lift(b)
    out_val = a.value + b.value

    def rule(g, out):
        return (_unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape))

    return Tensor(out_val, (a, b), rule)


def sub(a, b):
    a, b = _lift(a), _lift(b)
    out_val = a.value - b.value

    def rule(g, out):
        return (_unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape))

    return Tensor(out_val, (a, b), rule)


def mul(a, b):
    a, b = _lift(a), _lift(b)
    out_val = a.value * b.value

    def rule(g, out):
        return (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        )

    return Tensor(out_val, (a, b), rule)


def scale(a, s):
    """Multiply by a python scalar."""
    a = _lift(a)
    s = float(s)

    def rule(g, out):
        return (g * s,)

    return Tensor(a.value * s, (a,), rule)


def matmul(a, b):
    a, b = _lift(a), _lift(b)
    out_val = a.value @ b.value

    def rule(g, out):
        return (g @ b.value.T, a.value.T @ g)

    return Tensor(out_val, (a, b), rule)


def total(a):
    """Sum of all entries, as a scalar tensor."""
    a = _lift(a)

    def rule(g, out):
        return (np.full_like(a.value, float(g)),)

    return Tensor(np.float64(a.value.sum()), (a,), rule)


def mean_all(a):
    """Mean of all entries, as a scalar tensor."""
    a = _lift(a)
    n = a.value.size

    def rule(g, out):
        return (np.full_like(a.value, float(g) / n),)

    return Tensor(np.float64(a.value.mean()), (a,), rule)


def leaky_relu(a, slope=0.01):
    a = _lift(a)
    out_val = np.where(a.value >= 0, a.value, slope * a.value)

    def rule(g, out):
        return (np.where(a.value >= 0, g, slope * g),)

    return Tensor(out_val, (a,), rule)


def exp(a):
    a = _lift(a)
    out_val = np.exp(a.value)

    def rule(g, out):
        return (g * out.value,)

    return Tensor(out_val, (a,), rule)


def log(a):
    a = _lift(a)

    def rule(g, out):
        return (g / a.value,)

    return Tensor(np.log(a.value), (a,), rule)


def log_softmax(a, axis=1):
    """Numerically stable row-wise (or column-wise) log-softmax."""
    a = _lift(a)
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    logits = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def rule(g, out):
        soft = np.exp(out.value)
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return Tensor(logits, (a,), rule)


def reshape(a, shape):
    a = _lift(a)

    def rule(g, out):
        return (g.reshape(a.value.shape),)

    return Tensor(a.value.reshape(shape), (a,), rule)


def transpose(a):
    a = _lift(a)

    def rule(g, out):
        return (g.T,)

    return Tensor(a.value.T, (a,), rule)


def _scatter_add(num_buckets, segments, values):
    """Sum rows of ``values`` into buckets; sort + reduceat beats np.add.at."""
    out = np.zeros((num_buckets,) + values.shape[1:], dtype=np.float64)
    if len(segments) == 0:
        return out
    order = np.argsort(segments, kind="stable")
    sseg = segments[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(sseg)) + 1])
    out[sseg[starts]] = np.add.reduceat(values[order], starts, axis=0)
    return out


def gather_rows(a, idx):
    """Select rows ``a[idx]``; duplicate indices accumulate gradient."""
    a = _lift(a)
    idx = np.asarray(idx, dtype=np.intp)

    def rule(g, out):
        return (_scatter_add(a.value.shape[0], idx, g),)

    return Tensor(a.value[idx], (a,), rule)


def segment_sum(a, segments, num_segments):
    """Scatter-add rows of ``a`` into ``num_segments`` buckets."""
    a = _lift(a)
    segments = np.asarray(segments, dtype=np.intp)
    out_val = _scatter_add(num_segments, segments, a.value)

    def rule(g, out):
        return (g[segments],)

    return Tensor(out_val, (a,), rule)


def segment_mean(a, segments, num_segments):
    """Scatter-mean; empty segments yield zero rows."""
    a = _lift(a)
    segments = np.asarray(segments, dtype=np.intp)
    counts = np.bincount(segments, minlength=num_segments).astype(np.float64)
    safe = np.where(counts == 0, 1.0, counts)
    summed = segment_sum(a, segments, num_segments)
    inv = (1.0 / safe).reshape((num_segments,) + (1,) * (a.value.ndim - 1))
    return mul(summed, constant(np.broadcast_to(inv, summed.value.shape).copy()))


def segment_softmax(a, segments, num_segments):
    """Softmax of a 1-D logit vector within destination segments.

    Uses per-segment max subtraction for stability; entries of each segment
    sum to one exactly up to rounding.
    """
    a = _lift(a)
    if a.value.ndim != 1:
        raise ValueError("segment_softmax expects a 1-D logit vector")
    segments = np.asarray(segments, dtype=np.intp)
    seg_max = np.full(num_segments, -np.inf)
    np.maximum.at(seg_max, segments, a.value)
    shifted = a.value - seg_max[segments]
    exps = np.exp(shifted)
    denom = np.zeros(num_segments, dtype=np.float64)
    np.add.at(denom, segments, exps)
    out_val = exps / denom[segments]

    def rule(g, out):
        # d softmax: y * (g - sum_seg(g * y))
        dot = np.zeros(num_segments, dtype=np.float64)
        np.add.at(dot, segments, g * out.value)
        return (out.value * (g - dot[segments]),)

    return Tensor(out_val, (a,), rule)


def concat_cols(tensors):
    """Concatenate 2-D tensors along axis 1."""
    tensors = [_lift(t) for t in tensors]
    widths = [t.value.shape[1] for t in tensors]
    splits = np.cumsum(widths)[:-1]

    def rule(g, out):
        return tuple(np.hsplit(g, splits))

    return Tensor(np.concatenate([t.value for t in tensors], axis=1), tuple(tensors), rule)


def dropout(a, rate, rng):
    """Inverted dropout; ``rate`` 0 is the identity, mask drawn from ``rng``."""
    a = _lift(a)
    if rate == 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    mask = (rng.random(a.value.shape) >= rate) / (1.0 - rate)

    def rule(g, out):
        return (g * mask,)

    return Tensor(a.value * mask, (a,), rule)


def pairwise_expand(a, b):
    """Row-wise flattened outer product: out[n, i*db + j] = a[n, i] * b[n, j].

    The first operand varies slowest, so folding left-to-right keeps the
    leading factor as the slowest-varying axis of the flattened product.
    """
    a, b = _lift(a), _lift(b)
    n, da = a.value.shape
    _, db = b.value.shape
    out_val = (a.value[:, :, None] * b.value[:, None, :]).reshape(n, da * db)

    def rule(g, out):
        g3 = g.reshape(n, da, db)
        return (
            (g3 * b.value[:, None, :]).sum(axis=2),
            (g3 * a.value[:, :, None]).sum(axis=1),
        )

    return Tensor(out_val, (a, b), rule)


def save_params(params, path_prefix):
    """Write parameters as flat little-endian float64 plus a shape manifest."""
    import json
    from pathlib import Path

    prefix = Path(path_prefix)
    flat = np.concatenate([p.value.ravel() for p in params]) if params else np.array([])
    flat.astype("<f8").tofile(prefix.with_suffix(".bin"))
    manifest = {"shapes": [list(p.value.shape) for p in params]}
    prefix.with_suffix(".json").write_text(json.dumps(manifest, indent=2))


def load_params(params, path_prefix):
    """Load a checkpoint written by :func:`save_params` into ``params``."""
    import json
    from pathlib import Path

    prefix = Path(path_prefix)
    manifest = json.loads(prefix.with_suffix(".json").read_text())
    shapes = [tuple(s) for s in manifest["shapes"]]
    if shapes != [p.value.shape for p in params]:
        raise ValueError("checkpoint shapes do not match the model's parameters")
    flat = np.fromfile(prefix.with_suffix(".bin"), dtype="<f8")
    offset = 0
    for p in params:
        size = p.value.size
        p.value = flat[offset : offset + size].reshape(p.value.shape).astype(np.float64)
        offset += size
    if offset != flat.size:
        raise ValueError("checkpoint size does not match the model's parameters")


def backward(loss):
    """Accumulate d(loss)/d(tensor) into ``.grad`` of every reachable tensor.

    ``loss`` must be scalar. Tensors not on a path to ``loss`` keep a
    ``None`` gradient; callers treat that as zero.
    """
    if loss.value.ndim != 0 and loss.value.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.value.shape}")

    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    loss._accumulate(np.ones_like(loss.value))
    for node in reversed(topo):
        if node._backward_rule is None or node.grad is None:
            continue
        contribs = node._backward_rule(node.grad, node)
        for parent, g in zip(node.parents, contribs):
            if parent.requires_grad:
                parent._accumulate(g)

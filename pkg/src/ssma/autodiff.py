"""A small tape-based reverse-mode autodiff over dense float64 numpy arrays.

Usage::

    tape = Tape()
    x = tape.var(np.array([1.0, 2.0]), requires_grad=True)
    y = ad.sum(ad.tanh(x) * x)
    tape.backward(y)
    x.grad

Nodes are appended to the tape as they are created, so insertion order is a
topological order and ``backward`` walks it in reverse exactly once.
Parameters live in a :class:`ParameterStore`; binding one onto a tape with
:meth:`Tape.param` routes its gradient back into the store on ``backward``.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .numerics import LOG_CLAMP

ACTIVATIONS = ("tanh", "sigmoid", "relu", "elu", "leaky_relu", "identity")
ANALYTIC_ACTIVATIONS = ("tanh", "sigmoid", "identity")
ELU_ALPHA = 1.0
LEAKY_SLOPE = 0.2
CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


class Var:
    __slots__ = ("tape", "value", "grad", "parents", "vjp", "requires_grad", "param")

    __array_priority__ = 1000  # make ndarray (op) Var defer to Var

    def __init__(self, tape, value, parents=(), vjp=None, requires_grad=False, param=None):
        self.tape = tape
        self.value = value
        self.grad = None
        self.parents = parents
        self.vjp = vjp
        self.requires_grad = requires_grad
        self.param = param

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var(shape={self.value.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)

    @property
    def T(self):
        return swapaxes(self, -1, -2)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis, keepdims)


class Tape:
    """Append-only record of differentiable operations."""

    def __init__(self):
        self.nodes: list[Var] = []

    def var(self, value, requires_grad: bool = False) -> Var:
        v = Var(self, np.asarray(value, dtype=np.float64), requires_grad=requires_grad)
        if requires_grad:
            self.nodes.append(v)
        return v

    def param(self, p: "Parameter") -> Var:
        v = Var(self, p.value, requires_grad=True, param=p)
        self.nodes.append(v)
        return v

    def backward(self, out: Var, seed=None):
        if out.tape is not self:
            raise ValueError("output does not belong to this tape")
        if not out.requires_grad:
            return
        out.grad = np.ones_like(out.value) if seed is None else np.asarray(seed, dtype=np.float64)
        for node in reversed(self.nodes):
            if node.grad is None:
                continue
            if node.vjp is not None:
                grads = node.vjp(node.grad)
                for parent, g in zip(node.parents, grads):
                    if g is None or not parent.requires_grad:
                        continue
                    parent.grad = g if parent.grad is None else parent.grad + g
            if node.param is not None:
                node.param.grad += node.grad


def _lift(tape, x) -> Var:
    if isinstance(x, Var):
        return x
    return Var(tape, np.asarray(x, dtype=np.float64))


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("operation needs at least one Var operand")


def _node(tape, value, parents, vjp) -> Var:
    req = any(p.requires_grad for p in parents)
    v = Var(tape, value, parents if req else (), vjp if req else None, req)
    if req:
        tape.nodes.append(v)
    return v


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _binary_inputs(a, b):
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return tape, a, b


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> Var:
    tape, a, b = _binary_inputs(a, b)
    return _node(tape, a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Var:
    tape, a, b = _binary_inputs(a, b)
    return _node(tape, a.value - b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Var:
    tape, a, b = _binary_inputs(a, b)
    return _node(tape, a.value * b.value, (a, b),
                 lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)))


def div(a, b) -> Var:
    tape, a, b = _binary_inputs(a, b)
    out = a.value / b.value
    return _node(tape, out, (a, b),
                 lambda g: (_unbroadcast(g / b.value, a.shape),
                            _unbroadcast(-g * out / b.value, b.shape)))


def scale(x: Var, c: float) -> Var:
    return _node(x.tape, x.value * c, (x,), lambda g: (g * c,))


def square(x: Var) -> Var:
    return _node(x.tape, x.value ** 2, (x,), lambda g: (2.0 * g * x.value,))


def matmul(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands must be at least 2D")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def vjp(g):
        ga = g @ np.swapaxes(b.value, -1, -2) if a.requires_grad else None
        gb = np.swapaxes(a.value, -1, -2) @ g if b.requires_grad else None
        return (None if ga is None else _unbroadcast(ga, a.shape),
                None if gb is None else _unbroadcast(gb, b.shape))

    return _node(tape, a.value @ b.value, (a, b), vjp)


def affine(x, W, b=None) -> Var:
    """``x @ W.T + b`` with ``W`` stored as (out, in)."""
    out = matmul(x, swapaxes(W, -1, -2) if isinstance(W, Var) else np.asarray(W).T)
    return out if b is None else add(out, b)


# ---------------------------------------------------------------------------
# Unary functions
# ---------------------------------------------------------------------------

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def activation(x: Var, kind: str) -> Var:
    v = x.value
    if kind == "tanh":
        out = np.tanh(v)
        d = 1.0 - out ** 2
    elif kind == "sigmoid":
        out = _sigmoid(v)
        d = out * (1.0 - out)
    elif kind == "relu":
        out = np.maximum(v, 0.0)
        d = (v > 0).astype(np.float64)
    elif kind == "elu":
        ex = np.expm1(np.minimum(v, 0.0))
        out = np.where(v > 0, v, ELU_ALPHA * ex)
        d = np.where(v > 0, 1.0, ELU_ALPHA * (ex + 1.0))
    elif kind == "leaky_relu":
        out = np.where(v > 0, v, LEAKY_SLOPE * v)
        d = np.where(v > 0, 1.0, LEAKY_SLOPE)
    elif kind == "identity":
        return x
    else:
        raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
    return _node(x.tape, out, (x,), lambda g: (g * d,))


def tanh(x):
    return activation(x, "tanh")


def sigmoid(x):
    return activation(x, "sigmoid")


def relu(x):
    return activation(x, "relu")


def elu(x):
    return activation(x, "elu")


def leaky_relu(x):
    return activation(x, "leaky_relu")


def log(x: Var, floor: float = LOG_CLAMP ** 2) -> Var:
    """Natural log of ``max(x, floor)``; zero gradient inside the clamped region."""
    clamped = x.value < floor
    safe = np.where(clamped, floor, x.value)
    return _node(x.tape, np.log(safe), (x,), lambda g: (np.where(clamped, 0.0, g / safe),))


def exp(x: Var) -> Var:
    out = np.exp(x.value)
    return _node(x.tape, out, (x,), lambda g: (g * out,))


def sin(x: Var) -> Var:
    return _node(x.tape, np.sin(x.value), (x,), lambda g: (g * np.cos(x.value),))


def cos(x: Var) -> Var:
    return _node(x.tape, np.cos(x.value), (x,), lambda g: (-g * np.sin(x.value),))


def atan2(y, x) -> Var:
    """Phase angle of ``x + iy``; the gradient is zeroed where the magnitude is clamped."""
    tape, y, x = _binary_inputs(y, x)
    r2 = x.value ** 2 + y.value ** 2
    dead = r2 < LOG_CLAMP ** 2
    safe = np.where(dead, 1.0, r2)

    def vjp(g):
        gy = np.where(dead, 0.0, g * x.value / safe)
        gx = np.where(dead, 0.0, -g * y.value / safe)
        return _unbroadcast(gy, y.shape), _unbroadcast(gx, x.shape)

    return _node(tape, np.arctan2(y.value, x.value), (y, x), vjp)


# ---------------------------------------------------------------------------
# Shape manipulation and reductions
# ---------------------------------------------------------------------------

def sum(x: Var, axis=None, keepdims: bool = False) -> Var:  # noqa: A001 - mirrors numpy
    out = x.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(x.tape, out, (x,), vjp)


def mean(x: Var, axis=None, keepdims: bool = False) -> Var:
    count = x.value.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return scale(sum(x, axis, keepdims), 1.0 / count)


def reshape(x: Var, shape) -> Var:
    return _node(x.tape, x.value.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def swapaxes(x: Var, a: int, b: int) -> Var:
    return _node(x.tape, np.swapaxes(x.value, a, b), (x,), lambda g: (np.swapaxes(g, a, b),))


def getitem(x: Var, key) -> Var:
    def vjp(g):
        out = np.zeros_like(x.value)
        np.add.at(out, key, g)
        return (out,)

    return _node(x.tape, x.value[key], (x,), vjp)


def concat(xs, axis: int = -1) -> Var:
    tape = _tape_of(*xs)
    xs = [_lift(tape, x) for x in xs]
    sizes = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return _node(tape, np.concatenate([x.value for x in xs], axis=axis), tuple(xs),
                 lambda g: tuple(np.split(g, sizes, axis=axis)))


# ---------------------------------------------------------------------------
# Segment (scatter) reductions over axis 0
# ---------------------------------------------------------------------------

def _segment_sum_np(v: np.ndarray, seg: np.ndarray, num: int) -> np.ndarray:
    out = np.zeros((num,) + v.shape[1:])
    np.add.at(out, seg, v)
    return out


def _segment_counts(seg, num):
    return np.bincount(seg, minlength=num).astype(np.float64)


def segment_sum(x: Var, seg, num: int) -> Var:
    """``out[s] = sum_{i: seg[i] = s} x[i]``; empty segments are zero."""
    seg = np.asarray(seg, dtype=np.int64)
    if seg.shape != x.shape[:1]:
        raise ShapeError(f"segment ids {seg.shape} do not match leading axis of {x.shape}")
    return _node(x.tape, _segment_sum_np(x.value, seg, num), (x,), lambda g: (g[seg],))


def segment_mean(x: Var, seg, num: int) -> Var:
    seg = np.asarray(seg, dtype=np.int64)
    cnt = np.maximum(_segment_counts(seg, num), 1.0).reshape((num,) + (1,) * (x.ndim - 1))
    return div(segment_sum(x, seg, num), cnt)


def segment_max(x: Var, seg, num: int) -> Var:
    """Per-segment max; empty segments give zero.  Ties share the gradient evenly."""
    seg = np.asarray(seg, dtype=np.int64)
    out = np.full((num,) + x.shape[1:], -np.inf)
    np.maximum.at(out, seg, x.value)
    out[np.isinf(out)] = 0.0
    hit = (x.value == out[seg]).astype(np.float64)
    share = hit / np.maximum(_segment_sum_np(hit, seg, num), 1.0)[seg]
    return _node(x.tape, out, (x,), lambda g: (g[seg] * share,))


def segment_softmax(x: Var, seg, num: int) -> Var:
    """Softmax of ``x`` within each segment (independently per trailing index)."""
    seg = np.asarray(seg, dtype=np.int64)
    top = np.full((num,) + x.shape[1:], -np.inf)
    np.maximum.at(top, seg, x.value)
    e = np.exp(x.value - top[seg])
    y = e / _segment_sum_np(e, seg, num)[seg]

    def vjp(g):
        return (y * (g - _segment_sum_np(g * y, seg, num)[seg]),)

    return _node(x.tape, y, (x,), vjp)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def l1_loss(pred: Var, target) -> Var:
    """Mean absolute error (subgradient 0 at exact ties)."""
    target = np.asarray(target.value if isinstance(target, Var) else target, dtype=np.float64)
    diff = pred.value - target
    n = diff.size
    return _node(pred.tape, np.abs(diff).mean(), (pred,), lambda g: (g * np.sign(diff) / n,))


def mse_loss(pred: Var, target) -> Var:
    target = np.asarray(target.value if isinstance(target, Var) else target, dtype=np.float64)
    diff = pred.value - target
    n = diff.size
    return _node(pred.tape, (diff ** 2).mean(), (pred,), lambda g: (g * 2.0 * diff / n,))


def cross_entropy(logits: Var, labels) -> Var:
    """Mean softmax cross-entropy of integer ``labels`` against ``(B, C)`` logits."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.value - logits.value.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(labels.size)
    p = np.exp(logp)

    def vjp(g):
        grad = p.copy()
        grad[rows, labels] -= 1.0
        return (g * grad / labels.size,)

    return _node(logits.tape, -logp[rows, labels].mean(), (logits,), vjp)


# ---------------------------------------------------------------------------
# Parameters, optimizer, checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Parameter:
    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self):
        self.value = np.array(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)


class ParameterStore:
    """Named trainable arrays with gradient and Adam moment slots."""

    def __init__(self):
        self.params: dict[str, Parameter] = {}
        self.step_count = 0

    def add(self, name: str, value) -> Parameter:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        p = Parameter(name, value)
        self.params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self):
        return iter(self.params.values())

    def __len__(self):
        return len(self.params)

    def bind(self, tape: Tape) -> dict[str, Var]:
        return {name: tape.param(p) for name, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad[...] = 0.0

    def count(self) -> int:
        return int(np.sum([p.value.size for p in self.params.values()], dtype=np.int64))

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.value.copy() for k, p in self.params.items()}

    def save(self, path):
        payload = {
            "version": CHECKPOINT_VERSION,
            "params": {
                name: {
                    "shape": list(p.value.shape),
                    "data": base64.b64encode(p.value.astype("<f8").tobytes()).decode("ascii"),
                }
                for name, p in self.params.items()
            },
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path) -> "ParameterStore":
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
        store = cls()
        for name, rec in payload["params"].items():
            raw = np.frombuffer(base64.b64decode(rec["data"]), dtype="<f8")
            store.add(name, raw.reshape(rec["shape"]))
        return store


def adam_step(store: ParameterStore, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps_hat: float = 1e-8) -> ParameterStore:
    """One bias-corrected Adam update of every parameter, in place."""
    store.step_count += 1
    t = store.step_count
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p in store.params.values():
        p.m = beta1 * p.m + (1.0 - beta1) * p.grad
        p.v = beta2 * p.v + (1.0 - beta2) * p.grad ** 2
        p.value -= lr * (p.m / c1) / (np.sqrt(p.v / c2) + eps_hat)
    return store


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

def value_and_grad(f: Callable[[Var], Var], x) -> tuple[float, np.ndarray]:
    tape = Tape()
    xv = tape.var(np.array(x, dtype=np.float64), requires_grad=True)
    out = f(xv)
    if out.value.size != 1:
        raise ShapeError("value_and_grad needs a scalar-valued function")
    tape.backward(out)
    grad = xv.grad if xv.grad is not None else np.zeros_like(xv.value)
    return float(out.value), grad


def numeric_grad(f: Callable[[Var], Var], x, eps: float = 1e-5) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + eps
        fp = float(f(Tape().var(x)).value)
        x[idx] = old - eps
        fm = float(f(Tape().var(x)).value)
        x[idx] = old
        g[idx] = (fp - fm) / (2.0 * eps)
    return g


def grad_check(f: Callable[[Var], Var], x, eps: float = 1e-5) -> float:
    """Max over coordinates of ``|numeric - tape| / (|tape| + 1e-8)`` (central differences)."""
    _, g = value_and_grad(f, x)
    num = numeric_grad(f, x, eps)
    return float(np.max(np.abs(num - g) / (np.abs(g) + 1e-8), initial=0.0))

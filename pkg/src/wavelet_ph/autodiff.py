"""A small reverse-mode automatic differentiation engine on numpy arrays.

Only the primitives needed by the classifier are provided. Every op returns a
new :class:`Tensor` that remembers its parents and a closure mapping the
output cotangent to one cotangent per parent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


_KINKS: list | None = None


class record_kinks:
    """Context manager collecting the branch pattern of every piecewise op.

    Two evaluations with equal patterns lie on the same smooth piece, which is
    what a central finite-difference stencil needs.
    """

    def __enter__(self):
        global _KINKS
        self._saved = _KINKS
        _KINKS = []
        return _KINKS

    def __exit__(self, *exc):
        global _KINKS
        _KINKS = self._saved
        return False


def note_kink(key) -> None:
    if _KINKS is not None:
        _KINKS.append(key)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, parents=(), vjp=None):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = tuple(parents)
        self._vjp = vjp

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def backward(self, seed=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf requiring it."""
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        cot = {id(self): np.ones_like(self.data) if seed is None else np.asarray(seed, dtype=float)}
        for node in reversed(order):
            g = cot.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for p, gp in zip(node._parents, node._vjp(g)):
                if gp is None or not p.requires_grad:
                    continue
                cot[id(p)] = gp if id(p) not in cot else cot[id(p)] + gp

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def constant(data) -> Tensor:
    return Tensor(data)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """``x @ w.T + b`` for ``x`` of shape (B, in)."""

    def vjp(g):
        return g @ w.data, g.T @ x.data, g.sum(axis=0)

    return Tensor(x.data @ w.data.T + b.data, parents=(x, w, b), vjp=vjp)


def conv2d(x: Tensor, w: Tensor, b: Tensor, padding: int = 1) -> Tensor:
    """Stride-1 cross-correlation; ``x`` (B,C,H,W), ``w`` (O,C,k,k).

    Computed as a sum over kernel offsets, which is cheap for tiny kernels.
    """
    k = w.data.shape[-1]
    p = padding
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p)))
    ho, wo = xp.shape[2] - k + 1, xp.shape[3] - k + 1
    # channel-first copy of the padded input: (C, B, H, W)
    xc = np.ascontiguousarray(xp.transpose(1, 0, 2, 3))
    acc = 0.0
    for i in range(k):
        for j in range(k):
            acc = acc + np.tensordot(w.data[:, :, i, j], xc[:, :, i : i + ho, j : j + wo], axes=1)
    out = (acc + b.data[:, None, None, None]).transpose(1, 0, 2, 3)

    def vjp(g):
        gc = np.ascontiguousarray(g.transpose(1, 0, 2, 3))  # (O, B, Ho, Wo)
        gw = np.empty_like(w.data)
        for i in range(k):
            for j in range(k):
                gw[:, :, i, j] = np.tensordot(gc, xc[:, :, i : i + ho, j : j + wo], axes=([1, 2, 3], [1, 2, 3]))
        gb = gc.sum(axis=(1, 2, 3))
        if not x.requires_grad:
            return None, gw, gb
        gxc = np.zeros_like(xc)
        for i in range(k):
            for j in range(k):
                gxc[:, :, i : i + ho, j : j + wo] += np.tensordot(w.data[:, :, i, j], gc, axes=([0], [0]))
        gx = gxc.transpose(1, 0, 2, 3)[:, :, p : xp.shape[2] - p, p : xp.shape[3] - p]
        return gx, gw, gb

    return Tensor(out, parents=(x, w, b), vjp=vjp)


@dataclass
class BatchNormState:
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def fresh(cls, channels: int):
        return cls(np.zeros(channels), np.ones(channels))


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState, train: bool) -> Tensor:
    """Normalise over every axis except 1 (channels / features)."""
    axes = tuple(i for i in range(x.data.ndim) if i != 1)
    shape = [1] * x.data.ndim
    shape[1] = -1
    gam = gamma.data.reshape(shape)
    if train:
        n = x.data.size // x.data.shape[1]
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        unbiased = var * n / (n - 1) if n > 1 else var
        state.running_mean = (1 - state.momentum) * state.running_mean + state.momentum * mean
        state.running_var = (1 - state.momentum) * state.running_var + state.momentum * unbiased
    else:
        mean, var = state.running_mean, state.running_var
    inv = 1.0 / np.sqrt(var + state.eps)
    xhat = (x.data - mean.reshape(shape)) * inv.reshape(shape)
    out = gam * xhat + beta.data.reshape(shape)

    def vjp(g):
        ggam = np.sum(g * xhat, axis=axes)
        gbeta = np.sum(g, axis=axes)
        dxhat = g * gam
        if train:
            m = x.data.size // x.data.shape[1]
            s1 = dxhat.sum(axis=axes, keepdims=True)
            s2 = (dxhat * xhat).sum(axis=axes, keepdims=True)
            gx = inv.reshape(shape) / m * (m * dxhat - s1 - xhat * s2)
        else:
            gx = dxhat * inv.reshape(shape)
        return gx, ggam, gbeta

    return Tensor(out, parents=(x, gamma, beta), vjp=vjp)


def dropout_mask(shape, p: float, rng: np.random.Generator) -> np.ndarray:
    keep = rng.random(shape) >= p
    return keep / (1.0 - p)


def mul_mask(x: Tensor, mask: np.ndarray) -> Tensor:
    return Tensor(x.data * mask, parents=(x,), vjp=lambda g: (g * mask,))


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    note_kink(np.packbits(pos).tobytes())
    return Tensor(np.where(pos, x.data, 0.0), parents=(x,), vjp=lambda g: (g * pos,))


def reshape(x: Tensor, shape) -> Tensor:
    old = x.data.shape
    return Tensor(x.data.reshape(shape), parents=(x,), vjp=lambda g: (g.reshape(old),))


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (x.data.shape[0], -1))


def concat(xs: list, axis: int = 1) -> Tensor:
    sizes = [t.data.shape[axis] for t in xs]
    cuts = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor(np.concatenate([t.data for t in xs], axis=axis), parents=tuple(xs), vjp=vjp)


def bce_with_logits(logits: Tensor, labels) -> Tensor:
    """Mean of ``log(1 + exp(-(2y-1) z))`` in an overflow-free form."""
    z = logits.data.reshape(-1)
    y = np.asarray(labels, dtype=float).reshape(-1)
    loss = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    sig = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    shape = logits.data.shape

    def vjp(g):
        return ((sig - y) * (g / len(z))).reshape(shape),

    return Tensor(loss.mean(), parents=(logits,), vjp=vjp)


def external(data, parents, vjp) -> Tensor:
    """Wrap a value computed outside the engine together with its VJP."""
    return Tensor(data, parents=tuple(parents), vjp=vjp)


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict):
        self.step_count += 1
        t = self.step_count
        for name, p in params.items():
            if p.grad is None:
                continue
            g = p.grad
            m = self.m.get(name, np.zeros_like(p.data))
            v = self.v.get(name, np.zeros_like(p.data))
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            mhat = m / (1 - self.beta1**t)
            vhat = v / (1 - self.beta2**t)
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class SGD:
    lr: float = 1e-2

    def step(self, params: dict):
        for p in params.values():
            if p.grad is not None:
                p.data = p.data - self.lr * p.grad

"""Dense float64 tensors with reverse-mode gradients.

Everything runs on numpy arrays in float64. A :class:`Var` wraps an array and
remembers how it was produced; calling :meth:`Var.backward` on a scalar walks
the tape and accumulates gradients into every ``requires_grad`` leaf. Ops whose
inputs are all constant build no tape, so frozen parts of a model run at plain
numpy speed.

GELU uses the exact erf form (not the tanh approximation) so closed-form oracle
comparisons in the tests are deterministic. Every backward rule here is checked
against central finite differences in the test suite.
"""
from __future__ import annotations

import numpy as np
from scipy.special import erf

_CHECKED = False

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def set_checked(flag: bool) -> None:
    """Toggle checked mode: reject non-finite values and degenerate norms."""
    global _CHECKED
    _CHECKED = bool(flag)


def checked() -> bool:
    return _CHECKED


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient ``g`` down to ``shape`` (undo numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Var:
    """A float64 array plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        if _CHECKED and not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite values rejected in checked mode")
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Var":
        return Var(self.data)

    def __repr__(self):
        return f"Var(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph walk ---------------------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into all requires_grad leaves."""
        if self.data.size != 1:
            raise ValueError("backward requires a scalar output")
        topo: list[Var] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Var) else -np.asarray(other))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        if isinstance(other, Var):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _accum(var: Var, g: np.ndarray) -> None:
    if not var.requires_grad:
        return
    if var.grad is None:
        var.grad = np.zeros_like(var.data)
    var.grad += g


def _make(data, parents, backward) -> Var:
    if any(p.requires_grad for p in parents):
        return Var(data, True, tuple(parents), backward)
    return Var(data)


# -- elementwise ------------------------------------------------------------

def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = _make(a.data + b.data, (a, b), None)

    def back(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    out._backward = back
    return out


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = _make(a.data * b.data, (a, b), None)

    def back(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    out._backward = back
    return out


def power(a, p) -> Var:
    a = as_var(a)
    p = float(p)
    out = _make(a.data ** p, (a,), None)

    def back(g):
        _accum(a, g * p * a.data ** (p - 1.0))

    out._backward = back
    return out


def exp(a) -> Var:
    a = as_var(a)
    e = np.exp(a.data)
    out = _make(e, (a,), None)
    out._backward = lambda g: _accum(a, g * e)
    return out


def log(a) -> Var:
    a = as_var(a)
    out = _make(np.log(a.data), (a,), None)
    out._backward = lambda g: _accum(a, g / a.data)
    return out


def tanh(a) -> Var:
    a = as_var(a)
    t = np.tanh(a.data)
    out = _make(t, (a,), None)
    out._backward = lambda g: _accum(a, g * (1.0 - t * t))
    return out


def sigmoid(a) -> Var:
    a = as_var(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = _make(s, (a,), None)
    out._backward = lambda g: _accum(a, g * s * (1.0 - s))
    return out


def gelu(a) -> Var:
    """Exact-erf GELU: x * Phi(x) with Phi the standard normal CDF."""
    a = as_var(a)
    phi = 0.5 * (1.0 + erf(a.data / _SQRT_2))
    out = _make(a.data * phi, (a,), None)

    def back(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * a.data * a.data)
        _accum(a, g * (phi + a.data * pdf))

    out._backward = back
    return out


# -- shape ops --------------------------------------------------------------

def reshape(a, shape) -> Var:
    a = as_var(a)
    out = _make(a.data.reshape(shape), (a,), None)
    out._backward = lambda g: _accum(a, g.reshape(a.data.shape))
    return out


def swapaxes(a, ax1, ax2) -> Var:
    a = as_var(a)
    out = _make(np.swapaxes(a.data, ax1, ax2), (a,), None)
    out._backward = lambda g: _accum(a, np.swapaxes(g, ax1, ax2))
    return out


def concat(parts, axis=0) -> Var:
    parts = [as_var(p) for p in parts]
    out = _make(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), None)
    sizes = [p.data.shape[axis] for p in parts]

    def back(g):
        offs = np.cumsum([0] + sizes)
        for p, lo, hi in zip(parts, offs[:-1], offs[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(p, g[tuple(sl)])

    out._backward = back
    return out


def take(a, idx) -> Var:
    """Indexing/gather; the backward pass scatter-adds into the source."""
    a = as_var(a)
    out = _make(a.data[idx], (a,), None)

    def back(g):
        if not a.requires_grad:
            return
        g0 = np.zeros_like(a.data)
        np.add.at(g0, idx, g)
        _accum(a, g0)

    out._backward = back
    return out


# -- reductions and linear algebra ------------------------------------------

def reduce_sum(a, axis=None, keepdims=False) -> Var:
    a = as_var(a)
    out = _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), None)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    out._backward = back
    return out


def reduce_mean(a, axis=None, keepdims=False) -> Var:
    a = as_var(a)
    n = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    return mul(reduce_sum(a, axis, keepdims), 1.0 / float(n))


def matmul(a, b) -> Var:
    """Batched matrix product; both operands must have ndim >= 2."""
    a, b = as_var(a), as_var(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul expects operands with ndim >= 2")
    out = _make(a.data @ b.data, (a, b), None)

    def back(g):
        _accum(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        _accum(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    out._backward = back
    return out


def softmax(a, axis=-1) -> Var:
    a = as_var(a)
    m = a.data.max(axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    s = e / e.sum(axis=axis, keepdims=True)
    out = _make(s, (a,), None)

    def back(g):
        _accum(a, s * (g - (g * s).sum(axis=axis, keepdims=True)))

    out._backward = back
    return out


def logsumexp(a, axis=-1) -> Var:
    """Stable log-sum-exp along ``axis`` (composite, fully differentiable)."""
    a = as_var(a)
    m = a.data.max(axis=axis, keepdims=True)  # constant shift
    return add(log(reduce_sum(exp(add(a, -m)), axis=axis)),
               np.squeeze(m, axis=axis))


def dropout(a, rate: float, rng: np.random.Generator) -> Var:
    """Inverted dropout; the caller decides whether training is active."""
    a = as_var(a)
    if rate <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    return mul(a, keep)


# -- conv -------------------------------------------------------------------

def conv2d(x, w, b, stride: int = 1, pad: int = 0) -> Var:
    """2D convolution, NHWC input, (kh, kw, cin, cout) weight."""
    x, w, b = as_var(x), as_var(w), as_var(b)
    kh, kw, cin, cout = w.shape
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad), (0, 0))) if pad else x.data
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    win = win[:, ::stride, ::stride]  # (N, OH, OW, C, kh, kw)
    out_data = np.einsum("nhwcij,ijco->nhwo", win, w.data, optimize=True) + b.data
    out = _make(out_data, (x, w, b), None)

    def back(g):
        if w.requires_grad:
            _accum(w, np.einsum("nhwcij,nhwo->ijco", win, g, optimize=True))
        if b.requires_grad:
            _accum(b, g.sum(axis=(0, 1, 2)))
        if x.requires_grad:
            n, oh, ow, _ = g.shape
            gx = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gx[:, i:i + stride * oh:stride, j:j + stride * ow:stride] += \
                        np.tensordot(g, w.data[i, j], axes=([3], [1]))
            if pad:
                gx = gx[:, pad:-pad, pad:-pad]
            _accum(x, gx)

    out._backward = back
    return out


# -- composites -------------------------------------------------------------

def linear(x, w, b=None) -> Var:
    out = matmul(x, w)
    return out if b is None else add(out, b)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Var:
    """Normalize the last axis to mean 0 / variance 1, then scale and shift."""
    x, gain, bias = as_var(x), as_var(gain), as_var(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ValueError(f"layer_norm gain/bias must have shape ({d},)")
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    mu = reduce_mean(x, axis=-1, keepdims=True)
    xc = add(x, mul(mu, -1.0))
    var = reduce_mean(mul(xc, xc), axis=-1, keepdims=True)
    inv = power(add(var, eps), -0.5)
    return add(mul(mul(xc, inv), gain), bias)


def l2_normalize(x, axis=-1) -> Var:
    """Scale rows along ``axis`` to unit L2 norm.

    Zero rows come back as zeros with zero gradient; checked mode raises on
    them instead, since the model never normalizes a zero embedding.
    """
    x = as_var(x)
    n = np.sqrt((x.data * x.data).sum(axis=axis, keepdims=True))
    if np.any(n == 0.0):
        if _CHECKED:
            raise ValueError("l2_normalize on zero vector in checked mode")
        inv = np.where(n == 0.0, 0.0, 1.0 / np.where(n == 0.0, 1.0, n))
    else:
        inv = 1.0 / n
    out_data = x.data * inv
    out = _make(out_data, (x,), None)

    def back(g):
        _accum(x, inv * (g - out_data * (g * out_data).sum(axis=axis, keepdims=True)))

    out._backward = back
    return out


# -- parameter store --------------------------------------------------------

class ParamStore:
    """Named parameters with a trainable mask.

    Frozen parameters have ``requires_grad=False``, so ops that only touch
    them build no tape and they can never receive gradients; the optimizer in
    :mod:`contextvad.training` additionally never writes to them.
    """

    def __init__(self):
        self._vars: dict[str, Var] = {}

    def add(self, name: str, value, trainable: bool = True) -> Var:
        if name in self._vars:
            raise ValueError(f"duplicate parameter {name!r}")
        v = Var(value, requires_grad=trainable)
        self._vars[name] = v
        return v

    def __getitem__(self, name: str) -> Var:
        return self._vars[name]

    def __contains__(self, name: str) -> bool:
        return name in self._vars

    def names(self) -> list[str]:
        return sorted(self._vars)

    def trainable_names(self) -> list[str]:
        return sorted(n for n, v in self._vars.items() if v.requires_grad)

    def set_trainable(self, name: str, flag: bool) -> None:
        v = self._vars[name]
        v.requires_grad = bool(flag)
        if not flag:
            v.grad = None

    def freeze_prefix(self, prefix: str, trainable: bool = False) -> None:
        for n in self._vars:
            if n.startswith(prefix):
                self.set_trainable(n, trainable)

    def zero_grad(self) -> None:
        for v in self._vars.values():
            v.grad = None

    def gradients(self) -> dict[str, np.ndarray]:
        """Gradient map for trainable parameters (frozen names are absent)."""
        return {n: v.grad for n, v in self._vars.items()
                if v.requires_grad and v.grad is not None}

    def snapshot(self) -> dict[str, np.ndarray]:
        return {n: v.data.copy() for n, v in self._vars.items()}

    # Checkpoints are numpy .npz archives: one little-endian float64 array per
    # parameter name, plus a 0/1 array under "__trainable__/<name>" recording
    # the freeze mask. Stable across platforms and runs.
    def save(self, path) -> None:
        payload = {}
        for n, v in self._vars.items():
            payload[n] = v.data
            payload["__trainable__/" + n] = np.array(1.0 if v.requires_grad else 0.0)
        np.savez(path, **payload)

    @classmethod
    def load(cls, path) -> "ParamStore":
        store = cls()
        with np.load(path) as zf:
            names = [k for k in zf.files if not k.startswith("__trainable__/")]
            for n in names:
                store.add(n, zf[n], trainable=bool(zf["__trainable__/" + n]))
        return store

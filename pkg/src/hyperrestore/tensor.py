"""Dense float tensors with reverse-mode automatic differentiation.

The gradient tape is define-by-run: every operation that sees at least one
gradient-tracking input links its output back to its parents together with a
backward rule, and ``Tensor.backward()`` replays those rules in reverse
topological order. The tape is rebuilt on every forward pass.

Conventions:
  * image layout is channels x height x width, with an optional batch
    dimension prepended;
  * image values at module boundaries lie in [0, 1] unless documented
    otherwise;
  * convolution is cross-correlation (no kernel flip), zero padding;
  * storage is float32 by default, reductions accumulate in float64.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np


class ContractViolation(ValueError):
    """Raised when an operation is called outside its documented contract."""


_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    """N-dimensional float array participating in the gradient tape.

    ``data`` is a numpy array (float32 unless another float dtype is
    requested), ``grad`` holds the accumulated gradient of the same shape.
    Tensors are immutable once created except for gradient accumulation and
    explicit in-place parameter updates by an optimizer.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_rule")

    def __init__(self, data, requires_grad: bool = False, dtype=np.float32):
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = bool(requires_grad) and _grad_enabled
        # trainable leaves carry a populated (zero) grad from the start
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self._parents: tuple = ()
        self._backward_rule = None

    # -- graph construction helpers ------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: Sequence["Tensor"], rule) -> "Tensor":
        """Wrap an op result, recording the backward rule if the tape is on."""
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        tracked = _grad_enabled and any(p.requires_grad for p in parents)
        out.requires_grad = tracked
        out._parents = tuple(parents) if tracked else ()
        out._backward_rule = rule if tracked else None
        return out

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    # -- basic properties ----------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), dtype=self.data.dtype)

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return (f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, "
                f"requires_grad={self.requires_grad})")

    # -- arithmetic ------------------------------------------------------

    def _lift(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype), dtype=self.data.dtype)

    def __add__(self, other):
        other = self._lift(other)
        out_data = self.data + other.data

        def rule(out):
            if self.requires_grad:
                self._accum(_unbroadcast(out.grad, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(out.grad, other.data.shape))

        return Tensor._make(out_data, (self, other), rule)

    __radd__ = __add__

    def __neg__(self):
        def rule(out):
            if self.requires_grad:
                self._accum(-out.grad)

        return Tensor._make(-self.data, (self,), rule)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        out_data = self.data * other.data

        def rule(out):
            if self.requires_grad:
                self._accum(_unbroadcast(out.grad * other.data, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(out.grad * self.data, other.data.shape))

        return Tensor._make(out_data, (self, other), rule)

    __rmul__ = __mul__

    # -- backward pass ---------------------------------------------------

    def backward(self) -> None:
        """Populate grads of all trainable leaves reachable from this scalar."""
        if self.data.size != 1:
            raise ContractViolation(
                f"backward() requires a scalar, got shape {self.data.shape}")
        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward_rule is not None:
                node._backward_rule(node)


def _topo_order(root: Tensor) -> list:
    """Iterative topological sort of the tape reachable from ``root``."""
    order: list = []
    seen: set = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if grad.shape[axis] != extent:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise / reduction operations ---------------------------------


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); gradient passes only where x > 0."""
    out_data = np.maximum(x.data, 0)

    def rule(out):
        if x.requires_grad:
            x._accum(out.grad * (x.data > 0))

    return Tensor._make(out_data, (x,), rule)


def tsum(x: Tensor) -> Tensor:
    """Sum of all elements (float64 accumulation)."""
    out_data = np.asarray(x.data.sum(dtype=np.float64), dtype=x.data.dtype)

    def rule(out):
        if x.requires_grad:
            x._accum(np.broadcast_to(out.grad, x.data.shape))

    return Tensor._make(out_data, (x,), rule)


def tmean(x: Tensor) -> Tensor:
    """Mean of all elements (float64 accumulation)."""
    n = x.data.size
    out_data = np.asarray(x.data.sum(dtype=np.float64) / n, dtype=x.data.dtype)

    def rule(out):
        if x.requires_grad:
            x._accum(np.broadcast_to(out.grad / n, x.data.shape))

    return Tensor._make(out_data, (x,), rule)


def l1_loss(prediction: Tensor, target: Tensor) -> Tensor:
    """Mean absolute difference; subgradient 0 at ties."""
    if prediction.data.shape != target.data.shape:
        raise ContractViolation(
            f"l1_loss shape mismatch: prediction {prediction.data.shape} "
            f"vs target {target.data.shape}")
    diff = prediction.data - target.data
    n = diff.size
    out_data = np.asarray(np.abs(diff).sum(dtype=np.float64) / n,
                          dtype=prediction.data.dtype)

    def rule(out):
        g = out.grad * np.sign(diff) / n
        if prediction.requires_grad:
            prediction._accum(g.astype(prediction.data.dtype))
        if target.requires_grad:
            target._accum(-g.astype(target.data.dtype))

    return Tensor._make(out_data, (prediction, target), rule)


def reshape(x: Tensor, shape) -> Tensor:
    out_data = x.data.reshape(shape)

    def rule(out):
        if x.requires_grad:
            x._accum(out.grad.reshape(x.data.shape))

    return Tensor._make(out_data, (x,), rule)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product a @ b."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ContractViolation(
            f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def rule(out):
        if a.requires_grad:
            a._accum(out.grad @ b.data.T)
        if b.requires_grad:
            b._accum(a.data.T @ out.grad)

    return Tensor._make(out_data, (a, b), rule)


# -- convolution ---------------------------------------------------------


def _im2col(xpad: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    n, c, _, _ = xpad.shape
    cols = np.empty((n, c, k, k, ho, wo), dtype=xpad.dtype)
    for ky in range(k):
        for kx in range(k):
            cols[:, :, ky, kx] = xpad[:, :, ky:ky + stride * ho:stride,
                                      kx:kx + stride * wo:stride]
    return cols.reshape(n, c * k * k, ho * wo)


def _col2im(dcols: np.ndarray, xpad_shape, k: int, stride: int,
            ho: int, wo: int) -> np.ndarray:
    n, c, hp, wp = xpad_shape
    dxpad = np.zeros(xpad_shape, dtype=dcols.dtype)
    dcols = dcols.reshape(n, c, k, k, ho, wo)
    for ky in range(k):
        for kx in range(k):
            dxpad[:, :, ky:ky + stride * ho:stride,
                  kx:kx + stride * wo:stride] += dcols[:, :, ky, kx]
    return dxpad


def conv2d(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation with zero padding.

    ``x`` is (Cin, H, W) or (N, Cin, H, W); ``kernel`` is (Cout, Cin, K, K)
    with K odd; ``bias`` is (Cout,) if given. Output height is
    floor((H + 2*padding - K) / stride) + 1, same for width.
    """
    single = x.data.ndim == 3
    xd = x.data[None] if single else x.data
    if xd.ndim != 4:
        raise ContractViolation(f"conv2d input must be 3-D or 4-D, got {x.data.shape}")
    if kernel.data.ndim != 4 or kernel.data.shape[2] != kernel.data.shape[3]:
        raise ContractViolation(f"conv2d kernel must be (Cout,Cin,K,K), got {kernel.data.shape}")
    n, cin, h, w = xd.shape
    cout, ck, k, _ = kernel.data.shape
    if ck != cin:
        raise ContractViolation(
            f"conv2d channel mismatch: input {x.data.shape} has {cin} channels, "
            f"kernel {kernel.data.shape} expects {ck}")
    if k % 2 != 1:
        raise ContractViolation(f"conv2d kernel size must be odd, got {k}")
    if stride < 1:
        raise ContractViolation(f"conv2d stride must be positive, got {stride}")
    if padding < 0:
        raise ContractViolation(f"conv2d padding must be non-negative, got {padding}")
    if h + 2 * padding < k or w + 2 * padding < k:
        raise ContractViolation(
            f"conv2d input {h}x{w} with padding {padding} is smaller than kernel {k}x{k}")
    if bias is not None and bias.data.shape != (cout,):
        raise ContractViolation(
            f"conv2d bias must have shape ({cout},), got {bias.data.shape}")

    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1
    xpad = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _im2col(xpad, k, stride, ho, wo)           # (N, Cin*K*K, Ho*Wo)
    w2 = kernel.data.reshape(cout, cin * k * k)
    out_data = np.matmul(w2, cols).reshape(n, cout, ho, wo)
    if bias is not None:
        out_data = out_data + bias.data[:, None, None]
    if single:
        out_data = out_data[0]

    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def rule(out):
        g = out.grad[None] if single else out.grad
        g2 = g.reshape(n, cout, ho * wo)
        if kernel.requires_grad:
            dw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0)
            kernel._accum(dw.reshape(kernel.data.shape))
        if bias is not None and bias.requires_grad:
            bias._accum(g2.sum(axis=(0, 2)))
        if x.requires_grad:
            dcols = np.matmul(w2.T, g2)
            dxpad = _col2im(dcols, xpad.shape, k, stride, ho, wo)
            dx = dxpad[:, :, padding:padding + h, padding:padding + w]
            x._accum(dx[0] if single else dx)

    return Tensor._make(out_data, parents, rule)


# -- pixel shuffle -------------------------------------------------------


def _shuffle_data(xd: np.ndarray, r: int) -> np.ndarray:
    lead = xd.shape[:-3]
    crr, h, w = xd.shape[-3:]
    c = crr // (r * r)
    y = xd.reshape(*lead, c, r, r, h, w)
    # (..., c, dy, dx, h, w) -> (..., c, h, dy, w, dx)
    y = np.moveaxis(y, (-4, -3), (-3, -1))
    return np.ascontiguousarray(y.reshape(*lead, c, h * r, w * r))


def _unshuffle_data(xd: np.ndarray, r: int) -> np.ndarray:
    lead = xd.shape[:-3]
    c, hr, wr = xd.shape[-3:]
    h, w = hr // r, wr // r
    y = xd.reshape(*lead, c, h, r, w, r)
    # (..., c, h, dy, w, dx) -> (..., c, dy, dx, h, w)
    y = np.moveaxis(y, (-3, -1), (-4, -3))
    return np.ascontiguousarray(y.reshape(*lead, c * r * r, h, w))


def pixelshuffle(x: Tensor, r: int) -> Tensor:
    """Depth-to-space: (C*r^2, H, W) -> (C, r*H, r*W).

    output[c, r*h + dy, r*w + dx] = input[c*r^2 + dy*r + dx, h, w].
    Pure rearrangement; the multiset of values is preserved.
    """
    if r < 1:
        raise ContractViolation(f"pixelshuffle factor must be positive, got {r}")
    channels = x.data.shape[-3]
    if channels % (r * r) != 0:
        raise ContractViolation(
            f"pixelshuffle needs channels divisible by r^2={r * r}, got {channels}")
    out_data = _shuffle_data(x.data, r)

    def rule(out):
        if x.requires_grad:
            x._accum(_unshuffle_data(out.grad, r))

    return Tensor._make(out_data, (x,), rule)


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Space-to-depth, exact inverse of :func:`pixelshuffle`."""
    if r < 1:
        raise ContractViolation(f"pixel_unshuffle factor must be positive, got {r}")
    h, w = x.data.shape[-2:]
    if h % r != 0 or w % r != 0:
        raise ContractViolation(
            f"pixel_unshuffle needs H, W divisible by {r}, got {h}x{w}")
    out_data = _unshuffle_data(x.data, r)

    def rule(out):
        if x.requires_grad:
            x._accum(_shuffle_data(out.grad, r))

    return Tensor._make(out_data, (x,), rule)


# -- array helpers -------------------------------------------------------


def clip01(a: np.ndarray) -> np.ndarray:
    """Clamp an array to the [0, 1] image range (used only at image boundaries)."""
    return np.clip(a, 0.0, 1.0)


def uniform_init(rng: np.random.Generator, shape, fan_in: int,
                 scale: float = 1.0, dtype=np.float32) -> np.ndarray:
    """Fan-in uniform init: U(-scale/sqrt(fan_in), +scale/sqrt(fan_in))."""
    bound = scale / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)

"""Dense float tensors with reverse-mode autodiff on a dynamic tape.

numpy arrays hold the data; every differentiable op records a closure that
scatters upstream gradients back to its inputs.  float32 is the working
precision for training and inference, float64 exists for gradient checking.
Ops are pure functions over immutable inputs; in the default deterministic
mode every reduction runs in a fixed order, so equal seeds give bitwise
equal results.  An opt-in parallel mode splits large convolutions over a
thread pool (disjoint output blocks, so results stay within float rounding
of the deterministic mode).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

_grad_enabled = True
_workers: ThreadPoolExecutor | None = None


def grad_enabled() -> bool:
    return _grad_enabled


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def set_parallel(num_workers: int = 0) -> None:
    """Enable the opt-in parallel mode with `num_workers` threads (0 = off)."""
    global _workers
    if _workers is not None:
        _workers.shutdown(wait=True)
        _workers = None
    if num_workers > 0:
        _workers = ThreadPoolExecutor(max_workers=num_workers)


class Tensor:
    """A dense nd-array with an optional gradient buffer.

    `data` is row-major contiguous float32 or float64.  `grad` has the same
    shape as `data` once backward() has touched this node.  Tensors created
    by ops inherit requires_grad from their inputs unless recording is off.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    # -- bookkeeping ------------------------------------------------------

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

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def check_finite(self, name: str = "tensor") -> "Tensor":
        if not np.isfinite(self.data).all():
            raise FloatingPointError(f"non-finite values in {name}")
        return self

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    def __len__(self):
        return len(self.data)

    # -- autodiff ---------------------------------------------------------

    def backward(self) -> None:
        backward(self)

    # -- operators ----------------------------------------------------------

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
        return mul(self, -1.0)

    def __pow__(self, e):
        return pow_scalar(self, e)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    # -- method sugar -------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes if axes else None)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)

    def abs(self):
        return tabs(self)


def _wrap(other, like: Tensor):
    if isinstance(other, Tensor):
        return other
    return Tensor(np.asarray(other, dtype=like.dtype))


def _make(data, parents, backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def backward(loss: Tensor) -> None:
    """Run reverse-mode accumulation from a scalar loss.

    Every tensor on the tape that requires grad receives its accumulated
    gradient in `.grad`; leaves off the path keep whatever `.grad` they had
    (trainers zero parameter grads first, so untouched ones stay zero).
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not np.isfinite(loss.data).all():
        raise FloatingPointError("backward called on a non-finite loss")
    if not loss.requires_grad:
        return

    # iterative topological order (graphs can be thousands of ops deep)
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    for node in topo:
        if node.grad is None:
            node.grad = np.zeros_like(node.data)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)
            node._backward = None
            node._parents = ()


def _accum(t: Tensor, g):
    if t.requires_grad:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    if not isinstance(a, Tensor):
        a = _wrap(a, b)
    b = _wrap(b, a)
    out_data = a.data + b.data

    def bw(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), bw)


def sub(a, b) -> Tensor:
    if not isinstance(a, Tensor):
        a = _wrap(a, b)
    b = _wrap(b, a)
    out_data = a.data - b.data

    def bw(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _make(out_data, (a, b), bw)


def mul(a, b) -> Tensor:
    if not isinstance(a, Tensor):
        a = _wrap(a, b)
    if not isinstance(b, Tensor):
        s = float(b)
        out_data = a.data * s

        def bw_s(g):
            _accum(a, g * s)

        return _make(out_data, (a,), bw_s)
    out_data = a.data * b.data

    def bw(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), bw)


def div(a, b) -> Tensor:
    if not isinstance(a, Tensor):
        a = _wrap(a, b)
    if not isinstance(b, Tensor):
        return mul(a, 1.0 / float(b))
    out_data = a.data / b.data

    def bw(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * out_data / b.data, b.data.shape))

    return _make(out_data, (a, b), bw)


def pow_scalar(a: Tensor, e: float) -> Tensor:
    out_data = a.data**e

    def bw(g):
        _accum(a, g * e * a.data ** (e - 1))

    return _make(out_data, (a,), bw)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def bw(g):
        _accum(a, g * out_data)

    return _make(out_data, (a,), bw)


def log(a: Tensor) -> Tensor:
    if (a.data <= 0).any():
        raise FloatingPointError("log of non-positive value")
    out_data = np.log(a.data)

    def bw(g):
        _accum(a, g / a.data)

    return _make(out_data, (a,), bw)


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def bw(g):
        _accum(a, g * 0.5 / np.maximum(out_data, np.finfo(out_data.dtype).tiny))

    return _make(out_data, (a,), bw)


def tabs(a: Tensor) -> Tensor:
    out_data = np.abs(a.data)

    def bw(g):
        _accum(a, g * np.sign(a.data))

    return _make(out_data, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bw(g):
        _accum(a, g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    """Numerically stable logistic function."""
    x = a.data
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)

    def bw(g):
        _accum(a, g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), bw)


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0)

    def bw(g):
        _accum(a, g * (out_data > 0))

    return _make(out_data, (a,), bw)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes through the closed interval."""
    out_data = np.clip(a.data, lo, hi)

    def bw(g):
        _accum(a, g * ((a.data >= lo) & (a.data <= hi)))

    return _make(out_data, (a,), bw)


def clamp_min(a: Tensor, lo: float) -> Tensor:
    out_data = np.maximum(a.data, lo)

    def bw(g):
        _accum(a, g * (a.data >= lo))

    return _make(out_data, (a,), bw)


# ---------------------------------------------------------------------------
# reductions and shape ops
# ---------------------------------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims)
    out_data = np.asarray(out_data, dtype=a.dtype)

    def bw(g):
        gg = np.asarray(g)
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            gg = np.expand_dims(gg, axes)
        _accum(a, np.broadcast_to(gg, a.data.shape))

    return _make(out_data, (a,), bw)


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        n = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = 1
        for ax in axes:
            n *= a.data.shape[ax]
    return mul(tsum(a, axis, keepdims), 1.0 / n)


def reshape(a: Tensor, shape) -> Tensor:
    out_data = a.data.reshape(shape)

    def bw(g):
        _accum(a, g.reshape(a.data.shape))

    return _make(out_data, (a,), bw)


def transpose(a: Tensor, axes=None) -> Tensor:
    out_data = a.data.transpose(axes)

    def bw(g):
        if axes is None:
            _accum(a, g.transpose())
        else:
            inv = np.argsort(axes)
            _accum(a, g.transpose(inv))

    return _make(out_data, (a,), bw)


def getitem(a: Tensor, key) -> Tensor:
    out_data = a.data[key]
    if np.isscalar(out_data) or out_data.ndim == 0:
        out_data = np.asarray(out_data, dtype=a.dtype)

    def bw(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[key] += g

    return _make(out_data, (a,), bw)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return _make(out_data, tuple(tensors), bw)


def gather_rows(a: Tensor, indices) -> Tensor:
    """Select rows of a 2-D (or 1-D) tensor by an integer index vector."""
    idx = np.asarray(indices, dtype=np.int64)
    n = a.data.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        bad = idx[(idx < 0) | (idx >= n)][0]
        raise IndexError(f"gather_rows index {bad} out of range for {n} rows")
    out_data = a.data[idx]

    def bw(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, idx, g)

    return _make(out_data, (a,), bw)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product with numpy broadcasting on leading dims."""
    out_data = np.matmul(a.data, b.data)

    def bw(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            _accum(a, _unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            _accum(b, _unbroadcast(gb, b.data.shape))

    return _make(out_data, (a, b), bw)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the last dimension: y = x @ weight.T + bias."""
    if x.data.shape[-1] != weight.data.shape[1]:
        raise ValueError(
            f"linear: input last dim {x.data.shape[-1]} != weight in dim {weight.data.shape[1]}"
        )
    out_data = np.matmul(x.data, weight.data.T)
    if bias is not None:
        out_data = out_data + bias.data

    def bw(g):
        if x.requires_grad:
            _accum(x, np.matmul(g, weight.data))
        if weight.requires_grad:
            g2 = g.reshape(-1, g.shape[-1])
            x2 = x.data.reshape(-1, x.data.shape[-1])
            _accum(weight, g2.T @ x2)
        if bias is not None and bias.requires_grad:
            _accum(bias, g.reshape(-1, g.shape[-1]).sum(axis=0))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out_data, parents, bw)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-stabilized softmax along one axis; rows sum to one."""
    if not np.isfinite(x.data).all():
        raise FloatingPointError("softmax input contains non-finite values")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        _accum(x, out_data * (g - dot))

    return _make(out_data, (x,), bw)


def l2_normalize(x: Tensor, axis: int = -1, eps: float = 1e-8) -> Tensor:
    """Scale slices along `axis` to unit L2 norm (1/eps scaling below eps)."""
    if eps <= 0:
        raise ValueError("l2_normalize eps must be positive")
    n = np.sqrt((x.data * x.data).sum(axis=axis, keepdims=True))
    d = np.maximum(n, eps)
    out_data = x.data / d

    def bw(g):
        clamped = n < eps
        gx = g / d
        # unit-norm branch also removes the radial component
        proj = (g * out_data).sum(axis=axis, keepdims=True)
        gx_full = (g - out_data * proj) / d
        _accum(x, np.where(clamped, gx, gx_full))

    return _make(out_data, (x,), bw)


# ---------------------------------------------------------------------------
# convolution / normalization / resampling
# ---------------------------------------------------------------------------


def _conv_shape_check(x, w, stride, padding, groups):
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"conv2d expects NCHW input and OIHW weight, got {x.shape} and {w.shape}")
    n, c, h, wd = x.shape
    o, ig, kh, kw = w.shape
    if c % groups or o % groups:
        raise ValueError(f"conv2d: channels in={c} out={o} not divisible by groups={groups}")
    if ig != c // groups:
        raise ValueError(f"conv2d: weight expects {ig} input channels per group, input has {c // groups}")
    if h + 2 * padding < kh or wd + 2 * padding < kw:
        raise ValueError(
            f"conv2d: padded spatial dims ({h + 2 * padding}, {wd + 2 * padding}) smaller than kernel ({kh}, {kw})"
        )


def _im2col(xp, kh, kw, stride, oh, ow):
    n, c = xp.shape[:2]
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    return cols


def _conv2d_dense_fwd(xp, w, stride, oh, ow):
    cols = _im2col(xp, w.shape[2], w.shape[3], stride, oh, ow)
    y = np.tensordot(cols, w, axes=((1, 2, 3), (1, 2, 3)))  # (N, OH, OW, O)
    return np.ascontiguousarray(np.moveaxis(y, 3, 1))


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """2-D cross-correlation over NCHW input with OIHW weights.

    groups == in-channels gives a depthwise convolution.  The input (not the
    im2col buffer) is kept for backward; patches are re-extracted there.
    """
    _conv_shape_check(x.data, weight.data, stride, padding, groups)
    n, c, h, wd = x.data.shape
    o, _, kh, kw = weight.data.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    oh = (xp.shape[2] - kh) // stride + 1
    ow = (xp.shape[3] - kw) // stride + 1

    depthwise = groups == c and o == c
    if depthwise:
        out_data = np.zeros((n, o, oh, ow), dtype=x.dtype)
        wd_ = weight.data
        for i in range(kh):
            for j in range(kw):
                out_data += xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] * wd_[:, 0, i, j][None, :, None, None]
    elif groups == 1:
        if _workers is not None and n > 1:
            parts = list(_workers.map(lambda xi: _conv2d_dense_fwd(xi[None], weight.data, stride, oh, ow), xp))
            out_data = np.concatenate(parts, axis=0)
        else:
            out_data = _conv2d_dense_fwd(xp, weight.data, stride, oh, ow)
    else:
        cg, og = c // groups, o // groups
        out_data = np.empty((n, o, oh, ow), dtype=x.dtype)
        for gi in range(groups):
            out_data[:, gi * og : (gi + 1) * og] = _conv2d_dense_fwd(
                xp[:, gi * cg : (gi + 1) * cg], weight.data[gi * og : (gi + 1) * og], stride, oh, ow
            )
    if bias is not None:
        out_data += bias.data[None, :, None, None]

    def bw(g):
        gxp = np.zeros_like(xp) if x.requires_grad else None
        gw = np.zeros_like(weight.data) if weight.requires_grad else None
        if depthwise:
            for i in range(kh):
                for j in range(kw):
                    sl = np.s_[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
                    if gw is not None:
                        gw[:, 0, i, j] = (g * xp[sl]).sum(axis=(0, 2, 3))
                    if gxp is not None:
                        gxp[sl] += g * weight.data[:, 0, i, j][None, :, None, None]
        else:
            cg, og = c // groups, o // groups
            for gi in range(groups):
                wsl = slice(gi * og, (gi + 1) * og)
                csl = slice(gi * cg, (gi + 1) * cg)
                cols = _im2col(xp[:, csl], kh, kw, stride, oh, ow)
                gy = g[:, wsl]
                if gw is not None:
                    gw[wsl] = np.tensordot(gy, cols, axes=((0, 2, 3), (0, 4, 5)))
                if gxp is not None:
                    gcols = np.tensordot(gy, weight.data[wsl], axes=((1,), (0,)))  # (N,OH,OW,Cg,kh,kw)
                    gcols = np.moveaxis(gcols, (1, 2), (4, 5))
                    for i in range(kh):
                        for j in range(kw):
                            gxp[:, csl, i : i + stride * oh : stride, j : j + stride * ow : stride] += gcols[:, :, i, j]
        if gxp is not None:
            gx = gxp[:, :, padding : padding + h, padding : padding + wd] if padding else gxp
            _accum(x, gx)
        if gw is not None:
            _accum(weight, gw)
        if bias is not None and bias.requires_grad:
            _accum(bias, g.sum(axis=(0, 2, 3)))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out_data, parents, bw)


def batchnorm2d(
    x: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    gamma: Tensor,
    beta: Tensor,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization over NCHW.

    Training normalizes by biased batch statistics and updates the running
    buffers in place with the unbiased variance; eval uses the buffers.
    """
    n, c, h, w = x.data.shape
    if running_mean.shape != (c,) or gamma.data.shape != (c,):
        raise ValueError(f"batchnorm2d: statistic vectors must have {c} channels")
    if training:
        cnt = n * h * w
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))  # biased
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
        unbiased = var * cnt / max(cnt - 1, 1)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean.astype(running_mean.dtype)
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased.astype(running_var.dtype)
    else:
        inv_std = 1.0 / np.sqrt(running_var.astype(x.dtype) + eps)
        x_hat = (x.data - running_mean.astype(x.dtype)[None, :, None, None]) * inv_std[None, :, None, None]
    out_data = x_hat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]

    def bw(g):
        if gamma.requires_grad:
            _accum(gamma, (g * x_hat).sum(axis=(0, 2, 3)))
        if beta.requires_grad:
            _accum(beta, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gs = g * gamma.data[None, :, None, None]
            if training:
                cnt = n * h * w
                mean_gs = gs.mean(axis=(0, 2, 3), keepdims=True)
                mean_gs_xhat = (gs * x_hat).mean(axis=(0, 2, 3), keepdims=True)
                gx = inv_std[None, :, None, None] * (gs - mean_gs - x_hat * mean_gs_xhat)
            else:
                gx = gs * inv_std[None, :, None, None]
            _accum(x, gx)

    return _make(out_data, (x, gamma, beta), bw)


_UP2_CACHE: dict = {}


def _up2_matrix(n: int, dtype) -> np.ndarray:
    key = (n, np.dtype(dtype).name)
    m = _UP2_CACHE.get(key)
    if m is None:
        m = np.zeros((2 * n, n), dtype=dtype)
        for o in range(2 * n):
            src = (o + 0.5) / 2.0 - 0.5
            i0 = int(np.floor(src))
            w1 = src - i0
            m[o, min(max(i0, 0), n - 1)] += 1.0 - w1
            m[o, min(max(i0 + 1, 0), n - 1)] += w1
        _UP2_CACHE[key] = m
    return m


def bilinear_upsample2x(x: Tensor) -> Tensor:
    """Double NCHW spatial dims with half-pixel-center bilinear interpolation."""
    if x.data.ndim != 4:
        raise ValueError(f"bilinear_upsample2x expects NCHW, got shape {x.data.shape}")
    n, c, h, w = x.data.shape
    uh = _up2_matrix(h, x.dtype)
    uw = _up2_matrix(w, x.dtype)
    out_data = np.einsum("ah,nchw,bw->ncab", uh, x.data, uw, optimize=True)

    def bw(g):
        _accum(x, np.einsum("ah,ncab,bw->nchw", uh, g, uw, optimize=True))

    return _make(out_data, (x,), bw)

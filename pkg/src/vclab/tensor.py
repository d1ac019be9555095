"""Reverse-mode automatic differentiation on numpy arrays.

A `ComputationRecord` (the tape) stores every primitive op in execution
order, which is already a topological order of the data-flow graph.  A
single reversed sweep in `backward` then accumulates gradients for every
recorded leaf tensor.  The engine is deliberately small: dense algebra,
the gated-convolution primitives an autoregressive vocoder needs, and a
fused categorical cross-entropy.

Training runs in float64 so finite-difference checks are clean; nothing
here assumes a particular dtype beyond "numpy float".
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class DiffError(RuntimeError):
    """Raised on contract violations inside the autodiff engine."""


# When True, every primitive validates that its output is finite.  Always on
# for ops that can overflow (exp/log/div/cross-entropy) and for gradients.
_CHECK_ALL = False


def set_check_all(flag: bool) -> None:
    global _CHECK_ALL
    _CHECK_ALL = bool(flag)


class Tensor:
    """A numpy array plus a requires_grad flag.

    Tensors are immutable from the tape's point of view: ops return fresh
    Tensors and never write into their inputs.  Parameter tensors may be
    updated in place by an optimizer *between* recorded passes.
    """

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64) if not isinstance(data, np.ndarray) else data
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad}{tag})"

    # Operator sugar; everything routes through the module-level primitives.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


class _Op:
    __slots__ = ("name", "inputs", "output", "backward_fn")

    def __init__(self, name, inputs, output, backward_fn):
        self.name = name
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class ComputationRecord:
    """Execution-ordered tape of primitive ops plus the leaves they touched."""

    def __init__(self):
        self.ops: list[_Op] = []
        self._produced: set[int] = set()
        self.leaves: dict[int, Tensor] = {}

    def _note(self, op: _Op) -> None:
        for t in op.inputs:
            if t.requires_grad and id(t) not in self._produced:
                self.leaves[id(t)] = t
        self._produced.add(id(op.output))
        self.ops.append(op)

    def __len__(self) -> int:
        return len(self.ops)


_ACTIVE: list[ComputationRecord] = []


class recording:
    """Context manager that makes a fresh tape the active one."""

    def __enter__(self) -> ComputationRecord:
        rec = ComputationRecord()
        _ACTIVE.append(rec)
        return rec

    def __exit__(self, *exc) -> None:
        _ACTIVE.pop()


class no_grad:
    """Context manager that suspends recording entirely."""

    def __enter__(self):
        _ACTIVE.append(None)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.pop()


def _tape() -> ComputationRecord | None:
    return _ACTIVE[-1] if _ACTIVE else None


def _emit(name: str, inputs: tuple[Tensor, ...], out_data: np.ndarray,
          backward_fn, always_check: bool = False) -> Tensor:
    """Create the output tensor and record the op if a tape is active."""
    if always_check or _CHECK_ALL:
        if not np.all(np.isfinite(out_data)):
            raise DiffError(f"non-finite values produced by op '{name}'")
    rec = _tape()
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    if rec is not None and needs:
        rec._note(_Op(name, inputs, out, backward_fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# Elementwise and reduction primitives
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _emit("add", (a, b), out, bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def bw(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _emit("sub", (a, b), out, bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def bw(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return _emit("mul", (a, b), out, bw)


def div(a: Tensor, b: Tensor) -> Tensor:
    with np.errstate(all="ignore"):
        out = a.data / b.data

    def bw(g):
        return (_unbroadcast(g / b.data, a.data.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _emit("div", (a, b), out, bw, always_check=True)


def neg(a: Tensor) -> Tensor:
    return _emit("neg", (a,), -a.data, lambda g: (-g,))


def exp(a: Tensor) -> Tensor:
    with np.errstate(all="ignore"):
        out = np.exp(a.data)

    def bw(g):
        return (g * out,)

    return _emit("exp", (a,), out, bw, always_check=True)


def log(a: Tensor) -> Tensor:
    with np.errstate(all="ignore"):
        out = np.log(a.data)

    def bw(g):
        return (g / a.data,)

    return _emit("log", (a,), out, bw, always_check=True)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def bw(g):
        return (g * (1.0 - out * out),)

    return _emit("tanh", (a,), out, bw)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # stable for both tails: e^{-|x|} never overflows
    low = np.exp(-np.abs(x))
    low = low / (1.0 + low)
    out = np.where(x >= 0, 1.0 - low, low)

    def bw(g):
        return (g * out * (1.0 - out),)

    return _emit("sigmoid", (a,), out, bw)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def bw(g):
        return (g * (a.data > 0.0),)

    return _emit("relu", (a,), out, bw)


def square(a: Tensor) -> Tensor:
    out = a.data * a.data

    def bw(g):
        return (2.0 * g * a.data,)

    return _emit("square", (a,), out, bw)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _emit("sum", (a,), np.asarray(out), bw)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def scale(a: Tensor, c: float) -> Tensor:
    out = a.data * c

    def bw(g):
        return (g * c,)

    return _emit("scale", (a,), out, bw)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Slice `length` entries from `start` along `axis`."""
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = a.data[idx]

    def bw(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return (full,)

    return _emit("narrow", (a,), out.copy(), bw)


# ---------------------------------------------------------------------------
# Linear algebra and network primitives
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = np.matmul(a.data, b.data)

    def bw(g):
        at = np.swapaxes(a.data, -1, -2)
        bt = np.swapaxes(b.data, -1, -2)
        ga = _unbroadcast(np.matmul(g, bt), a.data.shape)
        gb = _unbroadcast(np.matmul(at, g), b.data.shape)
        return ga, gb

    return _emit("matmul", (a, b), out, bw)


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine layer y = x @ w + b with x of shape [batch, in]."""
    return add(matmul(x, w), b)


def conv1x1(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Pointwise channel mix: w [out, in] applied to x [..., in, time]."""
    y = matmul(w, x)
    if b is not None:
        y = add(y, b)
    return y


def conv1d_causal(x: Tensor, w: Tensor, b: Tensor | None, dilation: int) -> Tensor:
    """Dilated causal convolution with kernel width 2.

    x: [..., c_in, time]; w: [2, c_out, c_in] where tap 0 reaches back
    `dilation` samples and tap 1 reads the current sample.  The input is
    zero-padded on the left internally, so output time t depends only on
    input times <= t and output length equals input length.
    """
    if dilation < 1:
        raise DiffError(f"dilation must be >= 1, got {dilation}")
    if w.data.ndim != 3 or w.data.shape[0] != 2:
        raise DiffError(f"conv1d_causal expects w of shape [2, out, in], got {w.data.shape}")
    if x.data.shape[-2] != w.data.shape[2]:
        raise DiffError(
            f"channel mismatch: input has {x.data.shape[-2]}, kernel expects {w.data.shape[2]}")
    d = int(dilation)
    xd = x.data
    w0, w1 = w.data[0], w.data[1]
    past = np.zeros_like(xd)
    if xd.shape[-1] > d:
        past[..., d:] = xd[..., :-d]
    out = np.matmul(w1, xd) + np.matmul(w0, past)
    if b is not None:
        out = out + b.data

    def flat_time(arr):
        # [..., c, t] -> [c, prod(batch) * t] contiguous, for one BLAS call
        if arr.ndim == 2:
            return arr
        moved = np.moveaxis(arr, -2, 0)
        return np.ascontiguousarray(moved.reshape(arr.shape[-2], -1))

    def bw(g):
        gx = np.matmul(w1.T, g)
        back = np.matmul(w0.T, g)
        if xd.shape[-1] > d:
            gx[..., :-d] += back[..., d:]
        gf = flat_time(g)
        gw = np.empty_like(w.data)
        gw[1] = gf @ flat_time(xd).T
        gw[0] = gf @ flat_time(past).T
        if b is None:
            return gx, gw
        gb = _unbroadcast(g, b.data.shape)
        return gx, gw, gb

    inputs = (x, w) if b is None else (x, w, b)
    return _emit("conv1d_causal", inputs, out, bw)


def embedding(table: Tensor, codes: np.ndarray) -> Tensor:
    """Row lookups: codes [..., time] of ints -> [..., channels, time]."""
    idx = np.asarray(codes)
    out = np.swapaxes(table.data[idx], -1, -2)

    def bw(g):
        gt = np.zeros_like(table.data)
        gflat = np.swapaxes(g, -1, -2).reshape(-1, table.data.shape[1])
        np.add.at(gt, idx.reshape(-1), gflat)
        return (gt,)

    return _emit("embedding", (table,), out, bw)


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean categorical cross-entropy in nats.

    logits: [..., classes, time] (or [batch, classes]); targets: integer
    array shaped like logits with the class axis removed.  The class axis
    is the second-to-last one when logits.ndim >= 3, else the last.
    """
    ld = logits.data
    caxis = -2 if ld.ndim >= 3 else -1
    t = np.asarray(targets)
    m = ld.max(axis=caxis, keepdims=True)
    z = np.exp(ld - m)
    sz = z.sum(axis=caxis, keepdims=True)
    logp = ld - m - np.log(sz)
    picked = np.take_along_axis(logp, np.expand_dims(t, caxis), axis=caxis)
    n = picked.size
    out = np.asarray(-picked.sum() / n)

    def bw(g):
        p = z / sz
        onehot = np.zeros_like(ld)
        np.put_along_axis(onehot, np.expand_dims(t, caxis), 1.0, axis=caxis)
        return ((p - onehot) * (float(g) / n),)

    return _emit("softmax_cross_entropy", (logits,), out, bw, always_check=True)


def half_sse(a: Tensor, b: Tensor) -> Tensor:
    """0.5 * sum((a - b)^2): Gaussian negative log-likelihood with unit
    variance and constants dropped."""
    return scale(tsum(square(sub(a, b))), 0.5)


def reparameterize(mean: Tensor, log_var: Tensor, noise: np.ndarray) -> Tensor:
    """z = mean + exp(0.5 * log_var) * noise with externally drawn noise.

    The noise is recorded as a constant, so backward differentiates through
    mean and log_var only (the standard reparameterization trick).
    """
    return add(mean, mul(exp(scale(log_var, 0.5)), Tensor(noise)))


def gaussian_kl(mean: Tensor, log_var: Tensor) -> Tensor:
    """KL(N(mean, exp(log_var)) || N(0, I)), summed over all entries."""
    var = exp(log_var)
    per = sub(add(square(mean), var), add(Tensor(np.ones(())), log_var))
    return scale(tsum(per), 0.5)


# ---------------------------------------------------------------------------
# Backward sweep
# ---------------------------------------------------------------------------

def backward(record: ComputationRecord, loss: Tensor) -> dict[Tensor, Tensor]:
    """Run one reversed sweep and return grads for every leaf in the record.

    Leaves that the loss does not depend on receive zero gradients.
    """
    if loss.data.size != 1:
        raise DiffError(f"loss must be scalar, got shape {loss.data.shape}")
    if not np.isfinite(loss.data):
        raise DiffError("loss is non-finite")
    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for op in reversed(record.ops):
        g = pending.pop(id(op.output), None)
        if g is None:
            continue
        grads_in = op.backward_fn(g)
        for t, gi in zip(op.inputs, grads_in):
            if gi is None or not t.requires_grad:
                continue
            if not np.all(np.isfinite(gi)):
                raise DiffError(f"non-finite gradient in backward of op '{op.name}'")
            acc = pending.get(id(t))
            if acc is None:
                pending[id(t)] = gi
            else:
                pending[id(t)] = acc + gi
    out: dict[Tensor, Tensor] = {}
    for tid, leaf in record.leaves.items():
        g = pending.get(tid)
        out[leaf] = Tensor(g if g is not None else np.zeros_like(leaf.data))
    return out


def parameters(named: Iterable[tuple[str, Tensor]]) -> dict[str, Tensor]:
    """Helper: materialize a name -> parameter mapping, checking uniqueness."""
    out: dict[str, Tensor] = {}
    for name, t in named:
        if name in out:
            raise DiffError(f"duplicate parameter name {name!r}")
        t.name = name
        out[name] = t
    return out

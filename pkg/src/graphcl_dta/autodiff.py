"""Small dense reverse-mode autodiff engine on top of numpy.

Every operation returns a new :class:`Tensor` that remembers its parents and a
closure computing the vector-Jacobian product.  ``backward`` sorts the graph
topologically and replays those closures in reverse creation order.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

_ids = itertools.count()
_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation passes)."""
    prev = _grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class ShapeError(ValueError):
    pass


def _as_array(data, dtype=None) -> np.ndarray:
    if isinstance(data, np.ndarray) and data.dtype.kind == "f" and dtype is None:
        return data
    return np.asarray(data, dtype=dtype or np.float64)


class Tensor:
    """A node in the computation graph.

    ``data`` holds the forward values, ``grad`` is allocated lazily during
    :func:`backward` and always matches ``data.shape``.
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None, *, _parents=(), _op: str = ""):
        self.data = _as_array(data, dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.id = next(_ids)
        self._parents: tuple[Tensor, ...] = _parents
        self._backward: Callable[[], None] | None = None
        self._op = _op
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def T(self) -> Tensor:
        return transpose(self)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def tensor(data, requires_grad=False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def _lift(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype or np.float64))


def _make(data: np.ndarray, parents: Sequence[Tensor], op: str) -> Tensor:
    needs = _grad_enabled() and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs, _parents=tuple(parents) if needs else (), _op=op)
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.dtype, copy=True).reshape(t.shape)
    else:
        t.grad += g.reshape(t.shape)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = _lift(a, b if isinstance(b, Tensor) else None), _lift(b, a if isinstance(a, Tensor) else None)
    _check_broadcast(a, b, "add")
    out = _make(a.data + b.data, (a, b), "add")
    if out.requires_grad:
        def _bw():
            _accum(a, _unbroadcast(out.grad, a.shape))
            _accum(b, _unbroadcast(out.grad, b.shape))
        out._backward = _bw
    return out


def sub(a, b) -> Tensor:
    a, b = _lift(a, b if isinstance(b, Tensor) else None), _lift(b, a if isinstance(a, Tensor) else None)
    _check_broadcast(a, b, "sub")
    out = _make(a.data - b.data, (a, b), "sub")
    if out.requires_grad:
        def _bw():
            _accum(a, _unbroadcast(out.grad, a.shape))
            _accum(b, _unbroadcast(-out.grad, b.shape))
        out._backward = _bw
    return out


def mul(a, b) -> Tensor:
    a, b = _lift(a, b if isinstance(b, Tensor) else None), _lift(b, a if isinstance(a, Tensor) else None)
    _check_broadcast(a, b, "mul")
    out = _make(a.data * b.data, (a, b), "mul")
    if out.requires_grad:
        def _bw():
            if a.requires_grad:
                _accum(a, _unbroadcast(out.grad * b.data, a.shape))
            if b.requires_grad:
                _accum(b, _unbroadcast(out.grad * a.data, b.shape))
        out._backward = _bw
    return out


def div(a, b) -> Tensor:
    a, b = _lift(a, b if isinstance(b, Tensor) else None), _lift(b, a if isinstance(a, Tensor) else None)
    _check_broadcast(a, b, "div")
    out = _make(a.data / b.data, (a, b), "div")
    if out.requires_grad:
        def _bw():
            if a.requires_grad:
                _accum(a, _unbroadcast(out.grad / b.data, a.shape))
            if b.requires_grad:
                _accum(b, _unbroadcast(-out.grad * a.data / (b.data * b.data), b.shape))
        out._backward = _bw
    return out


def scale(x: Tensor, c: float) -> Tensor:
    return mul(x, c)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = _make(np.where(mask, x.data, 0).astype(x.dtype, copy=False), (x,), "relu")
    if out.requires_grad:
        def _bw():
            _accum(x, out.grad * mask)
        out._backward = _bw
    return out


def exp(x: Tensor) -> Tensor:
    val = np.exp(x.data)
    out = _make(val, (x,), "exp")
    if out.requires_grad:
        def _bw():
            _accum(x, out.grad * val)
        out._backward = _bw
    return out


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise ValueError("log: input has non-positive entries")
    out = _make(np.log(x.data), (x,), "log")
    if out.requires_grad:
        def _bw():
            _accum(x, out.grad / x.data)
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# reductions


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = _make(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), "sum")
    if out.requires_grad:
        def _bw():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            _accum(x, np.broadcast_to(g, x.shape))
        out._backward = _bw
    return out


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return div(tsum(x, axis=axis, keepdims=keepdims), float(n))


def tmax(x: Tensor, axis: int = 0, keepdims: bool = False) -> Tensor:
    """Max along ``axis``; ties go to the lowest index, which alone receives gradient."""
    if x.shape[axis] == 0:
        raise ShapeError(f"max: empty axis {axis} in shape {x.shape}")
    idx = np.argmax(x.data, axis=axis)
    idx_k = np.expand_dims(idx, axis)
    val = np.take_along_axis(x.data, idx_k, axis=axis)
    out = _make(val if keepdims else np.squeeze(val, axis=axis), (x,), "max")
    if out.requires_grad:
        def _bw():
            g = np.zeros_like(x.data)
            go = out.grad if keepdims else np.expand_dims(out.grad, axis)
            np.put_along_axis(g, idx_k, go, axis=axis)
            _accum(x, g)
        out._backward = _bw
    return out


def logsumexp(x: Tensor, axis: int = -1) -> Tensor:
    m = np.max(x.data, axis=axis, keepdims=True)
    shifted = np.exp(x.data - m)
    s = shifted.sum(axis=axis, keepdims=True)
    val = (np.log(s) + m).squeeze(axis)
    out = _make(val, (x,), "logsumexp")
    if out.requires_grad:
        soft = shifted / s

        def _bw():
            _accum(x, soft * np.expand_dims(out.grad, axis))
        out._backward = _bw
    return out


def row_norm(x: Tensor) -> Tensor:
    """L2 norm over the last axis; the subgradient at the zero vector is 0."""
    n = np.sqrt(np.sum(x.data * x.data, axis=-1))
    out = _make(n, (x,), "row_norm")
    if out.requires_grad:
        def _bw():
            safe = np.where(n > 0, n, 1.0)
            coef = np.where(n > 0, out.grad / safe, 0.0)
            _accum(x, x.data * coef[..., None])
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# linear algebra / shape


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.ndim < 1 or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = _make(a.data @ b.data, (a, b), "matmul")
    if out.requires_grad:
        def _bw():
            g = out.grad
            if a.requires_grad:
                _accum(a, g @ b.data.T)
            if b.requires_grad:
                a2 = a.data.reshape(-1, a.shape[-1])
                _accum(b, a2.T @ g.reshape(-1, b.shape[1]))
        out._backward = _bw
    return out


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got shape {x.shape}")
    out = _make(x.data.T, (x,), "transpose")
    if out.requires_grad:
        def _bw():
            _accum(x, out.grad.T)
        out._backward = _bw
    return out


def reshape(x: Tensor, shape) -> Tensor:
    out = _make(x.data.reshape(shape), (x,), "reshape")
    if out.requires_grad:
        def _bw():
            _accum(x, out.grad.reshape(x.shape))
        out._backward = _bw
    return out


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [_lift(x) for x in xs]
    ref = list(xs[0].shape)
    for x in xs[1:]:
        other = list(x.shape)
        if len(other) != len(ref) or any(o != r for i, (o, r) in enumerate(zip(other, ref)) if i != axis % len(ref)):
            raise ShapeError(f"concat: incompatible shapes {xs[0].shape} and {x.shape} along axis {axis}")
    out = _make(np.concatenate([x.data for x in xs], axis=axis), xs, "concat")
    if out.requires_grad:
        bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]

        def _bw():
            for x, g in zip(xs, np.split(out.grad, bounds, axis=axis)):
                _accum(x, g)
        out._backward = _bw
    return out


def embedding(table: Tensor, idx, padding_idx: int | None = None) -> Tensor:
    """Row lookup ``table[idx]``; rows at ``padding_idx`` never receive gradient."""
    idx = np.asarray(idx, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"embedding: table must be a matrix, got shape {table.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(f"embedding: index out of range for table with {table.shape[0]} rows")
    out = _make(table.data[idx], (table,), "embedding")
    if out.requires_grad:
        def _bw():
            g = np.zeros_like(table.data)
            flat_idx = idx.reshape(-1)
            flat_g = out.grad.reshape(-1, table.shape[1])
            if padding_idx is not None:
                keep = flat_idx != padding_idx
                flat_idx, flat_g = flat_idx[keep], flat_g[keep]
            np.add.at(g, flat_idx, flat_g)
            _accum(table, g)
        out._backward = _bw
    return out


take_rows = embedding


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Valid, stride-1 cross-correlation.

    ``x`` is ``(L,)``, ``(L, C_in)`` or ``(B, L, C_in)``; ``w`` is ``(K,)`` for a
    1-D signal or ``(K, C_in, C_out)``.  Output length is ``L - K + 1``.
    """
    x, w = _lift(x), _lift(w)
    if x.ndim == 1 and w.ndim == 1:
        out = conv1d(reshape(x, (-1, 1)), reshape(w, (-1, 1, 1)), None if b is None else reshape(b, (1,)))
        return reshape(out, (-1,))
    if w.ndim != 3 or x.ndim not in (2, 3) or x.shape[-1] != w.shape[1]:
        raise ShapeError(f"conv1d: incompatible shapes {x.shape} and {w.shape}")
    K = w.shape[0]
    L = x.shape[-2]
    if K > L:
        raise ShapeError(f"conv1d: kernel length {K} exceeds sequence length {L}")
    Lo = L - K + 1
    xd, wd = x.data, w.data
    y = xd[..., 0:Lo, :] @ wd[0]
    for j in range(1, K):
        y += xd[..., j:j + Lo, :] @ wd[j]
    parents = (x, w) if b is None else (x, w, _lift(b))
    if b is not None:
        y += parents[2].data
    out = _make(y, parents, "conv1d")
    if out.requires_grad:
        def _bw():
            g = out.grad
            if x.requires_grad:
                gx = np.zeros_like(xd)
                for j in range(K):
                    gx[..., j:j + Lo, :] += g @ wd[j].T
                _accum(x, gx)
            if w.requires_grad:
                g2 = g.reshape(-1, g.shape[-1])
                gw = np.empty_like(wd)
                for j in range(K):
                    gw[j] = xd[..., j:j + Lo, :].reshape(-1, xd.shape[-1]).T @ g2
                _accum(w, gw)
            if b is not None:
                _accum(parents[2], g.reshape(-1, g.shape[-1]).sum(axis=0))
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# backward pass


def _topo(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.id in seen:
            continue
        seen.add(node.id)
        stack.append((node, True))
        for p in node._parents:
            if p.id not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Fill ``.grad`` of every reachable tensor with d(loss)/d(tensor).

    The graph is released afterwards, so each forward build supports exactly
    one backward pass.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if loss._consumed:
        raise RuntimeError("backward: graph already consumed; rebuild the forward pass")
    if not loss.requires_grad:
        raise RuntimeError("backward: loss does not depend on any tensor requiring grad")
    order = _topo(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward()
    for node in order:
        node._consumed = True
        node._backward = None
        node._parents = ()


# ---------------------------------------------------------------------------
# finite differences


@dataclass
class FiniteDiffReport:
    max_rel_err: float
    tol: float
    worst: tuple[int, int] | None  # (param position, flat index)
    per_param: list[float] = field(default_factory=list)
    n_checked: int = 0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_err) and self.max_rel_err <= self.tol)


def finite_diff_check(
    loss_builder: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    coords: dict[int, Iterable[int]] | None = None,
) -> FiniteDiffReport:
    """Compare analytic gradients with central differences.

    ``loss_builder`` must rebuild the loss deterministically from the current
    values of ``params``.  ``coords`` optionally restricts which flat indices of
    each parameter are probed (e.g. to skip frozen rows).
    """
    for p in params:
        p.grad = None
    loss = loss_builder()
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst_err, worst_at, per_param, n = 0.0, None, [], 0
    for pi, p in enumerate(params):
        if not p.data.flags.c_contiguous:
            raise ValueError("finite_diff_check: parameters must be C-contiguous")
        flat = p.data.reshape(-1)
        idxs = range(flat.size) if coords is None or pi not in coords else coords[pi]
        a_flat = analytic[pi].reshape(-1)
        p_err = 0.0
        with no_grad():
            for i in idxs:
                orig = flat[i]
                flat[i] = orig + h
                fp = loss_builder().item()
                flat[i] = orig - h
                fm = loss_builder().item()
                flat[i] = orig
                num = (fp - fm) / (2.0 * h)
                a = float(a_flat[i])
                err = abs(a - num) / max(1.0, abs(a), abs(num))
                n += 1
                if not np.isfinite(err):
                    err = np.inf
                if err > p_err:
                    p_err = err
                if err > worst_err:
                    worst_err, worst_at = err, (pi, int(i))
        per_param.append(p_err)
    for p in params:
        p.grad = None
    return FiniteDiffReport(max_rel_err=worst_err, tol=tol, worst=worst_at if worst_err > tol else None,
                            per_param=per_param, n_checked=n)

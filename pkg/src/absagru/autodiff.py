"""Dense float64 tensors with reverse-mode automatic differentiation.

Operations execute eagerly on numpy arrays. While a :class:`GradTape` is
active, every differentiable op appends a node (output tensor, inputs,
backward closure) to it; because ops are recorded in execution order, the
tape is already topologically sorted and ``backward`` simply walks it in
reverse, accumulating gradients additively into each tensor's ``grad``
buffer.

Tensors are treated as immutable once produced by an op. The only sanctioned
in-place mutation is an optimizer updating leaf parameter data between tape
lifetimes.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, ContractError, ShapeError


class Tensor:
    """A dense float64 array, optionally participating in the gradient graph."""

    __slots__ = ("data", "requires_grad", "grad", "_from_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._from_op = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def is_leaf(self) -> bool:
        return self.requires_grad and not self._from_op

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; all routing goes through the module-level ops.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


_TAPE_STACK: list["GradTape"] = []


class GradTape:
    """Ordered record of executed ops, replayed in reverse for gradients."""

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...],
                                Callable[[np.ndarray], None]]] = []

    def __enter__(self) -> "GradTape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Accumulate dLoss/dT into ``t.grad`` for every tensor reachable
        from ``loss``; returns the leaf-tensor gradient map."""
        if loss.data.size != 1:
            raise ContractError(
                f"backward needs a scalar loss, got shape {loss.shape}")
        _accumulate(loss, np.ones_like(loss.data))
        leaves: dict[Tensor, np.ndarray] = {}
        for out, inputs, backward_fn in reversed(self._nodes):
            if out.grad is None:
                continue  # not on any path to the loss
            backward_fn(out.grad)
            for t in inputs:
                if t.is_leaf() and t.grad is not None:
                    leaves[t] = t.grad
        return leaves


def _active_tape() -> GradTape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _record(out: Tensor, inputs: tuple[Tensor, ...],
            backward_fn: Callable[[np.ndarray], None]) -> None:
    tape = _active_tape()
    if tape is not None and out.requires_grad:
        out._from_op = True
        tape._nodes.append((out, inputs, backward_fn))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def constant(value) -> Tensor:
    return Tensor(np.asarray(value, dtype=np.float64))


def parameter(value) -> Tensor:
    return Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data, a.requires_grad or b.requires_grad)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    _record(out, (a, b), backward)
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data - b.data, a.requires_grad or b.requires_grad)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, -_unbroadcast(g, b.data.shape))

    _record(out, (a, b), backward)
    return out


def neg(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(-a.data, a.requires_grad)
    _record(out, (a,), lambda g: _accumulate(a, -g))
    return out


def mul(a, b) -> Tensor:
    """Elementwise (Hadamard) product with numpy broadcasting."""
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data, a.requires_grad or b.requires_grad)
    a_data, b_data = a.data, b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g * b_data, a_data.shape))
        _accumulate(b, _unbroadcast(g * a_data, b_data.shape))

    _record(out, (a, b), backward)
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c, a.requires_grad)
    _record(out, (a,), lambda g: _accumulate(a, g * c))
    return out


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 2-D x 2-D, 2-D x 1-D, 1-D x 2-D and 1-D x 1-D."""
    a, b = _as_tensor(a), _as_tensor(b)
    if (a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2)
            or a.data.shape[-1] != b.data.shape[0]):
        raise ShapeError(f"cannot matmul shapes {a.shape} and {b.shape}")
    out = Tensor(a.data @ b.data, a.requires_grad or b.requires_grad)
    a_data, b_data = a.data, b.data

    def backward(g):
        if a_data.ndim == 2 and b_data.ndim == 2:
            _accumulate(a, g @ b_data.T)
            _accumulate(b, a_data.T @ g)
        elif a_data.ndim == 2:  # [m,k] @ [k] -> [m]
            _accumulate(a, np.outer(g, b_data))
            _accumulate(b, a_data.T @ g)
        elif b_data.ndim == 2:  # [k] @ [k,n] -> [n]
            _accumulate(a, b_data @ g)
            _accumulate(b, np.outer(a_data, g))
        else:  # [k] @ [k] -> scalar
            _accumulate(a, g * b_data)
            _accumulate(b, g * a_data)

    _record(out, (a, b), backward)
    return out


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}")
    out = Tensor(np.ascontiguousarray(a.data.T), a.requires_grad)
    _record(out, (a,), lambda g: _accumulate(a, np.ascontiguousarray(g.T)))
    return out


# ---------------------------------------------------------------------------
# activations and normalizers


def sigmoid(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    d = x.data
    s = np.empty_like(d)
    pos = d >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    s[~pos] = e / (1.0 + e)
    out = Tensor(s, x.requires_grad)
    _record(out, (x,), lambda g: _accumulate(x, g * s * (1.0 - s)))
    return out


def tanh_act(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    t = np.tanh(x.data)
    out = Tensor(t, x.requires_grad)
    _record(out, (x,), lambda g: _accumulate(x, g * (1.0 - t * t)))
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    if not -x.data.ndim <= axis < x.data.ndim:
        raise ShapeError(f"softmax axis {axis} invalid for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s, x.requires_grad)

    def backward(g):
        inner = (g * s).sum(axis=axis, keepdims=True)
        _accumulate(x, (g - inner) * s)

    _record(out, (x,), backward)
    return out


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    ls = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = Tensor(ls, x.requires_grad)

    def backward(g):
        _accumulate(x, g - np.exp(ls) * g.sum(axis=axis, keepdims=True))

    _record(out, (x,), backward)
    return out


# ---------------------------------------------------------------------------
# shape plumbing


def sum_all(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(x.data.sum(), x.requires_grad)
    _record(out, (x,),
            lambda g: _accumulate(x, np.full_like(x.data, float(g))))
    return out


def add_n(tensors: Sequence[Tensor]) -> Tensor:
    """Sum of same-shaped tensors as a single node."""
    if not tensors:
        raise ContractError("add_n needs at least one tensor")
    out = Tensor(sum(t.data for t in tensors),
                 any(t.requires_grad for t in tensors))

    def backward(g):
        for t in tensors:
            _accumulate(t, g)

    _record(out, tuple(tensors), backward)
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    sizes = [t.data.shape[axis] for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                 any(t.requires_grad for t in tensors))

    def backward(g):
        start = 0
        for t, size in zip(tensors, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(start, start + size)
            _accumulate(t, g[tuple(idx)])
            start += size

    _record(out, tuple(tensors), backward)
    return out


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack 1-D tensors into a matrix, one per row."""
    out = Tensor(np.stack([t.data for t in tensors]),
                 any(t.requires_grad for t in tensors))

    def backward(g):
        for i, t in enumerate(tensors):
            _accumulate(t, g[i])

    _record(out, tuple(tensors), backward)
    return out


def take_rows(x: Tensor, indices: Sequence[int]) -> Tensor:
    """Gather rows of a matrix; gradients scatter-add back."""
    idx = np.asarray(indices, dtype=np.intp)
    out = Tensor(x.data[idx], x.requires_grad)

    def backward(g):
        if not x.requires_grad:
            return
        buf = np.zeros_like(x.data)
        np.add.at(buf, idx, g)
        _accumulate(x, buf)

    _record(out, (x,), backward)
    return out


def take_row(x: Tensor, index: int) -> Tensor:
    """Pick one row of a matrix as a vector."""
    out = Tensor(x.data[index].copy(), x.requires_grad)

    def backward(g):
        if not x.requires_grad:
            return
        buf = np.zeros_like(x.data)
        buf[index] += g
        _accumulate(x, buf)

    _record(out, (x,), backward)
    return out


def select(x: Tensor, index) -> Tensor:
    """Pick one element as a scalar tensor."""
    out = Tensor(np.asarray(x.data[index]), x.requires_grad)

    def backward(g):
        if not x.requires_grad:
            return
        buf = np.zeros_like(x.data)
        buf[index] += g
        _accumulate(x, buf)

    _record(out, (x,), backward)
    return out


def flip_rows(x: Tensor) -> Tensor:
    """Reverse the leading axis (time reversal for sequences)."""
    out = Tensor(x.data[::-1].copy(), x.requires_grad)
    _record(out, (x,), lambda g: _accumulate(x, g[::-1]))
    return out


# ---------------------------------------------------------------------------
# regularization


def dropout(x: Tensor, rate: float, training: bool,
            rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate) at train time,
    so inference is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ContractError("training-mode dropout needs an rng")
    keep = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.data * keep, x.requires_grad)
    _record(out, (x,), lambda g: _accumulate(x, g * keep))
    return out


def apply_kernel_op(out_data: np.ndarray, inputs: Sequence[Tensor],
                    vjp: Callable[[np.ndarray], Iterable[np.ndarray | None]]
                    ) -> Tensor:
    """Wrap a fused backend kernel as a single tape node.

    ``vjp(g)`` must return one gradient array (or None) per entry of
    ``inputs``, in order.
    """
    inputs = tuple(inputs)
    out = Tensor(out_data, any(t.requires_grad for t in inputs))

    def backward(g):
        for t, grad in zip(inputs, vjp(g)):
            if grad is not None:
                _accumulate(t, grad)

    _record(out, inputs, backward)
    return out


# ---------------------------------------------------------------------------
# gradient post-processing


def clip_global_norm(grads: dict[str, np.ndarray],
                     max_norm: float) -> dict[str, np.ndarray]:
    """Scale every gradient by max_norm/norm when the joint L2 norm exceeds
    max_norm. Norms within 1e-12 (relative) of the cap count as already
    clipped, which makes the operation exactly idempotent."""
    if max_norm <= 0:
        raise ConfigError(f"max_norm must be positive, got {max_norm}")
    total = global_norm(grads)
    if total <= max_norm * (1.0 + 1e-12):
        return grads
    factor = max_norm / total
    for g in grads.values():
        g *= factor
    return grads


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))

"""Reverse-mode autodiff core: value-carrying tensors and the recording tape.

A ``Graph`` records every op output in creation order while it is the
active graph (entered as a context manager).  ``Graph.backward`` seeds the
loss gradient and replays the recorded backward rules in exact reverse
creation order, accumulating into ``Tensor.grad``.  Ops executed with no
active graph run forward-only, which is what frozen-parameter inference
uses; nothing is recorded and no gradients flow.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError

_FLOAT_DTYPES = (np.float32, np.float64)


class Tensor:
    """A dense n-dimensional float array, optionally a trainable leaf.

    ``data`` is row-major; ``grad`` is lazily allocated with the same shape
    during backward.  64-bit is the default; 32-bit is allowed for speed.
    """

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.type not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match tensor shape {self.data.shape}"
                + (f" for {self.name!r}" if self.name else ""))
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"


_GRAPH_STACK: list["Graph"] = []


def active_graph() -> "Graph | None":
    return _GRAPH_STACK[-1] if _GRAPH_STACK else None


class Graph:
    """Tape of op records in forward creation order.

    Each record pairs an op's output tensor with the closure implementing
    its backward rule.  Creation order is a valid topological order by
    construction, so backward walks the list in exact reverse.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, object]] = []

    def __enter__(self) -> "Graph":
        _GRAPH_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _GRAPH_STACK.pop()
        assert popped is self
        return False

    def record(self, out: Tensor, backward_fn) -> None:
        self._records.append((out, backward_fn))

    def __len__(self):
        return len(self._records)

    def backward(self, loss: Tensor) -> None:
        """Propagate d(loss)/d(node) to every recorded node and leaf."""
        if loss.data.ndim != 0:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        if not np.isfinite(loss.data):
            raise NumericError("loss is not finite; backward aborted")
        loss.grad = np.ones_like(loss.data)
        for out, backward_fn in reversed(self._records):
            if out.grad is None:
                continue  # node does not feed the loss
            backward_fn(out.grad)


def zero_grads(params) -> None:
    """Reset gradients on an iterable (or name->Tensor mapping) of leaves."""
    values = params.values() if hasattr(params, "values") else params
    for p in values:
        p.zero_grad()


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int,
                   dtype=np.float64, name: str | None = None) -> Tensor:
    """Trainable leaf initialised uniformly in +-sqrt(6/(fan_in+fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    data = rng.uniform(-limit, limit, size=shape).astype(dtype)
    return Tensor(data, requires_grad=True, name=name)


def zeros_param(shape, dtype=np.float64, name: str | None = None) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True, name=name)

"""Dense tensor with a reverse-mode tape.

A Tensor wraps a float32/float64 numpy array. Ops (see ops.py) create output
tensors that remember their parent tensors and a closure computing parent
gradients from the output gradient; backward() walks that graph once in
reverse topological order.

Gradient retention contract: backward() accumulates .grad additively on every
reachable *leaf* created with requires_grad=True (parameters, inputs). Calling
backward() twice without zero_grad() therefore doubles leaf grads. Intermediate
results participate in the chain but keep .grad = None unless retain_grad()
was called on them.

A graph ("tape") is confined to one logical thread; independent graphs may be
evaluated concurrently.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericError, ShapeError, UsageError

SUPPORTED_DTYPES = (np.float32, np.float64)

# When True every op validates that its output is finite (NaN/Inf raise
# NumericError). The scan is cheap relative to the op kernels.
FINITE_CHECKS = True


def check_finite(data: np.ndarray, opname: str) -> None:
    if FINITE_CHECKS and not np.all(np.isfinite(data)):
        raise NumericError(f"{opname}: non-finite values in result")


def as_dtype(dtype) -> np.dtype:
    dt = np.dtype(dtype)
    if dt.type not in SUPPORTED_DTYPES:
        raise UsageError(f"unsupported dtype {dt}; use float32 or float64")
    return dt


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_retain")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if dtype is not None:
            arr = np.asarray(data, dtype=as_dtype(dtype))
        else:
            arr = np.asarray(data)
            if arr.dtype.type not in SUPPORTED_DTYPES:
                arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._retain = False

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def zeros(shape, dtype=np.float64, requires_grad=False) -> "Tensor":
        return Tensor(np.zeros(shape, dtype=as_dtype(dtype)), requires_grad)

    @staticmethod
    def ones(shape, dtype=np.float64, requires_grad=False) -> "Tensor":
        return Tensor(np.ones(shape, dtype=as_dtype(dtype)), requires_grad)

    @staticmethod
    def full(shape, value, dtype=np.float64, requires_grad=False) -> "Tensor":
        return Tensor(np.full(shape, value, dtype=as_dtype(dtype)), requires_grad)

    # -- basic properties ------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError("item() requires a single-element tensor")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"

    # -- tape ------------------------------------------------------------------

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def retain_grad(self) -> "Tensor":
        self._retain = True
        return self

    def detach(self) -> "Tensor":
        """New leaf sharing this tensor's data, cut from the tape."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    # -- convenience arithmetic (implemented in ops.py, bound late) -------------

    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.sum_along(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.mean_along(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        from . import ops
        return ops.reshape(self, shape)


def from_op(data: np.ndarray, parents, backward_fn, opname: str) -> Tensor:
    """Create a tape node.

    ``backward_fn(grad_out) -> tuple[np.ndarray | None, ...]`` must return one
    gradient (or None) per parent, as arrays the caller owns (no views into
    other tensors' grads). It must capture numpy arrays only, never Tensors,
    so graphs free themselves by refcount.
    """
    check_finite(data, opname)
    parents = tuple(parents)
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def backward(loss: Tensor) -> None:
    """Populate .grad on every reachable requires_grad leaf of the tape."""
    if loss.data.size != 1:
        raise UsageError(f"backward expects a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise UsageError("loss does not require grad; nothing to differentiate")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    # Pass-local gradient accumulation; `owned` marks arrays this pass may
    # mutate in place (first contributions can alias closure outputs).
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    owned: set[int] = {id(loss)}

    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf or node._retain:
            node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is not None:
            parent_grads = node._backward(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                if pg.shape != p.data.shape:
                    raise ShapeError(
                        f"backward of op feeding {p!r}: gradient shape {pg.shape} "
                        f"!= data shape {p.data.shape}"
                    )
                pid = id(p)
                if pid not in grads:
                    grads[pid] = pg
                elif pid in owned:
                    grads[pid] += pg
                else:
                    grads[pid] = grads[pid] + pg
                    owned.add(pid)

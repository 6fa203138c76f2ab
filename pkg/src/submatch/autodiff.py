"""Small reverse-mode autodiff over dense 2-D float64 arrays.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure that pushes the output gradient back to them. ``backward`` walks the
graph in reverse topological order and then drops the recorded closures, so a
tape is used exactly once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

LOG_EPS = 1e-12


class ShapeMismatch(ValueError):
    pass


class DomainError(ValueError):
    pass


class NonScalarLoss(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.data.size != 1:
            raise NonScalarLoss(f"item() on shape {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

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

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    @property
    def T(self):
        return transpose(self)

    def backward(self) -> None:
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    for da, db in zip(a.shape, b.shape):
        if da != db and da != 1 and db != 1:
            raise ShapeMismatch(f"{op}: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------- primitives


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), fn)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(-_unbroadcast(g, b.shape))

    return _make(a.data - b.data, (a, b), fn)


def mul(a, b) -> Tensor:
    """Elementwise product (with row/column broadcasting)."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), fn)


def scale(a: Tensor, c: float) -> Tensor:
    def fn(g):
        a._accumulate(g * c)

    return _make(a.data * c, (a,), fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")

    def fn(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _make(a.data @ b.data, (a, b), fn)


def rowwise_scale(v: Tensor, m: Tensor) -> Tensor:
    """Scale row ``i`` of ``m`` by ``v[i]``; ``v`` is a column (N, 1) or row (1, N)."""
    v = as_tensor(v)
    if v.shape[0] == 1 and v.shape[1] != 1:
        col = v.data.reshape(-1, 1)
        as_row = True
    else:
        col = v.data
        as_row = False
    if col.shape != (m.shape[0], 1):
        raise ShapeMismatch(f"rowwise_scale: {v.shape} vs {m.shape}")

    def fn(g):
        if v.requires_grad:
            gv = (g * m.data).sum(axis=1, keepdims=True)
            v._accumulate(gv.reshape(1, -1) if as_row else gv)
        if m.requires_grad:
            m._accumulate(g * col)

    return _make(col * m.data, (v, m), fn)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatch(f"concat_cols: {a.shape} | {b.shape}")
    k = a.shape[1]

    def fn(g):
        if a.requires_grad:
            a._accumulate(g[:, :k])
        if b.requires_grad:
            b._accumulate(g[:, k:])

    return _make(np.concatenate([a.data, b.data], axis=1), (a, b), fn)


def transpose(a: Tensor) -> Tensor:
    def fn(g):
        a._accumulate(g.T)

    return _make(a.data.T.copy(), (a,), fn)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    factor = np.where(x.data > 0, 1.0, slope)

    def fn(g):
        x._accumulate(g * factor)

    return _make(x.data * factor, (x,), fn)


def relu(x: Tensor) -> Tensor:
    return leaky_relu(x, 0.0)


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so exp never overflows
    z = x.data
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)

    def fn(g):
        x._accumulate(g * out * (1.0 - out))

    return _make(out, (x,), fn)


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def fn(g):
        x._accumulate(g * out)

    return _make(out, (x,), fn)


def log(x: Tensor, eps: float | None = LOG_EPS) -> Tensor:
    """Natural log. With ``eps`` set, inputs are clamped below at ``eps``
    (and the clamped entries pass no gradient)."""
    if eps is None:
        if np.any(x.data <= 0):
            raise DomainError("log of a nonpositive value")
        clamped = x.data
        live = np.ones_like(x.data)
    else:
        clamped = np.maximum(x.data, eps)
        live = (x.data > eps).astype(np.float64)

    def fn(g):
        x._accumulate(g * live / clamped)

    return _make(np.log(clamped), (x,), fn)


def masked_softmax_rows(e: Tensor, mask) -> Tensor:
    """Row softmax restricted to ``mask == 1`` entries; masked entries are 0.

    A row without any unmasked entry yields all zeros.
    """
    m = np.asarray(mask.data if isinstance(mask, Tensor) else mask) != 0
    if m.shape != e.shape:
        raise ShapeMismatch(f"masked_softmax_rows: {e.shape} vs mask {m.shape}")
    logits = np.where(m, e.data, -np.inf)
    row_max = logits.max(axis=1, keepdims=True)
    row_max[~np.isfinite(row_max)] = 0.0
    ex = np.where(m, np.exp(logits - row_max), 0.0)
    denom = ex.sum(axis=1, keepdims=True)
    denom[denom == 0] = 1.0
    out = ex / denom

    def fn(g):
        inner = (g * out).sum(axis=1, keepdims=True)
        e._accumulate(out * (g - inner))

    return _make(out, (e,), fn)


def mean_rows_subset(m: Tensor, rows: Iterable[int]) -> Tensor:
    """Mean of the selected rows, shape (1, C)."""
    idx = np.fromiter(rows, dtype=np.int64)
    if idx.size == 0:
        raise ShapeMismatch("mean_rows_subset: empty row set")

    def fn(g):
        full = np.zeros_like(m.data)
        np.add.at(full, idx, np.broadcast_to(g / idx.size, (idx.size, m.shape[1])))
        m._accumulate(full)

    return _make(m.data[idx].mean(axis=0, keepdims=True), (m,), fn)


def take_entries(m: Tensor, rows: Sequence[int], cols: Sequence[int]) -> Tensor:
    """Gather ``m[rows[k], cols[k]]`` into a (1, K) row."""
    r = np.asarray(rows, dtype=np.int64)
    c = np.asarray(cols, dtype=np.int64)

    def fn(g):
        full = np.zeros_like(m.data)
        np.add.at(full, (r, c), g.reshape(-1))
        m._accumulate(full)

    return _make(m.data[r, c].reshape(1, -1), (m,), fn)


def sum_all(x: Tensor) -> Tensor:
    def fn(g):
        x._accumulate(np.broadcast_to(g, x.shape))

    return _make(np.array([[x.data.sum()]]), (x,), fn)


def divide(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "divide")

    def fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(a.data / b.data, (a, b), fn)


# ------------------------------------------------------------------ backward


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every requires_grad leaf."""
    if loss.shape != (1, 1):
        raise NonScalarLoss(f"loss must have shape (1, 1), got {loss.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    loss.grad = np.ones((1, 1))
    for node in reversed(order):
        if node._backward is not None:
            if node.grad is not None:
                node._backward(node.grad)
            # interior nodes release their gradient and closure: the tape is spent
            node.grad = None
            node._backward = None
            node._parents = ()


def no_grad_copy(t: Tensor) -> Tensor:
    return Tensor(t.data.copy())


# ----------------------------------------------------------------- gradcheck


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    per_param: dict[str, float] = field(default_factory=dict)
    worst: tuple[str, tuple[int, int]] | None = None

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor] | dict[str, Tensor],
    step: float = 1e-5,
    tolerance: float = 1e-4,
    floor: float = 1e-6,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare analytic gradients of ``f()`` with central differences.

    The relative error per entry is ``|a - n| / max(|a|, |n|, floor)``; the
    floor keeps entries whose true gradient is ~0 from dividing roundoff by
    roundoff. ``max_entries`` subsamples large parameters.
    """
    if not isinstance(params, dict):
        params = {p.name or f"p{i}": p for i, p in enumerate(params)}
    for p in params.values():
        p.zero_grad()
    loss = f()
    backward(loss)
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()}

    report = GradCheckReport(0.0, tolerance)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            rng = rng or np.random.default_rng(0)
            indices = rng.choice(flat.size, size=max_entries, replace=False)
        worst = 0.0
        for k in indices:
            orig = flat[k]
            flat[k] = orig + step
            up = f().item()
            flat[k] = orig - step
            down = f().item()
            flat[k] = orig
            numeric = (up - down) / (2 * step)
            a = analytic[name].reshape(-1)[k]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            if err > worst:
                worst = err
            if err > report.max_rel_error:
                report.max_rel_error = err
                report.worst = (name, tuple(int(i) for i in np.unravel_index(k, p.shape)))
        report.per_param[name] = worst
    for p in params.values():
        p.zero_grad()
    return report


# --------------------------------------------------------------- dump format


def dump_tensors(tensors: dict[str, np.ndarray | Tensor]) -> str:
    """``tensor <name> <rows> <cols>`` header then one value per line (repr precision)."""
    lines = []
    for name, t in tensors.items():
        arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
        if arr.ndim != 2:
            arr = arr.reshape(1, -1) if arr.ndim < 2 else arr
        if any(c.isspace() for c in name):
            raise ValueError(f"tensor name {name!r} contains whitespace")
        lines.append(f"tensor {name} {arr.shape[0]} {arr.shape[1]}")
        lines.extend(repr(float(x)) for x in arr.reshape(-1))
    return "\n".join(lines) + "\n"


def load_tensors(text: str) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    tokens = iter(text.split("\n"))
    for line in tokens:
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] != "tensor" or len(parts) != 4:
            raise ValueError(f"expected tensor header, got {line!r}")
        name, rows, cols = parts[1], int(parts[2]), int(parts[3])
        vals = [float(next(tokens)) for _ in range(rows * cols)]
        out[name] = np.array(vals, dtype=np.float64).reshape(rows, cols)
    return out

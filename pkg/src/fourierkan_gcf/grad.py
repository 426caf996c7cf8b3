"""Tape-based reverse-mode differentiation over float64 numpy arrays.

Every primitive in this module computes its forward value eagerly and, if a
:class:`Tape` is active, appends a record holding the vector-Jacobian product
closure. :func:`backward` replays the tape in reverse recording order.

Example::

    w = Parameter([1.0, 0.0], name="w")
    with Tape() as tape:
        tape.register(w)
        loss = neg_log_sigmoid(dot(w, Tensor([1.0, 1.0])))
    grads = backward(loss, tape)
"""

from __future__ import annotations

import contextvars
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested primitive."""


class ContractError(ValueError):
    """A precondition of an operation was violated."""


_ACTIVE_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "fourierkan_gcf_active_tape", default=None
)


class Tensor:
    """A float64 array, optionally produced by a recorded primitive."""

    __array_priority__ = 100

    def __init__(self, data, *, _tape: "Tape | None" = None):
        self.data = np.array(data, dtype=np.float64)
        self._tape = _tape

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(shape={self.shape})"

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

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """A trainable leaf tensor. Identity (not value) keys gradient maps."""

    def __init__(self, data, name: str = ""):
        super().__init__(data)
        self.name = name

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


@dataclass
class _Record:
    output: Tensor
    inputs: tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


@dataclass
class Tape:
    """Ordered record of primitive calls plus a parameter registry.

    A tape is single-writer. Use it as a context manager to make it the
    active record for the current context.
    """

    records: list[_Record] = field(default_factory=list)
    params: list[Parameter] = field(default_factory=list)
    _token: contextvars.Token | None = field(default=None, repr=False)

    def register(self, *params: Parameter) -> None:
        for p in params:
            if not isinstance(p, Parameter):
                raise ContractError(f"only Parameters can be registered, got {type(p).__name__}")
            if not any(p is q for q in self.params):
                self.params.append(p)

    def __enter__(self) -> "Tape":
        if self._token is not None:
            raise ContractError("tape is already active")
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(value: np.ndarray, inputs: Sequence[Tensor], vjp) -> Tensor:
    tape = _ACTIVE_TAPE.get()
    out = Tensor(value, _tape=tape)
    if tape is not None:
        tape.records.append(_Record(out, tuple(inputs), vjp))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"cannot broadcast {a.shape} with {b.shape}") from exc


# ---------------------------------------------------------------------------
# elementwise primitives


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    sa, sb = a.shape, b.shape
    return _emit(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    sa, sb = a.shape, b.shape
    return _emit(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    """Hadamard product with numpy broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    av, bv = a.data, b.data
    return _emit(
        av * bv,
        (a, b),
        lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
    )


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _emit(a.data * c, (a,), lambda g: (g * c,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.data)
    return _emit(s, (a,), lambda g: (g * s * (1.0 - s),))


def silu(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    s = _sigmoid(x)
    return _emit(x * s, (a,), lambda g: (g * (s + x * s * (1.0 - s)),))


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    x = a.data
    d = np.where(x > 0, 1.0, slope)
    return _emit(x * d, (a,), lambda g: (g * d,))


def cos(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return _emit(np.cos(x), (a,), lambda g: (-g * np.sin(x),))


def sin(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return _emit(np.sin(x), (a,), lambda g: (g * np.cos(x),))


def neg_log_sigmoid(a) -> Tensor:
    """-ln sigmoid(x), evaluated as softplus(-x) for stability."""
    a = as_tensor(a)
    x = a.data
    val = np.logaddexp(0.0, -x)
    return _emit(val, (a,), lambda g: (g * (_sigmoid(x) - 1.0),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# reductions and shape manipulation


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    return _emit(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def sum_squares(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return _emit(np.asarray(np.sum(x * x)), (a,), lambda g: (2.0 * g * x,))


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    try:
        val = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {old} to {tuple(shape)}") from exc
    return _emit(val, (a,), lambda g: (g.reshape(old),))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along the feature (last) axis by default."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    if any(t.ndim == 0 for t in tensors):
        raise ShapeError("concat does not accept scalars")
    try:
        val = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _emit(val, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)))


def mean_of(tensors: Sequence[Tensor]) -> Tensor:
    """Elementwise mean over a list of same-shape tensors."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("mean_of needs at least one tensor")
    shape = tensors[0].shape
    if any(t.shape != shape for t in tensors):
        raise ShapeError(f"mean_of needs equal shapes, got {[t.shape for t in tensors]}")
    n = len(tensors)
    total = tensors[0].data.copy()
    for t in tensors[1:]:
        total = total + t.data
    return _emit(total / n, tensors, lambda g: tuple(g / n for _ in range(n)))


def take_rows(a, index) -> Tensor:
    """Gather rows ``a[index]``; backward scatter-adds in index order."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    if a.ndim < 1:
        raise ShapeError("take_rows needs at least a vector")
    if index.size and (index.min() < 0 or index.max() >= a.shape[0]):
        raise ShapeError(f"row index out of range for {a.shape[0]} rows")
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, index, g)
        return (out,)

    return _emit(a.data[index], (a,), vjp)


def rowdot(a, b) -> Tensor:
    """Row-wise dot products of two (n x d) tensors, giving shape (n,)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or a.shape != b.shape:
        raise ShapeError(f"rowdot needs equal 2-D shapes, got {a.shape} and {b.shape}")
    av, bv = a.data, b.data
    return _emit(
        np.einsum("nd,nd->n", av, bv),
        (a, b),
        lambda g: (g[:, None] * bv, g[:, None] * av),
    )


def dot(a, b) -> Tensor:
    """Inner product of two vectors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"dot needs equal 1-D shapes, got {a.shape} and {b.shape}")
    av, bv = a.data, b.data
    return _emit(np.asarray(av @ bv), (a, b), lambda g: (g * bv, g * av))


def matmul(a, b) -> Tensor:
    """Dense product of 2-D tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    av, bv = a.data, b.data
    return _emit(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D tensor, got {a.shape}")
    return _emit(a.data.T.copy(), (a,), lambda g: (g.T,))


def custom(value: np.ndarray, inputs: Sequence[Tensor], vjp) -> Tensor:
    """Record a caller-defined primitive with an explicit VJP."""
    return _emit(np.asarray(value, dtype=np.float64), [as_tensor(t) for t in inputs], vjp)


# ---------------------------------------------------------------------------
# sparse operator


@dataclass(frozen=True)
class SparseMatrix:
    """Compressed sparse row matrix with constant float64 values."""

    rows: int
    cols: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)
        if indptr.shape != (self.rows + 1,) or indptr[0] != 0:
            raise ContractError("row pointer must have length rows+1 and start at 0")
        if np.any(np.diff(indptr) < 0):
            raise ContractError("row pointer must be nondecreasing")
        if indptr[-1] != indices.size or indices.size != values.size:
            raise ContractError("index/value arrays disagree with row pointer")
        if indices.size:
            if indices.min() < 0 or indices.max() >= self.cols:
                raise ContractError("column index out of range")
            row_of = np.repeat(np.arange(self.rows), np.diff(indptr))
            same_row = row_of[1:] == row_of[:-1]
            if np.any(np.diff(indices)[same_row] <= 0):
                raise ContractError("column indices must be strictly increasing within a row")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @classmethod
    def from_coo(cls, rows: int, cols: int, r, c, v) -> "SparseMatrix":
        """Build from coordinate triples; duplicates are not allowed."""
        r = np.asarray(r, dtype=np.int64)
        c = np.asarray(c, dtype=np.int64)
        v = np.asarray(v, dtype=np.float64)
        order = np.lexsort((c, r))
        r, c, v = r[order], c[order], v[order]
        indptr = np.zeros(rows + 1, dtype=np.int64)
        np.add.at(indptr, r + 1, 1)
        return cls(rows, cols, np.cumsum(indptr), c, v)

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        r, c = np.nonzero(dense)
        return cls.from_coo(dense.shape[0], dense.shape[1], r, c, dense[r, c])

    def with_values(self, values) -> "SparseMatrix":
        return SparseMatrix(self.rows, self.cols, self.indptr, self.indices, values)

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.rows), np.diff(self.indptr))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_ids(), self.indices] = self.values
        return out

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.indices, self.indptr), shape=self.shape)


def sparse_dense_matmul(A: SparseMatrix, X) -> Tensor:
    """``A @ X`` for a constant sparse ``A``; differentiable in ``X`` only."""
    X = as_tensor(X)
    if X.ndim != 2:
        raise ShapeError(f"dense operand must be 2-D, got {X.shape}")
    if A.cols != X.shape[0]:
        raise ShapeError(f"sparse {A.shape} @ dense {X.shape}: inner dims differ")
    mat = A.to_scipy()
    return _emit(np.asarray(mat @ X.data), (X,), lambda g: (np.asarray(mat.T @ g),))


# ---------------------------------------------------------------------------
# reverse pass


def backward(loss: Tensor, tape: Tape) -> dict[Parameter, np.ndarray]:
    """Return d(loss)/d(p) for every parameter registered on ``tape``.

    Registered parameters that do not feed the loss get an exact zero array.
    """
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        raise ContractError("backward needs a scalar loss tensor")
    if loss._tape is not tape:
        raise ContractError("loss was not produced under this tape")
    adjoints: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for rec in reversed(tape.records):
        g = adjoints.pop(id(rec.output), None)
        if g is None:
            continue
        for inp, gi in zip(rec.inputs, rec.vjp(g)):
            if gi is None:
                continue
            key = id(inp)
            if key in adjoints:
                adjoints[key] = adjoints[key] + gi
            else:
                adjoints[key] = np.array(gi, dtype=np.float64).reshape(inp.shape)
    return {p: adjoints.get(id(p), np.zeros_like(p.data)) for p in tape.params}


def finite_difference_check(
    f: Callable[[], Tensor],
    params: Iterable[Parameter],
    eps: float = 1e-5,
) -> float:
    """Max relative gap between tape gradients and central differences.

    ``f`` rebuilds the scalar objective from the current parameter values.
    The error per entry is ``|analytic - numeric| / max(1, |analytic|)``.
    """
    if not eps > 0:
        raise ContractError("eps must be positive")
    params = list(params)
    with Tape() as tape:
        tape.register(*params)
        loss = f()
    analytic = backward(loss, tape)
    base = loss.item()
    if _value(f) != base:
        raise ContractError("objective is not deterministic; fix dropout masks or seeds")

    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        grad = analytic[p].reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = _value(f)
            flat[k] = orig - eps
            down = _value(f)
            flat[k] = orig
            numeric = (up - down) / (2.0 * eps)
            err = abs(grad[k] - numeric) / max(1.0, abs(grad[k]))
            if math.isnan(err):
                return math.inf
            worst = max(worst, err)
    return worst


def _value(f: Callable[[], Tensor]) -> float:
    token = _ACTIVE_TAPE.set(None)
    try:
        return as_tensor(f()).item()
    finally:
        _ACTIVE_TAPE.reset(token)

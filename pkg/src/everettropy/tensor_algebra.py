"""Dense complex operators on labelled tensor-product spaces.

Basis ordering is row-major over subsystems in layout order, so the first
subsystem is the most significant digit of a basis index.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

DEFAULT_TOL = 1e-10
DEFAULT_MAX_DIM = 4096
TOL_ENV_VAR = "EVERETTROPY_TOL"


def default_tol() -> float:
    """Operator tolerance, overridable through ``EVERETTROPY_TOL``."""
    raw = os.environ.get(TOL_ENV_VAR)
    if raw is None or raw == "":
        return DEFAULT_TOL
    try:
        tol = float(raw)
    except ValueError:
        raise ValidationError(f"not a number: {raw!r}", field=TOL_ENV_VAR) from None
    if not tol > 0:
        raise ValidationError("must be positive", field=TOL_ENV_VAR)
    return tol


def _resolve_tol(tol):
    return default_tol() if tol is None else float(tol)


@dataclass(frozen=True)
class SystemLayout:
    """Ordered labelled subsystem dimensions."""

    subsystems: tuple[tuple[str, int], ...]
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        subs = tuple((str(label), int(dim)) for label, dim in self.subsystems)
        object.__setattr__(self, "subsystems", subs)
        labels = [label for label, _ in subs]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate labels in {labels}", field="layout")
        for label, dim in subs:
            if dim < 1:
                raise ValidationError(f"subsystem {label!r} has dim {dim} < 1", field="layout")
        if self.total_dim > self.max_dim:
            raise ValidationError(
                f"total dimension {self.total_dim} exceeds cap {self.max_dim}", field="layout"
            )

    @classmethod
    def of(cls, *pairs, **kwargs) -> "SystemLayout":
        """``SystemLayout.of(("A", 2), ("B", 3))``."""
        return cls(tuple(pairs), **kwargs)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.subsystems else 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown subsystem label {label!r}", field="subsystem") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def select(self, labels: Iterable[str]) -> "SystemLayout":
        """Sub-layout with ``labels`` kept in this layout's order."""
        wanted = set(labels)
        for label in wanted:
            self.index(label)
        return SystemLayout(tuple(s for s in self.subsystems if s[0] in wanted), self.max_dim)

    def __add__(self, other: "SystemLayout") -> "SystemLayout":
        overlap = set(self.labels) & set(other.labels)
        if overlap:
            raise ValidationError(f"overlapping labels {sorted(overlap)}", field="layout")
        return SystemLayout(self.subsystems + other.subsystems, max(self.max_dim, other.max_dim))


def single(label: str, dim: int) -> SystemLayout:
    return SystemLayout(((label, dim),))


@dataclass(frozen=True)
class OperatorFlags:
    hermitian: bool
    unitary: bool
    projector: bool
    normal: bool


class Operator:
    """Immutable dense complex matrix acting on a :class:`SystemLayout`."""

    __slots__ = ("layout", "matrix")

    def __init__(self, layout: SystemLayout, matrix):
        m = np.array(matrix, dtype=complex)
        n = layout.total_dim
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"matrix must be square, got shape {m.shape}", field="matrix")
        if m.shape[0] != n:
            raise ValidationError(
                f"matrix dimension {m.shape[0]} does not match layout dimension {n}", field="matrix"
            )
        m.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    @classmethod
    def identity(cls, layout: SystemLayout) -> "Operator":
        return cls(layout, np.eye(layout.total_dim))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def flags(self, tol=None) -> OperatorFlags:
        return operator_flags(self, tol)

    def _check_layout(self, other: "Operator"):
        if other.layout.subsystems != self.layout.subsystems:
            raise ValidationError(
                f"layout mismatch: {self.layout.labels} vs {other.layout.labels}", field="layout"
            )

    def __matmul__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        self._check_layout(other)
        return Operator(self.layout, self.matrix @ other.matrix)

    def __add__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        self._check_layout(other)
        return Operator(self.layout, self.matrix + other.matrix)

    def __sub__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        self._check_layout(other)
        return Operator(self.layout, self.matrix - other.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, Operator):
            return NotImplemented
        return Operator(self.layout, self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return Operator(self.layout, -self.matrix)

    def allclose(self, other: "Operator", tol=None) -> bool:
        self._check_layout(other)
        return bool(np.max(np.abs(self.matrix - other.matrix), initial=0.0) <= _resolve_tol(tol))

    def __repr__(self):
        return f"Operator(layout={list(self.layout.subsystems)}, dim={self.dim})"


def as_operator(obj, layout: SystemLayout | None = None) -> Operator:
    if isinstance(obj, Operator):
        return obj
    m = np.asarray(obj, dtype=complex)
    if layout is None:
        layout = single("S", m.shape[0])
    return Operator(layout, m)


def _embed_single(layout: SystemLayout, subsystem: str, local: np.ndarray) -> np.ndarray:
    k = layout.index(subsystem)
    dims = layout.dims
    left = int(np.prod(dims[:k], dtype=np.int64))
    right = int(np.prod(dims[k + 1:], dtype=np.int64))
    return np.kron(np.kron(np.eye(left), local), np.eye(right))


def local_operator(layout: SystemLayout, subsystem: str, local) -> Operator:
    """Operator acting as ``local`` on one subsystem and identity elsewhere."""
    local = np.asarray(local, dtype=complex)
    d = layout.dim(subsystem)
    if local.shape != (d, d):
        raise ValidationError(
            f"local operator shape {local.shape} does not fit subsystem {subsystem!r} of dim {d}",
            field="operator",
        )
    return Operator(layout, _embed_single(layout, subsystem, local))


def matrix_unit(layout: SystemLayout, subsystem: str, a: int, b: int) -> Operator:
    """|a><b| on ``subsystem`` tensored with identity on the rest."""
    d = layout.dim(subsystem)
    if not (0 <= a < d and 0 <= b < d):
        raise ValidationError(f"indices ({a}, {b}) out of range for dim {d}", field="index")
    local = np.zeros((d, d), dtype=complex)
    local[a, b] = 1.0
    return Operator(layout, _embed_single(layout, subsystem, local))


def tensor(*ops: Operator) -> Operator:
    """Kronecker product; the result layout concatenates the factor layouts."""
    if not ops:
        raise ValidationError("need at least one operator", field="operators")
    layout = reduce(lambda x, y: x + y, (op.layout for op in ops))
    matrix = reduce(np.kron, (op.matrix for op in ops))
    return Operator(layout, matrix)


def reorder(op: Operator, labels: Sequence[str]) -> Operator:
    """Permute tensor factors so the layout follows ``labels``."""
    layout = op.layout
    perm = [layout.index(label) for label in labels]
    if sorted(perm) != list(range(len(layout.dims))):
        raise ValidationError(f"{list(labels)} is not a permutation of {layout.labels}", field="labels")
    if perm == list(range(len(perm))):
        return op
    dims = layout.dims
    n = len(dims)
    t = op.matrix.reshape(dims + dims)
    t = t.transpose(perm + [p + n for p in perm])
    new_layout = SystemLayout(tuple(layout.subsystems[p] for p in perm), layout.max_dim)
    return Operator(new_layout, t.reshape(op.matrix.shape))


def embed(op: Operator, layout: SystemLayout) -> Operator:
    """Extend ``op`` by identity onto the remaining subsystems of ``layout``."""
    for label, dim in op.layout.subsystems:
        if layout.dim(label) != dim:
            raise ValidationError(f"subsystem {label!r} has mismatched dimension", field="layout")
    rest = [s for s in layout.subsystems if s[0] not in op.layout.labels]
    if not rest:
        return reorder(op, layout.labels)
    rest_layout = SystemLayout(tuple(rest), layout.max_dim)
    return reorder(tensor(op, Operator.identity(rest_layout)), layout.labels)


def partial_trace(op: Operator, keep: Iterable[str]) -> Operator:
    """Trace out every subsystem not in ``keep``; kept factors stay in layout order."""
    keep = list(keep)
    if not keep:
        raise ValidationError("keep-set must be nonempty", field="keep")
    layout = op.layout
    kept = sorted({layout.index(label) for label in keep})
    dims = layout.dims
    n = len(dims)
    traced = [i for i in range(n) if i not in kept]
    t = op.matrix.reshape(dims + dims)
    # move traced axes to the back, pairing row/column copies
    t = t.transpose(kept + [k + n for k in kept] + traced + [k + n for k in traced])
    dk = int(np.prod([dims[i] for i in kept], dtype=np.int64))
    dt = int(np.prod([dims[i] for i in traced], dtype=np.int64))
    t = t.reshape(dk, dk, dt, dt)
    out = np.einsum("ijkk->ij", t)
    return Operator(SystemLayout(tuple(layout.subsystems[i] for i in kept), layout.max_dim), out)


def operator_flags(op: Operator, tol=None) -> OperatorFlags:
    """Classify ``op`` by entrywise-max residuals of the defining identities."""
    tol = _resolve_tol(tol)
    if not tol > 0:
        raise ValidationError("tolerance must be positive", field="tol")
    m = op.matrix
    md = m.conj().T
    eye = np.eye(m.shape[0])

    def small(x):
        return bool(np.max(np.abs(x), initial=0.0) <= tol)

    hermitian = small(m - md)
    return OperatorFlags(
        hermitian=hermitian,
        unitary=small(md @ m - eye) and small(m @ md - eye),
        projector=hermitian and small(m @ m - m),
        normal=small(m @ md - md @ m),
    )


def coefficients_over_matrix_units(op: Operator, subsystem: str) -> np.ndarray:
    """Expansion of ``op`` over the matrix units of ``subsystem``.

    For a single-subsystem layout the result has shape ``(d, d)`` and
    ``op = sum_ab beta[a, b] S_ab``.  Otherwise it has shape ``(d, d, r, r)``
    where ``beta[a, b]`` is the residual operator on the remaining subsystems
    (in layout order) multiplying ``S_ab``.
    """
    layout = op.layout
    d = layout.dim(subsystem)
    rest = [label for label in layout.labels if label != subsystem]
    t = reorder(op, [subsystem] + rest).matrix
    if not rest:
        return t.copy()
    r = t.shape[0] // d
    return t.reshape(d, r, d, r).transpose(0, 2, 1, 3).copy()


def reconstruct_from_matrix_units(coeffs: np.ndarray, layout: SystemLayout, subsystem: str) -> Operator:
    """Inverse of :func:`coefficients_over_matrix_units`."""
    coeffs = np.asarray(coeffs, dtype=complex)
    d = layout.dim(subsystem)
    rest = [label for label in layout.labels if label != subsystem]
    if not rest:
        return Operator(layout, coeffs)
    r = coeffs.shape[2]
    flat = coeffs.transpose(0, 2, 1, 3).reshape(d * r, d * r)
    ordered = SystemLayout(
        ((subsystem, d),) + tuple(s for s in layout.subsystems if s[0] != subsystem), layout.max_dim
    )
    return reorder(Operator(ordered, flat), layout.labels)


def bipartite_view(op: Operator, left: Sequence[str], right: Sequence[str] | None = None,
                   names=("A", "B")) -> Operator:
    """Regroup subsystems into two factors, ``left`` then ``right``.

    The grouped factors keep their internal layout order.  Used to flatten
    many-part states into a two-part cut.
    """
    layout = op.layout
    left = [label for label in layout.labels if label in set(left)]
    if right is None:
        right = [label for label in layout.labels if label not in set(left)]
    else:
        right = [label for label in layout.labels if label in set(right)]
    if not left or not right or set(left) & set(right) or len(left) + len(right) != len(layout.labels):
        raise ValidationError(
            f"cut {left}|{right} does not partition {list(layout.labels)}", field="cut"
        )
    reordered = reorder(op, left + right)
    dl = int(np.prod([layout.dim(label) for label in left], dtype=np.int64))
    dr = int(np.prod([layout.dim(label) for label in right], dtype=np.int64))
    return Operator(SystemLayout(((names[0], dl), (names[1], dr)), layout.max_dim), reordered.matrix)


def operator_schmidt_rank(op: Operator, left: Sequence[str], tol=None) -> int:
    """Number of operator-Schmidt coefficients above ``tol`` (relative) across the cut."""
    tol = _resolve_tol(tol)
    view = bipartite_view(op, left)
    da, db = view.layout.dims
    realigned = view.matrix.reshape(da, db, da, db).transpose(0, 2, 1, 3).reshape(da * da, db * db)
    s = np.linalg.svd(realigned, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * max(1.0, s[0])))

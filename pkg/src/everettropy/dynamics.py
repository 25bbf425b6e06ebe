"""Unitary evolution, measurement unitaries, branching detection and dephasing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import ValidationError
from .states import DensityState, Observable
from .tensor_algebra import (
    Operator,
    SystemLayout,
    _embed_single,
    _resolve_tol,
    operator_flags,
)


def _require_unitary(u: Operator, tol=None):
    if not operator_flags(u, tol).unitary:
        raise ValidationError("operator is not unitary", field="unitary")


def evolve_heisenberg(obs: Operator, u: Operator, tol=None) -> Operator:
    """``U^dag A U``."""
    obs._check_layout(u)
    _require_unitary(u, tol)
    return Operator(obs.layout, u.matrix.conj().T @ obs.matrix @ u.matrix)


def evolve_schrodinger(state: DensityState, u: Operator, tol=None) -> DensityState:
    """``U rho U^dag``."""
    state.op._check_layout(u)
    _require_unitary(u, tol)
    m = u.matrix @ state.matrix @ u.matrix.conj().T
    return DensityState(Operator(state.layout, m), tol=tol)


@dataclass(frozen=True)
class EvolutionStep:
    unitary: Operator
    picture: Literal["heisenberg", "schrodinger"] = "schrodinger"
    t_from: float = 0.0
    t_to: float = 1.0

    def __post_init__(self):
        if self.picture not in ("heisenberg", "schrodinger"):
            raise ValidationError(f"unknown picture {self.picture!r}", field="picture")
        if self.t_to == self.t_from:
            raise ValidationError("t_to must differ from t_from", field="t_to")
        _require_unitary(self.unitary)

    def apply(self, target):
        if self.picture == "schrodinger":
            return evolve_schrodinger(target, self.unitary)
        return evolve_heisenberg(target, self.unitary)


def compose(*unitaries: Operator) -> Operator:
    """Product for unitaries applied in the given (chronological) order."""
    if not unitaries:
        raise ValidationError("need at least one unitary", field="unitaries")
    out = unitaries[0]
    for u in unitaries[1:]:
        out = u @ out
    return out


def _check_permutation(perm, n: int, field: str = "permutation") -> tuple[int, ...]:
    perm = tuple(int(x) for x in perm)
    if sorted(perm) != list(range(n)):
        raise ValidationError(f"{list(perm)} is not a bijection on 0..{n - 1}", field=field)
    return perm


def _basis_matrix(basis, d: int) -> np.ndarray:
    if basis is None:
        return np.eye(d, dtype=complex)
    b = np.asarray(basis, dtype=complex)
    if b.shape != (d, d) or np.max(np.abs(b.conj().T @ b - np.eye(d))) > 1e-10:
        raise ValidationError("basis must be a unitary matrix whose columns are the basis vectors", field="basis")
    return b


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """``sum_b |perm[b]><b|``."""
    n = len(perm)
    m = np.zeros((n, n))
    m[list(perm), list(range(n))] = 1.0
    return m


def shift_permutation(n: int, k: int) -> tuple[int, ...]:
    return tuple((b + k) % n for b in range(n))


def permutation_unitary(layout: SystemLayout, subsystem: str, perm: Sequence[int], basis=None) -> Operator:
    """``sum_b |v_perm(b)><v_b|`` on ``subsystem``, where ``v`` are the columns of ``basis``."""
    d = layout.dim(subsystem)
    perm = _check_permutation(perm, d)
    v = _basis_matrix(basis, d)
    local = v @ permutation_matrix(perm) @ v.conj().T
    return Operator(layout, _embed_single(layout, subsystem, local))


def controlled_unitary(layout: SystemLayout, control: str, target: str, locals_, basis=None) -> Operator:
    """``sum_a P_a(control) (x) W_a(target)`` with ``P_a`` the projectors onto ``basis`` columns."""
    if control == target:
        raise ValidationError("control and target must differ", field="target")
    dc = layout.dim(control)
    dt = layout.dim(target)
    if len(locals_) != dc:
        raise ValidationError(f"need {dc} target operators, got {len(locals_)}", field="code")
    v = _basis_matrix(basis, dc)
    total = np.zeros((layout.total_dim,) * 2, dtype=complex)
    for a in range(dc):
        w = np.asarray(locals_[a], dtype=complex)
        if w.shape != (dt, dt):
            raise ValidationError(f"target operator {a} has shape {w.shape}", field="code")
        proj = np.outer(v[:, a], v[:, a].conj())
        total += _embed_single(layout, control, proj) @ _embed_single(layout, target, w)
    return Operator(layout, total)


def controlled_permutation(layout: SystemLayout, control: str, target: str,
                           perms: Sequence[Sequence[int]], basis=None) -> Operator:
    """Apply permutation ``perms[a]`` to ``target`` (computational basis) when ``control`` is in state ``a``."""
    dt = layout.dim(target)
    mats = [permutation_matrix(_check_permutation(p, dt, "code")) for p in perms]
    return controlled_unitary(layout, control, target, mats, basis)


def perfect_measurement_unitary(layout: SystemLayout, source: str, target: str, basis=None) -> Operator:
    """``|a, b> -> |a, (a + b) mod N>`` with ``a`` read in ``basis`` on ``source``."""
    n = layout.dim(source)
    if layout.dim(target) != n:
        raise ValidationError(
            f"source dim {n} != target dim {layout.dim(target)}", field="target"
        )
    return controlled_permutation(layout, source, target, [shift_permutation(n, a) for a in range(n)], basis)


def detect_branching(u: Operator, obs: Observable, tol=None) -> tuple[int, ...] | None:
    """Permutation ``pi`` with ``U P_a U^dag = P_pi(a)`` for every projector, else ``None``.

    Projector indices follow ``obs.eigenvalues`` (ascending).  Equivalently
    ``U^dag P_pi(a) U = P_a``: the evolution carries branch ``a`` onto
    branch ``pi(a)``.
    """
    tol = _resolve_tol(tol)
    u._check_layout(obs.op)
    _require_unitary(u, tol)
    if not obs.nondegenerate:
        raise ValidationError("ambiguous projector matching: observable is degenerate", field="observable")
    um = u.matrix
    projs = [p.matrix for p in obs.projectors]
    perm = []
    for p in projs:
        moved = um @ p @ um.conj().T
        hits = [b for b, q in enumerate(projs) if np.max(np.abs(moved - q)) <= tol]
        if len(hits) != 1:
            return None
        perm.append(hits[0])
    if len(set(perm)) != len(perm):
        return None
    return tuple(perm)


def check_projective_family(projectors: Sequence[Operator], tol=None):
    tol = _resolve_tol(tol)
    if not projectors:
        raise ValidationError("empty projector set", field="projectors")
    layout = projectors[0].layout
    n = layout.total_dim
    total = np.zeros((n, n), dtype=complex)
    for i, p in enumerate(projectors):
        p._check_layout(projectors[0])
        if not operator_flags(p, tol).projector:
            raise ValidationError(f"element {i} is not an orthogonal projector", field="projectors")
        for j in range(i):
            if np.max(np.abs(p.matrix @ projectors[j].matrix)) > tol:
                raise ValidationError(f"projectors {j} and {i} are not orthogonal", field="projectors")
        total += p.matrix
    if np.max(np.abs(total - np.eye(n))) > tol:
        raise ValidationError("projectors do not sum to the identity", field="projectors")


def basis_projectors(layout: SystemLayout, basis) -> list[Operator]:
    b = np.asarray(basis, dtype=complex)
    return [Operator(layout, np.outer(b[:, k], b[:, k].conj())) for k in range(b.shape[1])]


def dephase(state: DensityState, projectors: Sequence[Operator], tol=None) -> DensityState:
    """``sum_c P_c rho P_c``."""
    check_projective_family(projectors, tol)
    state.op._check_layout(projectors[0])
    m = sum(p.matrix @ state.matrix @ p.matrix for p in projectors)
    return DensityState(Operator(state.layout, m), tol=tol)

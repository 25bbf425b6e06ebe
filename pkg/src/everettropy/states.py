"""Density states, observables, Born-rule games, entropy and the product-basis form check."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .tensor_algebra import (
    Operator,
    SystemLayout,
    _resolve_tol,
    bipartite_view,
    operator_flags,
    partial_trace,
    single,
)

PSD_TOL = 1e-9
PURE_TOL = 1e-9
DEG_TOL = 1e-8
IMAG_DISCARD = 1e-12
IMAG_ERROR = 1e-9


def _hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


class DensityState:
    """Positive semidefinite unit-trace operator.

    Eigenvalues in ``[-PSD_TOL, 0)`` are treated as roundoff: they are
    clipped to zero and the spectrum renormalised.  Anything more negative
    is rejected.
    """

    __slots__ = ("op", "_spectrum")

    def __init__(self, op: Operator, tol=None):
        tol = _resolve_tol(tol)
        m = op.matrix
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            raise ValidationError("state is not Hermitian", field="state")
        tr = np.trace(m)
        if abs(tr - 1.0) > tol:
            raise ValidationError(f"state trace {tr.real:.12g} differs from 1", field="state")
        w = np.linalg.eigvalsh(_hermitian_part(m))
        if w.size and w[0] < -PSD_TOL:
            raise ValidationError(f"state has negative eigenvalue {w[0]:.3e}", field="state")
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "_spectrum", w)

    def __setattr__(self, name, value):
        raise AttributeError("DensityState is immutable")

    @classmethod
    def from_matrix(cls, matrix, layout: SystemLayout | None = None, tol=None) -> "DensityState":
        m = np.asarray(matrix, dtype=complex)
        if layout is None:
            layout = single("S", m.shape[0])
        return cls(Operator(layout, m), tol=tol)

    @classmethod
    def pure(cls, vector, layout: SystemLayout | None = None) -> "DensityState":
        v = np.asarray(vector, dtype=complex).ravel()
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValidationError("zero vector", field="vector")
        v = v / norm
        return cls.from_matrix(np.outer(v, v.conj()), layout)

    @classmethod
    def maximally_mixed(cls, layout: SystemLayout) -> "DensityState":
        n = layout.total_dim
        return cls(Operator(layout, np.eye(n) / n))

    @classmethod
    def diagonal(cls, probs, layout: SystemLayout | None = None) -> "DensityState":
        p = np.asarray(probs, dtype=float).ravel()
        return cls.from_matrix(np.diag(p), layout)

    @property
    def layout(self) -> SystemLayout:
        return self.op.layout

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def spectrum(self) -> np.ndarray:
        """Clipped, renormalised eigenvalues in ascending order."""
        return self._spectrum

    def is_pure(self) -> bool:
        return von_neumann_entropy(self) <= PURE_TOL

    def __repr__(self):
        return f"DensityState(layout={list(self.layout.subsystems)})"


def _group_eigenvalues(values: np.ndarray, tol: float) -> list[list[int]]:
    """Cluster sorted real eigenvalues whose consecutive gaps are within ``tol``."""
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        if groups and v - values[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


@dataclass(frozen=True)
class Observable:
    """Hermitian operator with its spectral decomposition.

    ``eigenvalues`` are distinct and ascending; ``projectors[k]`` projects
    onto the eigenspace of ``eigenvalues[k]``.
    """

    op: Operator
    eigenvalues: tuple[float, ...]
    projectors: tuple[Operator, ...] = field(repr=False)

    @classmethod
    def from_operator(cls, op: Operator, tol=None, deg_tol: float = DEG_TOL) -> "Observable":
        if not operator_flags(op, tol).hermitian:
            raise ValidationError("observable must be Hermitian", field="observable")
        w, v = np.linalg.eigh(_hermitian_part(op.matrix))
        values, projectors = [], []
        for group in _group_eigenvalues(w, deg_tol):
            vecs = v[:, group]
            values.append(float(np.mean(w[group])))
            projectors.append(Operator(op.layout, vecs @ vecs.conj().T))
        return cls(op, tuple(values), tuple(projectors))

    @classmethod
    def from_basis(cls, layout: SystemLayout, basis=None, eigenvalues: Sequence[float] | None = None) -> "Observable":
        """Nondegenerate observable diagonal in ``basis`` (columns).

        Default eigenvalues are ``0, 1, ..., n-1`` so projector ``k`` is the
        ``k``-th basis vector.
        """
        n = layout.total_dim
        basis = np.eye(n, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
        if eigenvalues is None:
            eigenvalues = np.arange(n, dtype=float)
        eigenvalues = np.asarray(eigenvalues, dtype=float)
        if basis.shape != (n, n) or eigenvalues.shape != (n,):
            raise ValidationError("basis/eigenvalue shape mismatch", field="basis")
        if np.max(np.abs(basis.conj().T @ basis - np.eye(n))) > _resolve_tol(None):
            raise ValidationError("basis is not orthonormal", field="basis")
        order = np.argsort(eigenvalues, kind="stable")
        if np.any(np.diff(eigenvalues[order]) <= DEG_TOL):
            raise ValidationError("eigenvalues must be distinct", field="eigenvalues")
        projectors = tuple(
            Operator(layout, np.outer(basis[:, k], basis[:, k].conj())) for k in order
        )
        matrix = (basis * eigenvalues) @ basis.conj().T
        return cls(Operator(layout, matrix), tuple(float(eigenvalues[k]) for k in order), projectors)

    @property
    def layout(self) -> SystemLayout:
        return self.op.layout

    @property
    def nondegenerate(self) -> bool:
        return all(abs(np.trace(p.matrix).real - 1.0) < 0.5 for p in self.projectors)


PayoffFn = Callable[[float], float] | Mapping[float, float]


@dataclass(frozen=True)
class QuantumGame:
    """Observable, relative state and a payoff over the observable's eigenvalues."""

    observable: Observable
    state: DensityState
    payoff: PayoffFn

    def payoff_for(self, eigenvalue: float) -> float:
        if callable(self.payoff):
            return float(self.payoff(eigenvalue))
        for key, value in self.payoff.items():
            if abs(float(key) - eigenvalue) <= DEG_TOL:
                return float(value)
        raise ValidationError(f"payoff missing for eigenvalue {eigenvalue:.12g}", field="payoff")


def _real_trace(m: np.ndarray, what: str) -> float:
    t = np.trace(m)
    if abs(t.imag) > IMAG_ERROR:
        raise ValidationError(f"{what} has imaginary part {t.imag:.3e}", field="state")
    return float(t.real)


def expectation(state: DensityState, obs: Observable | Operator) -> float:
    """Born-rule expectation ``tr(rho A)``."""
    op = obs.op if isinstance(obs, Observable) else obs
    state.op._check_layout(op)
    return _real_trace(state.matrix @ op.matrix, "expectation")


def outcome_probabilities(state: DensityState, obs: Observable) -> np.ndarray:
    return np.array([_real_trace(state.matrix @ p.matrix, "probability") for p in obs.projectors])


def game_value(game: QuantumGame) -> float:
    """Sum over outcomes of payoff times Born weight."""
    game.state.op._check_layout(game.observable.op)
    probs = outcome_probabilities(game.state, game.observable)
    payoffs = [game.payoff_for(a) for a in game.observable.eigenvalues]
    return float(np.dot(payoffs, probs))


def entropy_of_spectrum(p) -> float:
    """Shannon entropy in bits with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


def von_neumann_entropy(state: DensityState) -> float:
    """``-tr(rho log2 rho)`` in bits."""
    s = entropy_of_spectrum(state.spectrum)
    return min(max(s, 0.0), float(np.log2(state.dim)))


def reduced_state(state: DensityState, keep) -> DensityState:
    if isinstance(keep, str):
        keep = [keep]
    return DensityState(partial_trace(state.op, keep))


@dataclass(frozen=True)
class SchmidtDecomposition:
    """``psi = sum_k coefficients[k] left[:, k] (x) right[:, k]``."""

    coefficients: np.ndarray
    left: np.ndarray
    right: np.ndarray
    left_labels: tuple[str, ...]
    right_labels: tuple[str, ...]

    @property
    def rank(self) -> int:
        return int(np.sum(self.coefficients > 1e-12))

    def vector(self) -> np.ndarray:
        return np.einsum("k,ik,jk->ij", self.coefficients, self.left, self.right).ravel()


def _cut_labels(layout: SystemLayout, cut) -> tuple[list[str], list[str]]:
    left, right = (list(cut[0]), list(cut[1])) if len(cut) == 2 and not isinstance(cut[0], str) else (list(cut), None)
    left = [label for label in layout.labels if label in set(left)]
    if right is None:
        right = [label for label in layout.labels if label not in set(left)]
    else:
        right = [label for label in layout.labels if label in set(right)]
    return left, right


def schmidt_decompose(pure_state: DensityState, cut) -> SchmidtDecomposition:
    """Schmidt decomposition of a pure state across ``cut``.

    ``cut`` is either ``(left_labels, right_labels)`` or just the left
    labels.  Each side keeps the layout's subsystem order.
    """
    if von_neumann_entropy(pure_state) > PURE_TOL:
        raise ValidationError("Schmidt decomposition needs a pure state", field="state")
    left, right = _cut_labels(pure_state.layout, cut)
    view = bipartite_view(pure_state.op, left, right)
    da, db = view.layout.dims
    w, v = np.linalg.eigh(_hermitian_part(view.matrix))
    psi = v[:, -1]
    u, s, vh = np.linalg.svd(psi.reshape(da, db), full_matrices=False)
    return SchmidtDecomposition(s, u, vh.T, tuple(left), tuple(right))


class FormVerdict(enum.Enum):
    CONFORMS = "conforms"
    VIOLATES = "violates"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class FormCheck:
    verdict: FormVerdict
    # columns are the product-basis vectors on each side, when conforming
    left_basis: np.ndarray | None = None
    right_basis: np.ndarray | None = None
    reason: str = ""


def _offdiag_max(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - np.diag(np.diag(m))), initial=0.0))


def _blocks(m: np.ndarray, da: int, db: int, side: str) -> list[np.ndarray]:
    t = m.reshape(da, db, da, db)
    if side == "left":
        # operators on A indexed by matrix elements on B
        return [t[:, k, :, l] for k in range(db) for l in range(db)]
    return [t[i, :, j, :] for i in range(da) for j in range(da)]


def _commutation_residual(ops: list[np.ndarray]) -> float:
    worst = 0.0
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            c = ops[i] @ ops[j] - ops[j] @ ops[i]
            worst = max(worst, float(np.max(np.abs(c), initial=0.0)))
    return worst


def _common_eigenbasis(ops: list[np.ndarray]) -> np.ndarray:
    # a generic real combination of the Hermitian generators separates every joint eigenspace
    rng = np.random.default_rng(0)
    d = ops[0].shape[0]
    h = np.zeros((d, d), dtype=complex)
    for x in ops:
        a, b = rng.standard_normal(2)
        h += a * (x + x.conj().T) + b * 1j * (x - x.conj().T)
    return np.linalg.eigh(h)[1]


def knowledge_form_check(state: DensityState, cut, tol=None, deg_tol: float = DEG_TOL,
                         band: float = 1e3) -> FormCheck:
    """Is the state diagonal in some product basis across ``cut``?

    Order of tests: diagonal in the computational product basis; then, if
    both marginals have nondegenerate spectra, diagonal in the product of
    the marginal eigenbases.  With degenerate marginals the product-basis
    search is settled by the commuting-block criterion: the state is
    diagonal in a product basis iff the operator blocks on each side form a
    commuting family.  Residuals that land in ``(tol, band * tol]`` are
    reported as indeterminate.
    """
    tol = _resolve_tol(tol)
    left, right = _cut_labels(state.layout, cut)
    view = bipartite_view(state.op, left, right)
    da, db = view.layout.dims
    m = view.matrix

    if _offdiag_max(m) <= tol:
        return FormCheck(FormVerdict.CONFORMS, np.eye(da, dtype=complex), np.eye(db, dtype=complex),
                         "diagonal in the computational product basis")

    rho_a = partial_trace(view, ["A"]).matrix
    rho_b = partial_trace(view, ["B"]).matrix
    wa, va = np.linalg.eigh(_hermitian_part(rho_a))
    wb, vb = np.linalg.eigh(_hermitian_part(rho_b))
    gaps_ok = (da < 2 or np.min(np.diff(wa)) > deg_tol) and (db < 2 or np.min(np.diff(wb)) > deg_tol)
    if gaps_ok:
        basis = np.kron(va, vb)
        resid = _offdiag_max(basis.conj().T @ m @ basis)
        if resid <= tol:
            return FormCheck(FormVerdict.CONFORMS, va, vb, "diagonal in the marginal eigenbases")
        return FormCheck(FormVerdict.VIOLATES, reason=f"off-diagonal residual {resid:.3e} in marginal eigenbases")

    left_blocks = _blocks(m, da, db, "left")
    right_blocks = _blocks(m, da, db, "right")
    resid = max(_commutation_residual(left_blocks), _commutation_residual(right_blocks))
    if resid > band * tol:
        return FormCheck(FormVerdict.VIOLATES, reason=f"block commutator residual {resid:.3e}")
    if resid > tol:
        return FormCheck(FormVerdict.INDETERMINATE, reason=f"block commutator residual {resid:.3e} within ambiguity band")
    va = _common_eigenbasis(left_blocks)
    vb = _common_eigenbasis(right_blocks)
    basis = np.kron(va, vb)
    if _offdiag_max(basis.conj().T @ m @ basis) > band * tol:
        return FormCheck(FormVerdict.INDETERMINATE, reason="common eigenbasis extraction failed")
    return FormCheck(FormVerdict.CONFORMS, va, vb, "commuting blocks on both sides")

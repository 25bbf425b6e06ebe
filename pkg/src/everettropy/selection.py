"""Selection between knowledge-bearing subsystems and the entropy it costs.

A selection step is a controlled permutation (an ideal classical comparison)
conjugated by small random local rotations that model imperfect knowledge of
which observable is actually being measured.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .dynamics import (
    controlled_permutation,
    evolve_schrodinger,
    perfect_measurement_unitary,
    shift_permutation,
)
from .errors import ValidationError
from .states import (
    DEG_TOL,
    DensityState,
    FormVerdict,
    _group_eigenvalues,
    knowledge_form_check,
    reduced_state,
    schmidt_decompose,
    von_neumann_entropy,
)
from .tensor_algebra import Operator, SystemLayout, _resolve_tol, bipartite_view, operator_flags

KNOWLEDGE_NORM_TOL = 1e-12


def knowledge_state(p, layout: SystemLayout) -> DensityState:
    """``sum_ab p[a, b] |a><a| (x) |b><b|`` on a two-subsystem layout."""
    p = np.asarray(p, dtype=float)
    if len(layout.subsystems) != 2:
        raise ValidationError("layout must have exactly two subsystems", field="layout")
    if p.shape != layout.dims:
        raise ValidationError(f"shape {p.shape} does not match dims {layout.dims}", field="p")
    if np.any(p < -KNOWLEDGE_NORM_TOL) or abs(p.sum() - 1.0) > KNOWLEDGE_NORM_TOL:
        raise ValidationError("entries must be nonnegative and sum to 1", field="p")
    return DensityState(Operator(layout, np.diag(np.clip(p, 0.0, None).ravel())))


def random_hermitian_unit(rng: np.random.Generator, d: int) -> np.ndarray:
    """Random Hermitian matrix with spectral norm 1."""
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = 0.5 * (z + z.conj().T)
    return h / np.max(np.abs(np.linalg.eigvalsh(h)))


def misalignment(d: int, eps: float, rng: np.random.Generator) -> np.ndarray:
    """``exp(i eps G)`` for a random unit-norm Hermitian ``G``; exactly 1 at ``eps = 0``."""
    g = random_hermitian_unit(rng, d)
    if eps == 0:
        return np.eye(d, dtype=complex)
    return scipy.linalg.expm(1j * eps * g)


def selection_unitary(layout: SystemLayout, code: Sequence[Sequence[int]] | None = None,
                      eps: float = 0.0, seed: int = 0) -> Operator:
    """``(R1 (x) R2) U_ideal (R1 (x) R2)^dag``.

    ``U_ideal`` applies ``code[a]`` to the second subsystem when the first is
    in ``|a>``; the default code is the cyclic shift (a perfect measurement
    when the dimensions agree).
    """
    if eps < 0:
        raise ValidationError("noise must be nonnegative", field="eps")
    if len(layout.subsystems) != 2:
        raise ValidationError("layout must have exactly two subsystems", field="layout")
    (la, da), (lb, db) = layout.subsystems
    if code is None:
        code = [shift_permutation(db, a) for a in range(da)]
    ideal = controlled_permutation(layout, la, lb, code)
    rng = np.random.default_rng(seed)
    r = np.kron(misalignment(da, eps, rng), misalignment(db, eps, rng))
    if eps == 0:
        return ideal
    return Operator(layout, r @ ideal.matrix @ r.conj().T)


def random_knowledge_p(rng: np.random.Generator, da: int, db: int) -> np.ndarray:
    p = rng.dirichlet(np.ones(da * db)).reshape(da, db)
    return p


def dephasing_form_matches(before: DensityState, after: DensityState, tol=None,
                           deg_tol: float = DEG_TOL) -> bool:
    """Is ``after`` equal to ``before`` dephased in some orthonormal basis?

    Any such basis must diagonalise ``after``.  Within an eigenspace of
    ``after`` with eigenvalue ``l`` and rank ``k`` a basis with constant
    diagonal exists iff ``tr(Q before) = k l``, so the check reduces to one
    trace per eigenspace.
    """
    tol = _resolve_tol(tol)
    w, v = np.linalg.eigh(0.5 * (after.matrix + after.matrix.conj().T))
    for group in _group_eigenvalues(w, deg_tol):
        vecs = v[:, group]
        weight = np.real(np.trace(vecs.conj().T @ before.matrix @ vecs))
        if abs(weight - len(group) * np.mean(w[group])) > tol:
            return False
    return True


@dataclass(frozen=True)
class SelectionRun:
    labels: tuple[str, str]
    entropies_before: tuple[float, float]
    entropies_after: tuple[float, float]
    global_before: float
    global_after: float
    dephasing_form_matched: tuple[bool, bool]
    initial_conforms: bool
    final_verdict: FormVerdict
    final_state: DensityState = field(repr=False)
    seed: int | None = None
    eps: float | None = None
    # Schmidt coefficients of U|a,b> for every populated branch
    branch_schmidt: dict = field(default_factory=dict, repr=False)
    readout_entropy: float | None = None

    @property
    def delta(self) -> tuple[float, float]:
        return tuple(a - b for a, b in zip(self.entropies_after, self.entropies_before))

    def is_counterexample(self, tol: float = 1e-9) -> bool:
        return any(d < -tol for d in self.delta)


def run_selection(initial: DensityState, u: Operator, tol=None, readout: bool = False,
                  seed: int | None = None, eps: float | None = None) -> SelectionRun:
    """Evolve a two-part state, record marginal entropies before and after.

    With ``readout`` the second subsystem is finally measured onto a blank
    ancilla and the ancilla entropy is recorded.
    """
    initial.op._check_layout(u)
    if len(initial.layout.subsystems) != 2:
        raise ValidationError("state must have exactly two subsystems; flatten first", field="state")
    if not operator_flags(u, tol).unitary:
        raise ValidationError("interaction is not unitary", field="unitary")
    la, lb = initial.layout.labels
    final = evolve_schrodinger(initial, u, tol)
    before = (reduced_state(initial, [la]), reduced_state(initial, [lb]))
    after = (reduced_state(final, [la]), reduced_state(final, [lb]))
    matched = tuple(dephasing_form_matches(b, a, tol) for b, a in zip(before, after))
    init_check = knowledge_form_check(initial, ([la], [lb]), tol)
    final_check = knowledge_form_check(final, ([la], [lb]), tol)

    branches = {}
    if np.max(np.abs(initial.matrix - np.diag(np.diag(initial.matrix)))) <= _resolve_tol(tol):
        da, db = initial.layout.dims
        diag = np.real(np.diag(initial.matrix))
        for idx in np.flatnonzero(diag > 0):
            vec = u.matrix[:, idx]
            sd = schmidt_decompose(DensityState.pure(vec, initial.layout), ([la], [lb]))
            branches[(int(idx // db), int(idx % db))] = sd.coefficients

    readout_s = None
    if readout:
        readout_s = _readout_entropy(final, lb)

    return SelectionRun(
        labels=(la, lb),
        entropies_before=tuple(von_neumann_entropy(s) for s in before),
        entropies_after=tuple(von_neumann_entropy(s) for s in after),
        global_before=von_neumann_entropy(initial),
        global_after=von_neumann_entropy(final),
        dephasing_form_matched=matched,
        initial_conforms=init_check.verdict is FormVerdict.CONFORMS,
        final_verdict=final_check.verdict,
        final_state=final,
        seed=seed,
        eps=eps,
        branch_schmidt=branches,
        readout_entropy=readout_s,
    )


def _readout_entropy(state: DensityState, label: str) -> float:
    d = state.layout.dim(label)
    layout = SystemLayout(state.layout.subsystems + (("readout", d),))
    blank = np.zeros((d, d))
    blank[0, 0] = 1.0
    extended = DensityState(Operator(layout, np.kron(state.matrix, blank)))
    measured = evolve_schrodinger(extended, perfect_measurement_unitary(layout, label, "readout"))
    return von_neumann_entropy(reduced_state(measured, ["readout"]))


def seeded_run(da: int, db: int, eps: float, seed: int, readout: bool = False) -> SelectionRun:
    """Random knowledge state and noisy selection unitary from one seed."""
    layout = SystemLayout((("S1", da), ("S2", db)))
    rng = np.random.default_rng(seed)
    p = random_knowledge_p(rng, da, db)
    u = selection_unitary(layout, eps=eps, seed=int(rng.integers(2**63 - 1)))
    return run_selection(knowledge_state(p, layout), u, readout=readout, seed=seed, eps=eps)


def flatten(state: DensityState, part: Sequence[str], names=("S1", "S2")) -> DensityState:
    """Regroup a many-part state into ``part`` versus the rest."""
    return DensityState(bipartite_view(state.op, part, names=names))

"""Qubit-carrier gas expansion and compression, one molecule cell at a time.

Each molecule carries a qubit ``Q``; its position ``carrier`` is L or R.
Device ``M_xq`` records sigma_x of the qubit, device ``M_c`` (blank, L, R)
records the side.  The molecules do not interact, so an ``n``-molecule gas
is one 24-dimensional cell with entropies scaled by ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    controlled_permutation,
    evolve_schrodinger,
    perfect_measurement_unitary,
    shift_permutation,
)
from .errors import PropertyViolation, ValidationError
from .states import DensityState, reduced_state, von_neumann_entropy
from .tensor_algebra import Operator, SystemLayout, operator_flags

QUBIT, CARRIER, DEVICE_X, DEVICE_C = "Q", "carrier", "M_xq", "M_c"
L, R = 0, 1
BLANK, REC_L, REC_R = 0, 1, 2

CELL = SystemLayout(((QUBIT, 2), (CARRIER, 2), (DEVICE_X, 2), (DEVICE_C, 3)))

_K = np.array([[1.0, 1.0], [1.0, -1.0]])
# columns |0_x>, |1_x> in the z basis
X_BASIS = _K / np.sqrt(2.0)


def z_to_x(m) -> np.ndarray:
    """Re-express a qubit operator given in the z basis in the x basis.

    Written as ``K M K / 2`` with integer ``K`` so that, on dyadic entries,
    applying it twice returns the input exactly.
    """
    m = np.asarray(m)
    return 0.5 * (_K @ m @ _K)


x_to_z = z_to_x


def _ket(*indices) -> np.ndarray:
    v = np.zeros(CELL.total_dim, dtype=complex)
    v[np.ravel_multi_index(indices, CELL.dims)] = 1.0
    return v


def initial_state() -> DensityState:
    """Qubit in |0_z>, carrier on the left, both devices blank."""
    return DensityState.pure(_ket(0, L, 0, BLANK), CELL)


def _u1() -> Operator:
    # sigma_x of Q copied into M_xq
    return perfect_measurement_unitary(CELL, QUBIT, DEVICE_X, basis=X_BASIS)


def _u2() -> Operator:
    # |0_x> keeps the carrier, |1_x> swaps L <-> R
    return controlled_permutation(CELL, QUBIT, CARRIER, [(0, 1), (1, 0)], basis=X_BASIS)


def _u3() -> Operator:
    # carrier side written into the blank device: L -> record L, R -> record R
    return controlled_permutation(CELL, CARRIER, DEVICE_C, [shift_permutation(3, REC_L), shift_permutation(3, REC_R)])


def _u4() -> Operator:
    """Record-controlled reset of qubit and carrier.

    Conditioned on ``(M_xq, M_c)``: record ``(0, L)`` maps ``|0_x, L>`` to
    ``|0_z, L>`` (a Hadamard on Q); record ``(1, R)`` maps ``|1_x, R>`` to
    ``|0_z, L>`` (Hadamard then X on Q, X on the carrier).  All other record
    values act as identity.
    """
    h = X_BASIS.conj().T  # maps |a_x> to |a_z>
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    eye4 = np.eye(4)
    total = np.zeros((CELL.total_dim,) * 2, dtype=complex)
    for mx in range(2):
        for mc in range(3):
            if (mx, mc) == (0, REC_L):
                w = np.kron(h, np.eye(2))
            elif (mx, mc) == (1, REC_R):
                w = np.kron(x @ h, x)
            else:
                w = eye4
            rec = np.zeros((6, 6))
            rec[mx * 3 + mc, mx * 3 + mc] = 1.0
            total += np.kron(w, rec)
    return Operator(CELL, total)


def stage_unitaries() -> list[Operator]:
    """The four stage unitaries, each checked to be unitary."""
    us = [_u1(), _u2(), _u3(), _u4()]
    for i, u in enumerate(us, 1):
        if not operator_flags(u).unitary:
            raise PropertyViolation(f"stage {i} operator is not unitary")
    return us


SUBSYSTEMS = (QUBIT, CARRIER, DEVICE_X, DEVICE_C)


@dataclass(frozen=True)
class EntropyTrace:
    """Per-stage entropies (bits) for one molecule cell, scaled to ``n_molecules``."""

    n_molecules: int
    per_molecule: dict[str, tuple[float, ...]]
    global_per_molecule: tuple[float, ...]
    states: tuple[DensityState, ...] = field(repr=False)

    @property
    def stages(self) -> range:
        return range(len(self.global_per_molecule))

    def total(self, label: str) -> tuple[float, ...]:
        return tuple(self.n_molecules * s for s in self.per_molecule[label])

    def reduced(self, stage: int, labels) -> DensityState:
        return reduced_state(self.states[stage], labels)

    def rows(self):
        """``(stage, subsystem, bits per molecule, bits total)`` rows, global last per stage."""
        for t in self.stages:
            for label in SUBSYSTEMS:
                s = self.per_molecule[label][t]
                yield t, label, s, self.n_molecules * s
            g = self.global_per_molecule[t]
            yield t, "global", g, self.n_molecules * g


def run_szilard(n_molecules: int = 1, tol: float = 1e-9) -> EntropyTrace:
    if isinstance(n_molecules, bool) or not isinstance(n_molecules, (int, np.integer)) or n_molecules < 1:
        raise ValidationError("must be a positive integer", field="molecules")
    states = [initial_state()]
    for u in stage_unitaries():
        # each stage is applied exactly once; repeating U3 would shift M_c again
        states.append(evolve_schrodinger(states[-1], u))
    per = {label: tuple(von_neumann_entropy(reduced_state(s, [label])) for s in states) for label in SUBSYSTEMS}
    glob = tuple(von_neumann_entropy(s) for s in states)
    if max(glob) - min(glob) > tol:
        raise PropertyViolation(f"global entropy not constant across stages: {glob}")
    return EntropyTrace(int(n_molecules), per, glob, tuple(states))

"""Information capacity of a known state and the permutation-coding channel."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import (
    controlled_permutation,
    evolve_schrodinger,
    perfect_measurement_unitary,
)
from .errors import ValidationError
from .states import DensityState, entropy_of_spectrum, reduced_state, von_neumann_entropy
from .tensor_algebra import Operator, SystemLayout

NORM_TOL = 1e-9


def i_max(state: DensityState) -> float:
    """``log2 N - S(rho)`` in bits."""
    n = state.dim
    value = float(np.log2(n)) - von_neumann_entropy(state)
    return min(max(value, 0.0), float(np.log2(n)))


def _inverse(perm: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for b, pb in enumerate(perm):
        inv[pb] = b
    return tuple(inv)


@dataclass(frozen=True)
class ChannelExperiment:
    """Message ``a`` drawn from ``prior`` is written into a channel whose
    state has eigenvalues ``spectrum`` by permuting its eigenbasis with
    ``code[a]``; the channel is then read into a blank record.
    """

    spectrum: tuple[float, ...]
    code: tuple[tuple[int, ...], ...]
    prior: tuple[float, ...] | None = None

    def __post_init__(self):
        p = np.asarray(self.spectrum, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValidationError("must be a nonempty list", field="spectrum")
        if np.any(p < 0) or abs(p.sum() - 1.0) > NORM_TOL:
            raise ValidationError("must be nonnegative and sum to 1", field="spectrum")
        n = p.size
        code = tuple(tuple(int(x) for x in perm) for perm in self.code)
        if not code:
            raise ValidationError("need at least one permutation", field="code")
        if len(code) > n:
            raise ValidationError(f"{len(code)} messages exceed channel dimension {n}", field="code")
        for a, perm in enumerate(code):
            if sorted(perm) != list(range(n)):
                raise ValidationError(f"code[{a}] = {list(perm)} is not a bijection on 0..{n - 1}", field="code")
        prior = self.prior
        if prior is None:
            prior = tuple([1.0 / len(code)] * len(code))
        q = np.asarray(prior, dtype=float)
        if q.shape != (len(code),):
            raise ValidationError(f"needs {len(code)} entries", field="prior")
        if np.any(q < 0) or abs(q.sum() - 1.0) > NORM_TOL:
            raise ValidationError("must be nonnegative and sum to 1", field="prior")
        object.__setattr__(self, "spectrum", tuple(float(x) for x in p))
        object.__setattr__(self, "code", code)
        object.__setattr__(self, "prior", tuple(float(x) for x in q))

    @property
    def channel_dim(self) -> int:
        return len(self.spectrum)

    @property
    def channel_state(self) -> DensityState:
        return DensityState.diagonal(self.spectrum)

    def expected_joint(self) -> np.ndarray:
        """``p(a, b) = prior(a) * spectrum[code[a][b]]``."""
        p = np.asarray(self.spectrum)
        return np.array([[q * p[perm[b]] for b in range(self.channel_dim)]
                         for q, perm in zip(self.prior, self.code)])


@dataclass(frozen=True)
class CodeResult:
    joint: np.ndarray
    record_states: tuple[DensityState, ...] = field(repr=False)
    mutual_information_bits: float = 0.0
    i_max_bits: float = 0.0

    @property
    def gap(self) -> float:
        return self.i_max_bits - self.mutual_information_bits

    def to_json(self):
        return {
            "joint": [[float(x) + 0.0 for x in row] for row in self.joint],
            "mutual_information_bits": self.mutual_information_bits,
            "i_max_bits": self.i_max_bits,
            "gap": self.gap,
        }


def _simulate_message(exp: ChannelExperiment, a: int) -> DensityState:
    """Three-register evolution for a definite message ``a``; returns the final state."""
    n = exp.channel_dim
    m = len(exp.code)
    layout = SystemLayout((("source", m), ("channel", n), ("record", n)))
    src = np.zeros(m)
    src[a] = 1.0
    blank = np.zeros(n)
    blank[0] = 1.0
    rho0 = np.kron(np.kron(np.diag(src), np.diag(exp.spectrum)), np.diag(blank))
    state = DensityState(Operator(layout, rho0))
    # message-controlled relabelling |code[a][b]> -> |b> of the channel eigenbasis
    relabel = controlled_permutation(layout, "source", "channel", [_inverse(perm) for perm in exp.code])
    state = evolve_schrodinger(state, relabel)
    state = evolve_schrodinger(state, perfect_measurement_unitary(layout, "channel", "record"))
    return state


def run_permutation_code(exp: ChannelExperiment) -> CodeResult:
    """Simulate the coding protocol register by register.

    Each message is run as its own definite-source experiment; the joint
    distribution is ``prior(a)`` times the record's diagonal.
    """
    n = exp.channel_dim
    joint = np.zeros((len(exp.code), n))
    records = []
    for a, q in enumerate(exp.prior):
        final = _simulate_message(exp, a)
        rec = reduced_state(final, ["record"])
        records.append(rec)
        joint[a] = q * np.real(np.diag(rec.matrix))
    mi = mutual_information(joint)
    return CodeResult(joint, tuple(records), mi, i_max(exp.channel_state))


def mutual_information(joint) -> float:
    """``sum p(a,b) log2 p(a,b) / (p(a) p(b))`` with ``0 log 0 = 0``."""
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2:
        raise ValidationError("joint distribution must be a matrix", field="joint")
    if np.any(p < -NORM_TOL) or abs(p.sum() - 1.0) > NORM_TOL:
        raise ValidationError(f"entries must be nonnegative and sum to 1 (sum {p.sum():.12g})", field="joint")
    p = np.clip(p, 0.0, None)
    value = entropy_of_spectrum(p.sum(axis=1)) + entropy_of_spectrum(p.sum(axis=0)) - entropy_of_spectrum(p)
    return max(value, 0.0)

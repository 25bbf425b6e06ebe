"""Which operators can be copied, and the unitaries that copy them.

An operator on one system can be copied into a blank record only when it is
a linear combination of a single orthogonal projector family, i.e. when it
is normal.  :func:`classify_copyable` decides this with a Schur
decomposition; :func:`search_copy_unitary` is a brute-force cross-check that
never looks at normality.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import permutations

import numpy as np
import scipy.linalg

from .dynamics import permutation_matrix, shift_permutation
from .errors import ValidationError
from .states import DEG_TOL, DensityState, reduced_state
from .tensor_algebra import (
    Operator,
    SystemLayout,
    _resolve_tol,
    embed,
    operator_flags,
    operator_schmidt_rank,
)


@dataclass(frozen=True)
class CopyVerdict:
    copyable: bool
    degenerate: bool
    eigenbasis: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    # (a, b), a < b: largest off-diagonal Schur entry, i.e. the matrix unit S_ab obstructing normality
    witness: tuple[int, int] | None = None

    def to_json(self):
        return {
            "copyable": self.copyable,
            "degenerate": self.degenerate,
            "witness": list(self.witness) if self.witness is not None else None,
        }


def _distinct_groups(values: np.ndarray, tol: float) -> list[list[int]]:
    """Group complex eigenvalues by proximity, in order of first appearance."""
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        for g in groups:
            if abs(values[g[0]] - v) <= tol:
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


def classify_copyable(b: Operator, tol=None, hermitian_only: bool = False) -> CopyVerdict:
    """Normality test via the complex Schur form ``B = Z T Z^dag``.

    ``B`` is normal iff ``T`` is diagonal; the columns of ``Z`` are then an
    orthonormal eigenbasis.  With ``hermitian_only`` the eigenvalues must
    also be real.
    """
    tol = _resolve_tol(tol)
    m = b.matrix
    n = m.shape[0]
    if np.max(np.abs(m - np.diag(np.diag(m))), initial=0.0) <= tol:
        # already diagonal: keep the computational basis exactly
        t = m.copy()
        z = np.eye(n, dtype=complex)
    else:
        t, z = scipy.linalg.schur(m, output="complex")
    upper = np.triu(t, 1)
    eig = np.diag(t).copy()
    degenerate = any(len(g) > 1 for g in _distinct_groups(eig, DEG_TOL))
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    off = np.abs(upper)
    if n > 1 and off.max() > tol * scale:
        a, c = np.unravel_index(np.argmax(off), off.shape)
        return CopyVerdict(False, degenerate, witness=(int(a), int(c)))
    flags = operator_flags(b, tol * scale)
    if not flags.normal:
        # Schur was numerically diagonal but the commutator disagrees; report the largest entry
        comm = np.abs(m @ m.conj().T - m.conj().T @ m)
        a, c = np.unravel_index(np.argmax(comm), comm.shape)
        return CopyVerdict(False, degenerate, witness=(int(min(a, c)), int(max(a, c))))
    if hermitian_only and np.max(np.abs(eig.imag), initial=0.0) > tol * scale:
        k = int(np.argmax(np.abs(eig.imag)))
        return CopyVerdict(False, degenerate, witness=(k, k))
    return CopyVerdict(True, degenerate, eigenbasis=z, eigenvalues=eig)


def eigenprojector_family(b: Operator, tol=None) -> tuple[list[complex], list[np.ndarray]]:
    """Distinct eigenvalues and eigenspace projectors of a normal operator."""
    verdict = classify_copyable(b, tol)
    if not verdict.copyable:
        raise ValidationError(f"operator is not copyable (witness {verdict.witness})", field="operator")
    z, eig = verdict.eigenbasis, verdict.eigenvalues
    values, projs = [], []
    for g in _distinct_groups(eig, DEG_TOL):
        vecs = z[:, g]
        values.append(complex(np.mean(eig[g])))
        projs.append(vecs @ vecs.conj().T)
    return values, projs


def build_copy_unitary(b: Operator, record: str = "record", record_dim: int | None = None,
                       tol=None) -> Operator:
    """``U = sum_c P_c (x) X^c`` on source (x) record.

    ``P_c`` runs over eigenspace projectors of ``b`` in order of first
    appearance and ``X`` is the cyclic shift on the record, so a blank record
    ``|0>`` ends in ``|c>``.  Inside a degenerate eigenspace the identity
    permutation is used.
    """
    if len(b.layout.subsystems) != 1:
        raise ValidationError("operator must act on a single subsystem", field="operator")
    _, projs = eigenprojector_family(b, tol)
    if record_dim is None:
        record_dim = b.dim
    if record_dim < len(projs):
        raise ValidationError(
            f"record dim {record_dim} < {len(projs)} distinct eigenvalues", field="record_dim"
        )
    layout = SystemLayout(b.layout.subsystems + ((record, record_dim),))
    total = np.zeros((layout.total_dim,) * 2, dtype=complex)
    for c, p in enumerate(projs):
        total += np.kron(p, permutation_matrix(shift_permutation(record_dim, c)))
    return Operator(layout, total)


@dataclass(frozen=True)
class CopyCheck:
    invariant: bool
    factorizes: bool

    @property
    def copies(self) -> bool:
        return self.invariant and not self.factorizes


def verify_copy(u: Operator, b: Operator, tol=None) -> CopyCheck:
    """Does ``U`` leave ``B (x) 1`` unchanged, and does ``U`` factorise across source|rest?"""
    tol = _resolve_tol(tol)
    if len(b.layout.subsystems) != 1:
        raise ValidationError("operator must act on a single subsystem", field="operator")
    source = b.layout.labels[0]
    if source not in u.layout.labels or u.layout.dim(source) != b.dim:
        raise ValidationError(f"unitary layout has no subsystem {source!r} of dim {b.dim}", field="layout")
    if len(u.layout.subsystems) < 2:
        raise ValidationError("unitary must act on at least two subsystems", field="layout")
    full = embed(b, u.layout).matrix
    um = u.matrix
    moved = um.conj().T @ full @ um
    scale = max(1.0, float(np.max(np.abs(full))))
    invariant = bool(np.max(np.abs(moved - full)) <= tol * scale)
    factorizes = operator_schmidt_rank(u, [source], tol=1e-8) <= 1
    return CopyCheck(invariant, factorizes)


@dataclass(frozen=True)
class CloneRecord:
    exact: bool
    marginal_fidelity: float


def cloning_demo(u: Operator, probes, source: str | None = None, record: str | None = None,
                 tol=None) -> list[CloneRecord]:
    """Run ``U`` on ``psi (x) |0>`` for each probe and compare with ``psi (x) psi``."""
    tol = _resolve_tol(tol)
    labels = u.layout.labels
    if len(labels) != 2:
        raise ValidationError("unitary must act on exactly source (x) record", field="layout")
    source = source or labels[0]
    record = record or (labels[1] if labels[0] == source else labels[0])
    d = u.layout.dim(source)
    if u.layout.dim(record) != d:
        raise ValidationError("record and source dimensions differ", field="record")
    if labels != (source, record):
        raise ValidationError("layout must be ordered (source, record)", field="layout")
    blank = np.zeros(d, dtype=complex)
    blank[0] = 1.0
    out = []
    for i, probe in enumerate(probes):
        psi = _probe_vector(probe, d, i)
        final = u.matrix @ np.kron(psi, blank)
        target = np.kron(psi, psi)
        exact = bool(np.max(np.abs(np.outer(final, final.conj()) - np.outer(target, target.conj()))) <= tol)
        rho = DensityState.pure(final, u.layout)
        rec = reduced_state(rho, [record]).matrix
        fid = float(np.real(psi.conj() @ rec @ psi))
        out.append(CloneRecord(exact, fid))
    return out


def _probe_vector(probe, d: int, i: int) -> np.ndarray:
    if isinstance(probe, DensityState):
        if not probe.is_pure():
            raise ValidationError(f"probe {i} is not pure", field="probes")
        w, v = np.linalg.eigh(0.5 * (probe.matrix + probe.matrix.conj().T))
        psi = v[:, -1]
    else:
        psi = np.asarray(probe, dtype=complex).ravel()
        if psi.ndim != 1 or psi.size != d:
            raise ValidationError(f"probe {i} must be a length-{d} vector", field="probes")
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            raise ValidationError(f"probe {i} is the zero vector", field="probes")
        psi = psi / nrm
    if psi.size != d:
        raise ValidationError(f"probe {i} has wrong dimension", field="probes")
    return psi


# -- brute-force oracle ------------------------------------------------------

def _random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _grid_bases(d: int) -> list[np.ndarray]:
    eye = np.eye(d, dtype=complex)
    w = np.exp(2j * np.pi / d)
    fourier = np.array([[w ** (j * k) for k in range(d)] for j in range(d)]) / np.sqrt(d)
    out = [eye, fourier]
    if d == 2:
        out.append(np.array([[1, 1], [1j, -1j]]) / np.sqrt(2))
    return out


def _candidate_bases(m: np.ndarray, rng: np.random.Generator, n_random: int) -> list[np.ndarray]:
    """Orthonormal bases whose projectors are tried as copy families.

    Built from raw eigenvectors (orthonormalised in every column order), the
    eigenvectors of the Hermitian and anti-Hermitian parts, a fixed grid and
    random bases.  None of this consults a normality test.
    """
    d = m.shape[0]
    bases = list(_grid_bases(d))
    _, vecs = np.linalg.eig(m)
    for order in permutations(range(d)):
        q, _ = np.linalg.qr(vecs[:, list(order)])
        bases.append(q)
    bases.append(np.linalg.eigh(0.5 * (m + m.conj().T))[1])
    bases.append(np.linalg.eigh(0.5j * (m.conj().T - m))[1])
    bases.extend(_random_unitary(rng, d) for _ in range(n_random))
    return bases


def _block_unitaries(basis: np.ndarray) -> list[np.ndarray]:
    """Copy-style unitaries ``sum_c |v_c><v_c| (x) u_c`` over record dim ``d``.

    Uses every grouping of basis vectors into contiguous blocks, with the
    cyclic shift ``X^k`` on block ``k``.
    """
    d = basis.shape[0]
    out = []
    for mask in range(1, 2 ** (d - 1)):
        # bit i set => cut between i and i+1
        block, labels = 0, []
        for i in range(d):
            labels.append(block)
            if i < d - 1 and mask >> i & 1:
                block += 1
        u = np.zeros((d * d, d * d), dtype=complex)
        for i in range(d):
            proj = np.outer(basis[:, i], basis[:, i].conj())
            u += np.kron(proj, permutation_matrix(shift_permutation(d, labels[i])))
        out.append(u)
    return out


def _copies(u: np.ndarray, m: np.ndarray, tol: float) -> bool:
    """Invariant, non-factorising, and a record readout reproduces ``m``."""
    d = m.shape[0]
    big = np.kron(m, np.eye(d))
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(u.conj().T @ big @ u - big)) > tol * scale:
        return False
    realigned = u.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    s = np.linalg.svd(realigned, compute_uv=False)
    if s[1] <= 1e-8 * s[0]:
        return False
    # readout map R -> <0|U^dag (1 (x) R) U|0> restricted to the source, solved by least squares
    t = u.reshape(d, d, d, d)[:, :, :, 0]  # t[i, r, j] = <i r|U|j 0>
    cols = []
    for r1 in range(d):
        for r2 in range(d):
            cols.append((t[:, r1, :].conj().T @ t[:, r2, :]).ravel())
    a = np.array(cols).T
    coef, *_ = np.linalg.lstsq(a, m.ravel(), rcond=None)
    return bool(np.max(np.abs(a @ coef - m.ravel())) <= 1e-8 * scale)


def search_copy_unitary(b: Operator, seed: int = 0, n_random: int = 8, workers: int = 1,
                        tol: float = 1e-8) -> bool:
    """Brute-force search for a unitary that copies ``b`` into a blank record.

    A candidate copies ``b`` when it leaves ``b (x) 1`` invariant, does not
    factorise, and some record observable read after the evolution reproduces
    ``b`` on the source.  Candidates are block-projector unitaries over many
    bases plus random unitaries on the joint space.  The answer does not
    depend on ``workers``.
    """
    m = np.asarray(b.matrix, dtype=complex)
    d = m.shape[0]
    rng = np.random.default_rng(seed)
    candidates = []
    for basis in _candidate_bases(m, rng, n_random):
        candidates.extend(_block_unitaries(basis))
    candidates.extend(_random_unitary(rng, d * d) for _ in range(n_random))

    if workers <= 1:
        return any(_copies(u, m, tol) for u in candidates)
    chunks = [candidates[i::workers] for i in range(workers)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda chunk: any(_copies(u, m, tol) for u in chunk), chunks))
    return any(results)


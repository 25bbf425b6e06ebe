import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from everettropy import (
    DensityState,
    EvolutionStep,
    Observable,
    Operator,
    SystemLayout,
    ValidationError,
    dephase,
    detect_branching,
    evolve_heisenberg,
    evolve_schrodinger,
    expectation,
    operator_flags,
    perfect_measurement_unitary,
    permutation_unitary,
    von_neumann_entropy,
)
from everettropy.dynamics import basis_projectors, compose, controlled_permutation

from helpers import CNOT, HAD, SX, SZ, qubit, random_density, random_hermitian, random_unitary, two


def op1(m, label="S"):
    return Operator(qubit(label), m)


def test_heisenberg_identity_and_hadamard():
    z = op1(SZ)
    assert evolve_heisenberg(z, Operator.identity(qubit())).allclose(z)
    np.testing.assert_allclose(evolve_heisenberg(z, op1(HAD)).matrix, SX, atol=1e-15)


def test_heisenberg_rejects_non_unitary():
    with pytest.raises(ValidationError, match="unitary"):
        evolve_heisenberg(op1(SZ), op1(np.diag([1, 2])))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_heisenberg_preserves_spectrum(seed, n):
    rng = np.random.default_rng(seed)
    lay = SystemLayout((("S", n),))
    a = Operator(lay, random_hermitian(rng, n))
    out = evolve_heisenberg(a, Operator(lay, random_unitary(rng, n)))
    assert operator_flags(out, 1e-9).hermitian
    np.testing.assert_allclose(np.linalg.eigvalsh(out.matrix), np.linalg.eigvalsh(a.matrix), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 16))
def test_picture_equivalence_and_roundtrip(seed, n):
    rng = np.random.default_rng(seed)
    lay = SystemLayout((("S", n),))
    rho = DensityState(Operator(lay, random_density(rng, n)))
    a = Operator(lay, random_hermitian(rng, n))
    u = Operator(lay, random_unitary(rng, n))
    lhs = expectation(evolve_schrodinger(rho, u), a)
    rhs = expectation(rho, evolve_heisenberg(a, u))
    assert abs(lhs - rhs) <= 1e-10
    back = evolve_schrodinger(evolve_schrodinger(rho, u), u.dag())
    assert np.max(np.abs(back.matrix - rho.matrix)) <= 1e-10
    assert abs(von_neumann_entropy(evolve_schrodinger(rho, u)) - von_neumann_entropy(rho)) <= 1e-9


def test_schrodinger_identity(rng):
    rho = DensityState(Operator(qubit(), random_density(rng, 2)))
    assert evolve_schrodinger(rho, Operator.identity(qubit())).op.allclose(rho.op)


def test_evolution_step():
    step = EvolutionStep(op1(HAD), picture="heisenberg", t_from=0, t_to=1)
    np.testing.assert_allclose(step.apply(op1(SZ)).matrix, SX, atol=1e-15)
    with pytest.raises(ValidationError):
        EvolutionStep(op1(HAD), t_from=1, t_to=1)
    with pytest.raises(ValidationError):
        EvolutionStep(op1(np.diag([1, 2])))


def test_permutation_unitary_examples():
    assert permutation_unitary(qubit(), "S", (0, 1)).allclose(Operator.identity(qubit()))
    np.testing.assert_array_equal(permutation_unitary(qubit(), "S", (1, 0)).matrix, SX)
    with pytest.raises(ValidationError):
        permutation_unitary(qubit(), "S", (0, 0))


def test_permutation_unitary_permutes_projectors(rng):
    n = 4
    lay = SystemLayout((("S", n),))
    basis = random_unitary(rng, n)
    for perm in itertools.permutations(range(n)):
        u = permutation_unitary(lay, "S", perm, basis)
        for a in range(n):
            pa = np.outer(basis[:, a], basis[:, a].conj())
            pb = np.outer(basis[:, perm[a]], basis[:, perm[a]].conj())
            assert np.max(np.abs(u.matrix @ pa @ u.matrix.conj().T - pb)) <= 1e-12


def test_perfect_measurement_qubits_is_cnot():
    np.testing.assert_array_equal(perfect_measurement_unitary(two(), "A", "B").matrix, CNOT)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_perfect_measurement_copies_basis_states(n):
    lay = two(n, n)
    u = perfect_measurement_unitary(lay, "A", "B").matrix
    for a in range(n):
        ket = np.zeros(n * n)
        ket[a * n] = 1
        out = u @ ket
        assert out[a * n + a] == 1 and np.count_nonzero(out) == 1
    for a, b in itertools.product(range(n), repeat=2):
        assert u[a * n + (a + b) % n, a * n + b] == 1
    assert operator_flags(Operator(lay, u)).unitary


def test_perfect_measurement_target_order_and_mismatch():
    lay = SystemLayout((("A", 2), ("B", 3)))
    with pytest.raises(ValidationError):
        perfect_measurement_unitary(lay, "A", "B")
    swapped = perfect_measurement_unitary(two(), "B", "A").matrix
    np.testing.assert_array_equal(swapped, np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]]))


def z_observable(layout):
    return Observable.from_basis(layout)


def test_branching_examples():
    zobs = Observable.from_operator(op1(SZ))
    assert detect_branching(op1(SX), zobs) == (1, 0)
    assert detect_branching(op1(HAD), zobs) is None


@pytest.mark.parametrize("n", [2, 3, 4])
def test_branching_recovers_every_permutation(rng, n):
    lay = SystemLayout((("S", n),))
    basis = random_unitary(rng, n)
    obs = Observable.from_basis(lay, basis)
    for perm in itertools.permutations(range(n)):
        assert detect_branching(permutation_unitary(lay, "S", perm, basis), obs) == perm


def test_branching_rejects_degenerate():
    obs = Observable.from_operator(Operator(SystemLayout((("S", 3),)), np.diag([1.0, 1.0, 0.0])))
    with pytest.raises(ValidationError, match="ambiguous"):
        detect_branching(Operator.identity(SystemLayout((("S", 3),))), obs)


def test_double_measurement_with_rotation():
    lay = two()
    m1 = perfect_measurement_unitary(lay, "A", "B")
    rot = Operator(lay, np.kron(HAD, np.eye(2)))
    # second measurement of the rotated observable, written in the original frame
    m2 = perfect_measurement_unitary(lay, "A", "B", basis=HAD.conj().T)
    original = z_observable(lay)
    rotated = Observable.from_basis(lay, np.kron(HAD.conj().T, np.eye(2)))
    assert detect_branching(m1, original) is not None
    assert detect_branching(m2, rotated) is not None
    assert detect_branching(m2, original) is None
    assert detect_branching(compose(m1, rot, m1), original) is None


def test_dephase_examples(rng):
    plus = DensityState.pure([1, 1])
    zproj = basis_projectors(qubit(), np.eye(2))
    out = dephase(plus, zproj)
    np.testing.assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-15)
    assert von_neumann_entropy(plus) == 0 and von_neumann_entropy(out) == pytest.approx(1.0)
    diag = DensityState.from_matrix(np.diag([0.3, 0.7]))
    assert dephase(diag, zproj).op.allclose(diag.op)


def test_dephase_rejects_bad_families():
    lay = qubit()
    p0 = Operator(lay, np.diag([1, 0]))
    with pytest.raises(ValidationError, match="identity"):
        dephase(DensityState.maximally_mixed(lay), [p0])
    with pytest.raises(ValidationError, match="orthogonal"):
        dephase(DensityState.maximally_mixed(lay), [p0, Operator(lay, np.full((2, 2), 0.5))])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 16))
def test_dephasing_never_decreases_entropy(seed, n):
    rng = np.random.default_rng(seed)
    lay = SystemLayout((("S", n),))
    rho = DensityState(Operator(lay, random_density(rng, n, rank=int(rng.integers(1, n + 1)))))
    basis = random_unitary(rng, n)
    cuts = sorted(rng.choice(np.arange(1, n), size=int(rng.integers(0, n)), replace=False))
    blocks = np.split(np.arange(n), cuts)
    projs = [Operator(lay, basis[:, b] @ basis[:, b].conj().T) for b in blocks]
    out = dephase(rho, projs)
    assert abs(out.op.trace() - 1) <= 1e-12
    assert von_neumann_entropy(out) >= von_neumann_entropy(rho) - 1e-9


def test_controlled_permutation_code_errors():
    with pytest.raises(ValidationError):
        controlled_permutation(two(), "A", "B", [(0, 1)])
    with pytest.raises(ValidationError):
        controlled_permutation(two(), "A", "A", [(0, 1), (1, 0)])

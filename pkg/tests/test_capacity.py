import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from everettropy import ChannelExperiment, DensityState, Operator, SystemLayout, ValidationError, i_max, tensor
from everettropy import mutual_information, run_permutation_code

from helpers import random_state

# 1 - H(3/4, 1/4), 30-digit scalar arithmetic
I_34 = 0.188721875540867136090304207961


def mi_oracle(p):
    # direct double sum, no entropy helper
    p = np.asarray(p, dtype=float)
    pa, pb = p.sum(axis=1), p.sum(axis=0)
    total = 0.0
    for a, b in itertools.product(range(p.shape[0]), range(p.shape[1])):
        if p[a, b] > 0:
            total += p[a, b] * np.log2(p[a, b] / (pa[a] * pb[b]))
    return total


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_i_max_endpoints(n):
    pure = DensityState.pure(np.ones(n))
    assert abs(i_max(pure) - np.log2(n)) <= 1e-12
    assert abs(i_max(DensityState.maximally_mixed(SystemLayout((("S", n),))))) <= 1e-12


def test_i_max_three_quarters():
    assert i_max(DensityState.diagonal([0.75, 0.25])) == pytest.approx(I_34, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4))
def test_i_max_additive(seed, da, db):
    rng = np.random.default_rng(seed)
    a = random_state(rng, SystemLayout((("A", da),)))
    b = random_state(rng, SystemLayout((("B", db),)))
    assert abs(i_max(DensityState(tensor(a.op, b.op))) - i_max(a) - i_max(b)) <= 1e-9


def test_swap_code_on_three_quarters():
    exp = ChannelExperiment(spectrum=(0.75, 0.25), code=((0, 1), (1, 0)))
    res = run_permutation_code(exp)
    np.testing.assert_allclose(res.joint, [[3 / 8, 1 / 8], [1 / 8, 3 / 8]], atol=1e-15)
    assert abs(res.mutual_information_bits - I_34) <= 1e-12
    assert abs(res.i_max_bits - I_34) <= 1e-12
    assert abs(res.gap) <= 1e-12


def test_pure_channel_decodes_bijectively():
    n = 4
    code = tuple(tuple((b + a) % n for b in range(n)) for a in range(n))
    res = run_permutation_code(ChannelExperiment(spectrum=(1.0, 0.0, 0.0, 0.0), code=code))
    for a in range(n):
        assert np.count_nonzero(res.joint[a] > 1e-12) == 1
        # message a leaves the record in the slot that code[a] sends to 0
        assert res.joint[a, code[a].index(0)] == pytest.approx(1 / n, abs=1e-15)
    assert res.mutual_information_bits == pytest.approx(2.0, abs=1e-12)


def test_mixed_channel_carries_nothing():
    exp = ChannelExperiment(spectrum=(1 / 3,) * 3, code=((0, 1, 2), (2, 0, 1), (1, 2, 0)))
    res = run_permutation_code(exp)
    np.testing.assert_allclose(res.joint, np.full((3, 3), 1 / 9), atol=1e-15)
    assert res.mutual_information_bits <= 1e-12 and res.i_max_bits <= 1e-12


def test_simulated_joint_matches_closed_form(rng):
    for n in (2, 3, 4):
        perms = list(itertools.permutations(range(n)))
        m = int(rng.integers(1, n + 1))
        code = tuple(perms[k] for k in rng.choice(len(perms), size=m, replace=False))
        exp = ChannelExperiment(tuple(rng.dirichlet(np.ones(n))), code, tuple(rng.dirichlet(np.ones(m))))
        res = run_permutation_code(exp)
        np.testing.assert_allclose(res.joint, exp.expected_joint(), atol=1e-12)
        assert res.mutual_information_bits == pytest.approx(mi_oracle(res.joint), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_mutual_information_bounded_by_i_max(seed, n):
    rng = np.random.default_rng(seed)
    perms = list(itertools.permutations(range(n)))
    m = int(rng.integers(1, n + 1))
    code = tuple(perms[k] for k in rng.choice(len(perms), size=m, replace=False))
    spectrum = rng.dirichlet(np.full(n, 0.3))
    res = run_permutation_code(ChannelExperiment(tuple(spectrum / spectrum.sum()), code))
    assert res.mutual_information_bits <= res.i_max_bits + 1e-9


def test_mutual_information_examples():
    assert mutual_information(np.eye(2) / 2) == pytest.approx(1.0)
    assert mutual_information(np.full((2, 3), 1 / 6)) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValidationError):
        mutual_information([[0.5, 0.6]])


def test_experiment_validation():
    with pytest.raises(ValidationError) as e:
        ChannelExperiment(spectrum=(0.5, 0.5), code=((0, 0),))
    assert e.value.field == "code"
    with pytest.raises(ValidationError):
        ChannelExperiment(spectrum=(0.5, 0.6), code=((0, 1),))
    with pytest.raises(ValidationError):
        ChannelExperiment(spectrum=(1.0, 0.0), code=((0, 1), (1, 0), (0, 1)))
    with pytest.raises(ValidationError) as e:
        ChannelExperiment(spectrum=(1.0, 0.0), code=((0, 1),), prior=(0.5, 0.5))
    assert e.value.field == "prior"


def test_record_states_are_diagonal():
    res = run_permutation_code(ChannelExperiment((0.75, 0.25), ((0, 1), (1, 0))))
    for rec in res.record_states:
        m = rec.matrix
        assert np.max(np.abs(m - np.diag(np.diag(m)))) <= 1e-15
    assert isinstance(res.record_states[0].op, Operator)

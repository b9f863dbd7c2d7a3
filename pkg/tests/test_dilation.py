import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qlc0.dilation import (
    DilationEnsemble,
    cz_error_bound,
    cz_low_degree_approx,
    cz_target,
    diagonal_degree,
    flag_restrictions,
    operator_dilate,
    unitary_dilate,
    weight_diagonal,
)
from qlc0.errors import ArgumentError, NormError, ValidationError
from qlc0.linalg import spectral_norm
from qlc0.pauli import expand, synthesize
from qlc0.randomops import ginibre, random_contraction, random_unitary


@settings(max_examples=40, deadline=None)
@given(q=st.integers(1, 4), seed=st.integers(0, 10**6), scale=st.floats(0.0, 1.0))
def test_dilation_is_unitary_with_a_in_the_corner(q, seed, scale):
    a = random_contraction(2**q, seed, norm=scale)
    u = unitary_dilate(a)
    assert np.abs(u.conj().T @ u - np.eye(2 ** (q + 1))).max() < 1e-10
    assert np.allclose(u[: 2**q, : 2**q], a)


def test_unitary_input_gives_block_diagonal():
    v = random_unitary(4, 3)
    u = unitary_dilate(v)
    assert np.allclose(u[:4, 4:], 0, atol=1e-7) and np.allclose(u[4:, :4], 0, atol=1e-7)
    assert np.allclose(u[4:, 4:], v.conj().T)


def test_dilation_rejects_expansive_operators():
    with pytest.raises(NormError):
        unitary_dilate(2 * np.eye(2))


def test_operator_dilation_blocks_and_norm():
    a = ginibre(8, 5)
    p = expand(a)
    ens = DilationEnsemble(((0,), (1, 2)))
    big = operator_dilate(p, ens)
    blocks = flag_restrictions(p, ens)
    assert np.allclose(synthesize(blocks[0]), a)
    # flag pattern 0b10 raises the first set, which is the normalized partial trace over wire 0
    expected = oracles.gate_on(np.kron(oracles.partial_trace(a, [0]) / 2, np.eye(2)), [1, 2, 0], 3)
    assert np.allclose(synthesize(blocks[2]), expected)
    reshaped = big.reshape(8, 4, 8, 4)
    for f in range(4):
        assert np.allclose(reshaped[:, f, :, f], synthesize(blocks[f]))
    assert np.isclose(spectral_norm(big), spectral_norm(a))


def test_operator_dilation_termwise_definition():
    # each Pauli term picks up |0><0| on the flags of the sets it touches
    p = expand(ginibre(4, 9))
    ens = DilationEnsemble(((1,),))
    zero = np.diag([1.0, 0.0])
    expected = sum(
        c * np.kron(oracles.pauli(s), zero if s[1] else np.eye(2)) for s, c in p.coeffs.items()
    )
    assert np.allclose(operator_dilate(p, ens), expected)


def test_ensemble_must_be_disjoint():
    with pytest.raises(ValidationError):
        DilationEnsemble(((0, 1), (1, 2)))
    with pytest.raises(ValidationError):
        operator_dilate(expand(np.eye(2)), [(3,)])


def test_weight_diagonal_degree():
    # p(W) with p of degree t has Pauli degree t
    k = 5
    for t in range(k + 1):
        vals = np.arange(k + 1, dtype=float) ** t
        assert diagonal_degree(weight_diagonal(vals, k)) == t


@pytest.mark.parametrize("k", range(4, 11))
def test_cz_approximation_against_lp(k):
    f = cz_target(k)
    for r in np.arange(1.5, k, 0.5):
        res = cz_low_degree_approx(k, r)
        cap = min(k, math.ceil(math.sqrt(k * r) - 1e-12))
        assert res.degree <= cap == res.target_degree
        assert np.abs(res.poly_values).max() <= 1 + 1e-12
        if cap < k:
            vals, _ = oracles.lp_minimax(np.arange(k + 1), f, cap)
            peak = np.abs(vals).max()
            vals = vals / peak if peak > 1 else vals
            assert abs(res.spectral_error - np.abs(vals - f).max()) < 1e-8
        else:
            assert res.spectral_error == 0
        dense_err = spectral_norm(res.operator - oracles.dense_cz(k))
        assert abs(dense_err - res.spectral_error) < 1e-12


def test_cz_full_degree_case_is_exact():
    # sqrt(k r) >= k once r >= k; with r < k this needs the ceiling, e.g. k=4, r=3 -> D=4
    res = cz_low_degree_approx(4, 3)
    assert res.target_degree == 4 and res.spectral_error == 0
    assert np.allclose(res.operator, oracles.dense_cz(4))


def test_cz_bound_is_vacuous_at_small_r():
    assert cz_error_bound(100) > 2
    assert cz_error_bound(400) < 2
    assert not cz_low_degree_approx(8, 4).bound_nonvacuous


@pytest.mark.parametrize("k,r", [(1, 1.5), (4, 1), (4, 4), (4, 0.5)])
def test_cz_rejects_bad_parameters(k, r):
    with pytest.raises(ArgumentError):
        cz_low_degree_approx(k, r)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qlc0.errors import ArgumentError
from qlc0.pauli import (
    PauliExpansion,
    count_low_weight,
    expand,
    high_part,
    label,
    low_weight_strings,
    parse_label,
    pauli_matrix,
    restrict_away_from,
    spectrum_csv,
    synthesize,
    truncate_degree,
)
from qlc0.randomops import ginibre


@settings(max_examples=30, deadline=None)
@given(q=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_expand_matches_trace_formula(q, seed):
    a = ginibre(2**q, seed)
    fast = expand(a)
    slow = oracles.pauli_coeffs(a)
    assert set(fast.coeffs) == set(slow)
    for s, c in slow.items():
        assert abs(fast[s] - c) < 1e-12


@settings(max_examples=30, deadline=None)
@given(q=st.integers(1, 5), seed=st.integers(0, 10**6))
def test_round_trip(q, seed):
    a = ginibre(2**q, seed)
    assert np.allclose(synthesize(expand(a)), a, atol=1e-12)


def test_sparse_synthesis_path():
    p = PauliExpansion.from_labels({"XYZ": 0.5, "III": 1j, "ZIY": -0.25})
    expected = 0.5 * oracles.pauli((1, 2, 3)) + 1j * np.eye(8) - 0.25 * oracles.pauli((3, 0, 2))
    assert np.allclose(synthesize(p), expected)


def test_pauli_matrix_and_labels():
    assert label((0, 1, 2, 3)) == "IXYZ"
    assert parse_label("ixyz") == (0, 1, 2, 3)
    assert np.allclose(pauli_matrix((2,)), [[0, -1j], [1j, 0]])
    with pytest.raises(ArgumentError):
        parse_label("XQ")


def test_cz_spectrum():
    cz = np.diag([1, 1, 1, -1]).astype(complex)
    exp = expand(cz)
    assert exp.labels() == pytest.approx({"II": 0.5, "IZ": 0.5, "ZI": 0.5, "ZZ": -0.5})
    assert exp.degree == 2
    csv = spectrum_csv(exp).splitlines()
    assert csv[0] == "sigma_string,weight,re,im"
    assert [row.split(",")[0] for row in csv[1:]] == ["II", "IZ", "ZI", "ZZ"]


@settings(max_examples=30, deadline=None)
@given(q=st.integers(1, 4), seed=st.integers(0, 10**6), d=st.integers(0, 4))
def test_parseval_and_truncation_split(q, seed, d):
    a = ginibre(2**q, seed)
    p = expand(a)
    assert np.isclose(p.l2_norm_sq(), np.linalg.norm(a) ** 2 / 2**q)
    low, high = truncate_degree(p, d), high_part(p, d)
    assert low.degree <= d
    assert np.isclose(low.l2_norm_sq() + high.l2_norm_sq(), p.l2_norm_sq())
    assert np.allclose(synthesize(low) + synthesize(high), a)


def test_restrict_away_from_is_normalized_partial_trace():
    a = ginibre(8, 3)
    kept = synthesize(restrict_away_from(expand(a), [1]))
    reduced = oracles.partial_trace(a, [1]) / 2
    # reduced operator on wires (0, 2), identity put back on wire 1
    expected = oracles.gate_on(np.kron(reduced, np.eye(2)), [0, 2, 1], 3)
    assert np.allclose(kept, expected)


def test_low_weight_enumeration_count():
    for q in range(1, 5):
        for d in range(q + 1):
            strings = list(low_weight_strings(q, d))
            assert len(strings) == len(set(strings)) == count_low_weight(q, d)
            assert all(sum(1 for x in s if x) <= d for s in strings)


def test_expansion_arithmetic():
    p = PauliExpansion.from_labels({"XI": 1.0, "ZZ": 2.0})
    q = PauliExpansion.from_labels({"XI": 1.0})
    assert (p - q).labels() == {"ZZ": 2.0}
    assert p.scale(2).labels() == {"XI": 2.0, "ZZ": 4.0}
    assert PauliExpansion(3).degree == 0
    with pytest.raises(ArgumentError):
        PauliExpansion(2, {(1,): 1.0})

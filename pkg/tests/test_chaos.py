import itertools
import math

import numpy as np
import pytest

from wickfield.chaos import (
    HERMITE_MAX_ORDER,
    ChaosBasisSpec,
    enumerate_indices,
    hermite,
    ordering_digest,
    wick_features,
)
from wickfield.errors import WickfieldError


def brute_force_indices(spec):
    """Independent enumeration: product over per-slot ranges, filtered by order."""
    n = spec.n_variables
    found = set()
    for combo in itertools.product(range(spec.K + 1), repeat=n):
        if sum(combo) <= spec.K:
            found.add(combo)
    return found


def test_hermite_paper_values():
    assert hermite(0, 0.37) == 1.0
    assert hermite(1, -2.5) == -2.5
    assert hermite(2, 0.0) == -1.0
    assert hermite(3, 2.0) == pytest.approx(2.0)


def test_hermite_recurrence_matches_closed_forms():
    rng = np.random.default_rng(123)
    x = rng.uniform(-5, 5, size=1000)
    closed = {1: x, 2: x**2 - 1.0, 3: x**3 - 3.0 * x}
    for k, expected in closed.items():
        got = hermite(k, x)
        scale = np.maximum(np.abs(expected), 1.0)
        assert np.max(np.abs(got - expected) / scale) < 1e-12


def test_hermite_bounds():
    with pytest.raises(WickfieldError):
        hermite(-1, 0.0)
    with pytest.raises(WickfieldError):
        hermite(HERMITE_MAX_ORDER + 1, 0.0)
    assert np.isfinite(hermite(10, 1.3))


def test_count_zero_order():
    spec = ChaosBasisSpec(2, 3, 0)
    assert enumerate_indices(spec) == [(0,) * 6]


@pytest.mark.parametrize("I,J,K,expected", [(1, 2, 2, 6), (1, 4, 3, 35), (2, 3, 2, 28)])
def test_counts_against_formula_and_brute_force(I, J, K, expected):
    spec = ChaosBasisSpec(I, J, K)
    idx = enumerate_indices(spec)
    assert len(idx) == expected == spec.count()
    assert set(idx) == brute_force_indices(spec)


def test_canonical_ordering():
    idx = enumerate_indices(ChaosBasisSpec(1, 2, 2))
    assert idx == [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]


def test_enumeration_overflow_guard():
    with pytest.raises(WickfieldError):
        enumerate_indices(ChaosBasisSpec(10, 10, 20))


def test_digest_is_stable_and_spec_sensitive():
    d1 = ordering_digest(ChaosBasisSpec(1, 4, 3))
    d2 = ordering_digest(ChaosBasisSpec(1, 4, 3))
    d3 = ordering_digest(ChaosBasisSpec(1, 3, 3))
    assert d1 == d2
    assert d1 != d3
    assert len(d1) == 64


def test_wick_features_at_zero():
    spec = ChaosBasisSpec(1, 2, 2)
    out = wick_features(np.zeros(2), spec)
    # ordering: (0,0), (0,1), (1,0), (0,2), (1,1), (2,0)
    expected = np.array([1.0, 0.0, 0.0, -1.0 / np.sqrt(2.0), 0.0, -1.0 / np.sqrt(2.0)])
    assert np.allclose(out.values, expected, atol=1e-15)


def test_wick_feature_order_one_is_identity():
    spec = ChaosBasisSpec(1, 3, 2)
    xi = np.array([0.4, -1.2, 2.5])
    out = wick_features(xi, spec)
    for pos, alpha in enumerate(out.ordering):
        if sum(alpha) == 1:
            v = alpha.index(1)
            assert out.values[pos] == pytest.approx(xi[v])


def test_wick_alpha_zero_is_one_batched():
    spec = ChaosBasisSpec(1, 3, 3)
    rng = np.random.default_rng(0)
    out = wick_features(rng.standard_normal((50, 3)), spec)
    assert np.all(out.values[:, 0] == 1.0)


def test_wick_length_mismatch():
    with pytest.raises(WickfieldError):
        wick_features(np.zeros(4), ChaosBasisSpec(1, 3, 2))


def test_grading_orthogonal_to_lower_degree():
    # features of order k are uncorrelated with any polynomial of degree < k
    spec = ChaosBasisSpec(1, 2, 3)
    rng = np.random.default_rng(99)
    draws = rng.standard_normal((200_000, 2))
    feats = wick_features(draws, spec)
    x, y = draws[:, 0], draws[:, 1]
    poly_deg2 = 1.0 + 0.5 * x - y + 0.25 * x * y + x**2
    for pos, alpha in enumerate(feats.ordering):
        if sum(alpha) == 3:
            prods = feats.values[:, pos] * poly_deg2
            se = prods.std(ddof=1) / np.sqrt(len(prods))
            assert abs(prods.mean()) < 4.0 * se


def test_normalization_unit_second_moment():
    # E[xi_alpha^2] = 1 includes the 1/sqrt(alpha!) factor; alpha = 0 is
    # deterministic and checked exactly
    spec = ChaosBasisSpec(1, 1, 3)
    rng = np.random.default_rng(7)
    draws = rng.standard_normal((400_000, 1))
    feats = wick_features(draws, spec)
    for pos, alpha in enumerate(feats.ordering):
        sq = feats.values[:, pos] ** 2
        if sum(alpha) == 0:
            assert np.all(sq == 1.0)
            continue
        se = sq.std(ddof=1) / np.sqrt(len(sq))
        assert abs(sq.mean() - 1.0) < 4.0 * se

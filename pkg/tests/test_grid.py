import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dnpe.errors import DimensionError, InvalidDomainError, InvalidExponentError
from dnpe.grid import (Field, Grid, build_grid, exterior_tail, gagliardo_energy, lp_norm,
                       pair_weights, w1p_seminorm, wsq_seminorm)


def test_build_grid_three_nodes():
    g = build_grid(0, 1, 3)
    assert g.h == 0.25
    np.testing.assert_allclose(g.nodes, [0.25, 0.5, 0.75])


def test_build_grid_single_node_is_midpoint():
    g = build_grid(-1, 1, 1)
    assert g.h == 1.0
    np.testing.assert_allclose(g.nodes, [0.0])


@pytest.mark.parametrize("a,b,n", [(0, 1, 0), (1, 1, 4), (2, 1, 4), (0, math.inf, 3)])
def test_build_grid_rejects_bad_domains(a, b, n):
    with pytest.raises(InvalidDomainError):
        build_grid(a, b, n)


def test_nodes_are_read_only_and_grids_hash_by_parameters():
    g = build_grid(0, 2, 5)
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0
    assert g == build_grid(0, 2, 5)
    assert hash(g) == hash(build_grid(0, 2, 5))


def test_field_checks_length_and_finiteness():
    g = build_grid(0, 1, 3)
    with pytest.raises(DimensionError):
        Field(g, [1.0, 2.0])
    with pytest.raises(ValueError):
        Field(g, [1.0, np.nan, 2.0])


def test_field_arithmetic_needs_matching_grids():
    a = Field(build_grid(0, 1, 3), [1.0, 2.0, 3.0])
    b = Field(build_grid(0, 2, 3), [1.0, 2.0, 3.0])
    np.testing.assert_allclose((a + a).values, [2, 4, 6])
    np.testing.assert_allclose((2 * a - a).values, a.values)
    with pytest.raises(ValueError):
        a + b


def test_lp_norm_examples():
    g3 = build_grid(0, 1, 3)
    assert lp_norm(Field.zeros(g3), 2) == 0.0
    assert lp_norm(Field(g3, [1, 1, 1]), 1) == pytest.approx(0.75)
    assert lp_norm(Field(build_grid(0, 1, 2), [3, -4]), math.inf) == 4.0
    assert lp_norm(Field(build_grid(0, 1, 2), [3, -4]), "infinity") == 4.0


def test_lp_norm_rejects_small_exponent():
    with pytest.raises(InvalidExponentError):
        lp_norm(Field.zeros(build_grid(0, 1, 2)), 0.5)


def test_lp_norm_survives_huge_values():
    g = build_grid(0, 1, 4)
    u = Field(g, [1e200, 2e200, 0, 0])
    assert math.isfinite(lp_norm(u, 3))


def test_w1p_seminorm_constant_field():
    u = Field(build_grid(0, 1, 3), [1, 1, 1])
    assert w1p_seminorm(u, 3) == pytest.approx(32 ** (1 / 3))
    assert w1p_seminorm(Field.zeros(u.grid), 3) == 0.0


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-50, 50), seed=st.integers(0, 1000))
def test_w1p_seminorm_is_homogeneous(c, seed):
    g = build_grid(0, 1, 9)
    u = Field(g, np.random.default_rng(seed).normal(size=9))
    assert w1p_seminorm(u * c, 3.5) == pytest.approx(abs(c) * w1p_seminorm(u, 3.5), rel=1e-12,
                                                     abs=1e-300)


def test_single_node_seminorm_is_the_tail_term():
    g = build_grid(0, 1, 1)
    s, q = 0.5, 2.0
    tail = (0.5 ** (-s * q) * 2) / (s * q)
    assert wsq_seminorm(Field(g, [1.0]), s, q) ** q == pytest.approx(2 * g.h * tail)


def _brute_energy(u, a, b, s, q):
    n = len(u)
    h = (b - a) / (n + 1)
    x = a + h * np.arange(1, n + 1)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                total += h * h / abs(x[i] - x[j]) ** (1 + s * q) * abs(u[i] - u[j]) ** q
        tail = ((x[i] - a) ** (-s * q) + (b - x[i]) ** (-s * q)) / (s * q)
        total += 2 * h * tail * abs(u[i]) ** q
    return total


@pytest.mark.parametrize("n", [1, 5, 32])
@pytest.mark.parametrize("s,q", [(0.3, 1.5), (0.5, 2.0), (0.7, 3.0)])
def test_wsq_seminorm_matches_double_loop(n, s, q):
    g = build_grid(-0.5, 1.5, n)
    u = np.random.default_rng(n).normal(size=n)
    expect = _brute_energy(u, g.a, g.b, s, q)
    got = wsq_seminorm(Field(g, u), s, q) ** q
    assert got == pytest.approx(expect, rel=1e-12)


def test_pair_weights_symmetric_with_zero_diagonal():
    w = pair_weights(build_grid(0, 1, 7), 0.4, 2.5)
    np.testing.assert_array_equal(w, w.T)
    assert np.all(np.diag(w) == 0)
    assert np.all(w[~np.eye(7, dtype=bool)] > 0)


def test_gagliardo_energy_of_zero_is_zero():
    g = build_grid(0, 1, 6)
    w, t = pair_weights(g, 0.5, 2), exterior_tail(g, 0.5, 2)
    assert gagliardo_energy(np.zeros(6), g.h, w, t, 2) == 0.0

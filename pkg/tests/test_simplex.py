from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roml.core import ValidationError, make_rng
from roml.simplex import simplex_max


def vertex_enumeration_max(c, A, b):
    """Best basic feasible solution of ``max c@x, Ax=b, x>=0`` by trying every basis."""
    m, n = A.shape
    best = -np.inf
    for cols in combinations(range(n), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xb = np.linalg.solve(B, b)
        if xb.min() < -1e-10:
            continue
        x = np.zeros(n)
        x[list(cols)] = xb
        best = max(best, c @ x)
    return best


def test_textbook_lp():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  36 at (2, 6)
    A = np.array([[1, 0, 1, 0, 0], [0, 2, 0, 1, 0], [3, 2, 0, 0, 1]], dtype=float)
    res = simplex_max([3, 5, 0, 0, 0], A, [4, 12, 18])
    assert res.value == pytest.approx(36.0)
    assert np.allclose(res.x[:2], [2, 6])


def test_beale_cycling_example_terminates():
    # Beale: Dantzig's largest-coefficient rule cycles here; optimum 5/4
    c = np.array([0.75, -20, 0.5, -6, 0, 0, 0])
    A = np.array([
        [0.25, -8, -1, 9, 1, 0, 0],
        [0.5, -12, -0.5, 3, 0, 1, 0],
        [0, 0, 1, 0, 0, 0, 1],
    ])
    b = np.array([0.0, 0.0, 1.0])
    res = simplex_max(c, A, b)
    assert res.value == pytest.approx(float(Fraction(5, 4)))
    assert res.value == pytest.approx(vertex_enumeration_max(c, A, b))


def test_infeasible_and_unbounded():
    with pytest.raises(ValidationError):
        simplex_max([1, 0], [[1, 1]], [-1])          # x + y = -1 with x, y >= 0
    with pytest.raises(ValidationError):
        simplex_max([1, 0, 0], [[1, -1, 0], [0, 0, 1]], [0, 1])
    with pytest.raises(ValidationError):
        simplex_max([1, 2], [[1, 1]], [1, 2])


def test_redundant_equality_rows():
    A = np.array([[1.0, 1.0], [2.0, 2.0]])
    res = simplex_max([1.0, 3.0], A, [1.0, 2.0])
    assert res.value == pytest.approx(3.0)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10**6), m=st.integers(1, 3), extra=st.integers(1, 4))
def test_matches_vertex_enumeration(seed, m, extra):
    rng = make_rng(seed)
    n = m + extra
    A = np.hstack([rng.random((m, extra)), np.eye(m)])
    b = rng.random(m) + 0.1
    c = rng.normal(size=n)
    res = simplex_max(c, A, b)
    assert res.value == pytest.approx(vertex_enumeration_max(c, A, b), abs=1e-9)
    assert np.allclose(A @ res.x, b, atol=1e-9)
    assert res.x.min() >= -1e-12


def test_matches_scipy_on_random_lps():
    linprog = pytest.importorskip("scipy.optimize").linprog
    rng = make_rng(5)
    for _ in range(100):
        m, n = 3, 6
        A = np.hstack([rng.random((m, n - m)), np.eye(m)])
        b = rng.random(m)
        c = rng.normal(size=n)
        ref = linprog(-c, A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
        assert simplex_max(c, A, b).value == pytest.approx(-ref.fun, abs=1e-9)

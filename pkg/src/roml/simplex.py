"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Meant for the tiny LPs of the constrained setting (a handful of actions
and resources), where exactness and predictability matter more than speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NumericalError, ValidationError

PIVOT_TOL = 1e-12
OPT_TOL = 1e-11
MAX_PIVOTS = 10_000


@dataclass
class SimplexResult:
    x: np.ndarray
    value: float
    basis: list
    pivots: int


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    piv = tab[row, col]
    if abs(piv) < PIVOT_TOL:
        raise NumericalError(f"pivot element {piv!r} below {PIVOT_TOL}")
    tab[row] /= piv
    for r in range(tab.shape[0]):
        if r != row and tab[r, col] != 0.0:
            tab[r] -= tab[r, col] * tab[row]


def _run(tab: np.ndarray, basis: list, allowed: np.ndarray, budget: int) -> int:
    """Maximise the objective stored in the last row (as reduced costs) in place.

    The last row holds ``-reduced cost`` so a negative entry marks an
    improving column. Returns the number of pivots used.
    """
    m = tab.shape[0] - 1
    pivots = 0
    while True:
        obj = tab[-1, :-1]
        # Bland: lowest-index improving column
        candidates = np.flatnonzero((obj < -OPT_TOL) & allowed)
        if len(candidates) == 0:
            return pivots
        col = int(candidates[0])
        column = tab[:m, col]
        positive = column > PIVOT_TOL
        if not positive.any():
            if (column > 0).any():
                raise NumericalError(f"entering column {col} has only sub-tolerance positive entries")
            raise ValidationError("LP is unbounded")
        ratios = np.full(m, np.inf)
        ratios[positive] = tab[:m, -1][positive] / column[positive]
        best = ratios.min()
        tied = np.flatnonzero(ratios <= best + 1e-15 * max(1.0, abs(best)))
        # Bland: among tied rows leave the basic variable with the lowest index
        row = int(min(tied, key=lambda r: basis[r]))
        _pivot(tab, row, col)
        basis[row] = col
        pivots += 1
        if pivots > budget:
            raise NumericalError("simplex exceeded its pivot budget")


def simplex_max(c, A_eq, b_eq) -> SimplexResult:
    """Maximise ``c @ x`` subject to ``A_eq @ x == b_eq`` and ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float, ndmin=2)
    b = np.array(b_eq, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValidationError("inconsistent LP dimensions")
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    # phase 1: artificials n..n+m-1, maximise -sum(artificials)
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -A.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    pivots = _run(tab, basis, allowed, MAX_PIVOTS)
    if tab[-1, -1] < -1e-9:
        raise ValidationError("LP is infeasible")

    # drive zero-level artificials out of the basis, dropping redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n:
            nonzero = np.flatnonzero(np.abs(tab[r, :n]) > PIVOT_TOL)
            if len(nonzero) == 0:
                continue
            _pivot(tab, r, int(nonzero[0]))
            basis[r] = int(nonzero[0])
            pivots += 1
        keep.append(r)
    tab = np.vstack([tab[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = [basis[r] for r in keep]

    # phase 2: objective row = -c expressed in the current basis
    tab[-1, :n] = -c
    for r, j in enumerate(basis):
        if tab[-1, j] != 0.0:
            tab[-1] -= tab[-1, j] * tab[r]
    pivots += _run(tab, basis, np.ones(n, dtype=bool), MAX_PIVOTS - pivots)

    x = np.zeros(n)
    for r, j in enumerate(basis):
        x[j] = tab[r, -1]
    return SimplexResult(x=x, value=float(c @ x), basis=basis, pivots=pivots)

"""A small dense two-phase simplex solver for the master linear programs.

Solves   min c.x  s.t.  A x = b,  x >= 0   and returns row duals alongside
the primal solution. The masters built on top have a few dozen rows at most,
so a dense tableau with Bland's rule (deterministic, cycle-free) is entirely
adequate and keeps the package free of external solver dependencies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError

_TOL = 1e-9
_MAX_PIVOTS = 100_000
# Degenerate-pivot streak that triggers the switch to Bland's rule.
_BLAND_AFTER = 40


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None  # one per input row, for the original rhs


def solve_lp(c, A, b) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise SolverError("inconsistent LP dimensions")

    # Normalize to b >= 0; remember the flips to unflip duals later.
    signs = np.where(b < 0, -1.0, 1.0)
    A = A * signs[:, None]
    b = b * signs

    # Tableau over [structural | artificial | rhs]; artificials stay in the
    # tableau through phase 2 (banned from entering) because their columns
    # hold B^-1, which yields the duals for free.
    T = np.empty((m, n + m + 1))
    T[:, :n] = A
    T[:, n : n + m] = np.eye(m)
    T[:, -1] = b
    basis = list(range(n, n + m))

    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    if not _iterate(T, basis, phase1_cost, entering_limit=n + m):
        raise SolverError("phase-1 simplex failed to terminate")
    if phase1_cost[basis] @ T[:, -1] > 1e-7:
        return LPResult(status="infeasible")

    # Pivot leftover artificials out of the basis where possible; rows where
    # that fails are redundant equalities and their dual is zero.
    for row in range(m):
        if basis[row] >= n and T[row, -1] <= _TOL:
            for j in range(n):
                if abs(T[row, j]) > 1e-7:
                    _pivot(T, basis, row, j)
                    break

    full_cost = np.concatenate([c, np.zeros(m)])
    if not _iterate(T, basis, full_cost, entering_limit=n):
        return LPResult(status="unbounded")

    x = np.zeros(n + m)
    for row, var in enumerate(basis):
        x[var] = T[row, -1]
    duals = full_cost[basis] @ T[:, n : n + m]
    return LPResult(
        status="optimal",
        x=x[:n],
        objective=float(c @ x[:n]),
        duals=duals * signs,
    )


def _iterate(T: np.ndarray, basis: list[int], cost: np.ndarray, entering_limit: int) -> bool:
    """Run simplex pivots in place; False only when the LP is unbounded.

    Pricing uses Dantzig's rule (most negative reduced cost) for speed and
    falls back to Bland's rule after a stretch of degenerate pivots, which
    restores the termination guarantee without paying Bland's cost on every
    step.
    """
    m = T.shape[0]
    stalled = 0
    for _ in range(_MAX_PIVOTS):
        reduced = cost[:entering_limit] - cost[basis] @ T[:, :entering_limit]
        entering = -1
        if stalled < _BLAND_AFTER:
            j = int(np.argmin(reduced))
            if reduced[j] < -_TOL:
                entering = j
        else:
            for j in range(entering_limit):
                if reduced[j] < -_TOL:
                    entering = j
                    break
        if entering < 0:
            return True
        # Ratio test; ties break toward the smallest basic variable index.
        leaving = -1
        best_ratio = np.inf
        for row in range(m):
            coeff = T[row, entering]
            if coeff > _TOL:
                ratio = T[row, -1] / coeff
                if ratio < best_ratio - _TOL or (
                    ratio < best_ratio + _TOL and (leaving < 0 or basis[row] < basis[leaving])
                ):
                    best_ratio = min(ratio, best_ratio)
                    leaving = row
        if leaving < 0:
            return False  # unbounded in phase 2; cannot happen in phase 1
        stalled = stalled + 1 if best_ratio <= _TOL else 0
        _pivot(T, basis, leaving, entering)
    raise SolverError("simplex exceeded the pivot budget")


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and abs(T[r, col]) > 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col

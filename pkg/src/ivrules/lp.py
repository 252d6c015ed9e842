"""Dense two-phase tableau simplex for small equality-form LPs.

Solves ``min c @ x  s.t.  A @ x = b, x >= 0``. Pivoting follows Bland's rule
(lowest-index entering column, lowest-index leaving basic variable among
ratio ties), which cannot cycle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, Unbounded

PIVOT_TOL = 1e-9


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    value: float
    basis: tuple
    iterations: int


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _run(T, basis, n_cols, tol, max_iter):
    """Iterate on tableau ``T`` whose last row holds reduced costs and last column the rhs."""
    it = 0
    m = T.shape[0] - 1
    while True:
        costs = T[-1, :n_cols]
        entering = np.flatnonzero(costs < -tol)
        if entering.size == 0:
            return it
        col = int(entering[0])
        column = T[:m, col]
        candidates = np.flatnonzero(column > tol)
        if candidates.size == 0:
            raise Unbounded(f"column {col} has no positive entry")
        ratios = T[candidates, -1] / column[candidates]
        best = ratios.min()
        ties = candidates[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        it += 1
        if it > max_iter:
            raise RuntimeError("simplex iteration limit exceeded")


def simplex(c, A_eq, b_eq, tol: float = PIVOT_TOL, max_iter: int = 10_000) -> LPSolution:
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase 1: artificials n..n+m-1 start in the basis
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    iters = _run(T, basis, n + m, tol, max_iter)
    residual = -T[-1, -1]
    if residual > tol * max(1.0, float(b.sum())):
        raise Infeasible(f"phase-1 residual {residual:.3g}")

    # drive remaining artificials out; rows where that is impossible are redundant
    keep = []
    for r in range(m):
        if basis[r] >= n:
            nz = np.flatnonzero(np.abs(T[r, :n]) > tol)
            if nz.size:
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
                keep.append(r)
        else:
            keep.append(r)
    T2 = np.zeros((len(keep) + 1, n + 1))
    T2[:-1, :n] = T[keep, :n]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[r] for r in keep]

    # phase 2: reduced costs of the original objective
    T2[-1, :n] = c
    for r, j in enumerate(basis):
        if T2[-1, j] != 0.0:
            T2[-1] -= T2[-1, j] * T2[r]
    iters += _run(T2, basis, n, tol, max_iter)

    x = np.zeros(n)
    x[basis] = np.maximum(T2[:-1, -1], 0.0)
    return LPSolution(x=x, value=float(c @ x), basis=tuple(basis), iterations=iters)

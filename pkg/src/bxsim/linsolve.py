"""Small dense linear solver with rank detection.

Gaussian elimination with partial pivoting on the augmented matrix.  A pivot
whose magnitude falls below ``tol`` times the largest entry scale is treated
as zero, marking its column as free.  Systems here are tiny (one row per
file), so no scaling or iterative refinement is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentSystemError


@dataclass(frozen=True)
class DenseSystem:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got shape {a.shape}")
        if b.shape != (a.shape[0],):
            raise ValueError(f"rhs must have shape ({a.shape[0]},), got {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("system entries must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class Unique:
    x: np.ndarray


@dataclass(frozen=True)
class Family:
    """A solution set: particular + span of the null-space basis columns."""

    particular: np.ndarray
    nullspace: np.ndarray  # shape (n, n - rank), one basis vector per column


def solve(sys: DenseSystem, tol: float = 1e-10) -> Unique | Family:
    """Solve ``a @ x = b``; raise InconsistentSystemError if no solution.

    Returns Unique(x) at full rank, otherwise a Family holding one solution
    (free variables set to 0) and a null-space basis.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = sys.a.shape[0]
    aug = np.hstack([sys.a, sys.b[:, None]])
    scale = np.max(np.abs(sys.a)) if n else 0.0
    thresh = tol * max(scale, 1e-300)

    pivot_cols: list[int] = []
    row = 0
    for col in range(n):
        if row == n:
            break
        p = row + int(np.argmax(np.abs(aug[row:, col])))
        if abs(aug[p, col]) <= thresh:
            continue  # free column
        if p != row:
            aug[[row, p]] = aug[[p, row]]
        factors = aug[row + 1 :, col] / aug[row, col]
        aug[row + 1 :] -= factors[:, None] * aug[row]
        aug[row + 1 :, col] = 0.0
        pivot_cols.append(col)
        row += 1

    rank = len(pivot_cols)
    b_scale = max(scale, float(np.max(np.abs(sys.b))) if n else 0.0, 1e-300)
    if rank < n and np.any(np.abs(aug[rank:, n]) > tol * b_scale):
        raise InconsistentSystemError(
            f"rank {rank} matrix with inconsistent right-hand side"
        )

    free_cols = [c for c in range(n) if c not in pivot_cols]

    def back_substitute(rhs: np.ndarray) -> np.ndarray:
        # rhs is length-rank; solves the echelon system for the pivot vars.
        x = np.zeros(n)
        for i in range(rank - 1, -1, -1):
            c = pivot_cols[i]
            x[c] = (rhs[i] - aug[i, c + 1 : n] @ x[c + 1 : n]) / aug[i, c]
        return x

    particular = back_substitute(aug[:rank, n].copy())
    if rank == n:
        return Unique(x=particular)

    basis = np.zeros((n, len(free_cols)))
    for j, f in enumerate(free_cols):
        v = back_substitute(-aug[:rank, f].copy())
        v[f] = 1.0
        basis[:, j] = v
    return Family(particular=particular, nullspace=basis)

"""Exact integer lattice helpers: kernel bases, Hermite normal form, rank."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sympy import ZZ
from sympy.polys.matrices import DomainMatrix


def _as_rows(A) -> list[list[int]]:
    return [[int(x) for x in row] for row in np.asarray(A, dtype=object).tolist()]


def column_echelon(A) -> tuple[list[list[int]], list[list[int]], int]:
    """Unimodular column reduction ``A U = [H | 0]``.

    Returns ``(H, U, r)`` as nested lists; the first ``r`` columns of ``A U``
    are nonzero, the remaining columns of ``U`` span the integer kernel.
    """
    rows = _as_rows(A)
    m = len(rows)
    k = len(rows[0]) if rows else 0
    # store columns of the stacked matrix [A; I] for cheap column operations
    cols = [[rows[i][j] for i in range(m)] + [int(i == j) for i in range(k)] for j in range(k)]
    r = 0
    for i in range(m):
        if r == k:
            break
        # gcd-combine all columns r.. on row i into column r
        for j in range(r + 1, k):
            a, b = cols[r][i], cols[j][i]
            if b == 0:
                continue
            g, x, y = _xgcd(a, b)
            ca, cb = cols[r], cols[j]
            u, v = a // g, b // g
            cols[r] = [x * p + y * q for p, q in zip(ca, cb)]
            cols[j] = [u * q - v * p for p, q in zip(ca, cb)]
        if cols[r][i] != 0:
            if cols[r][i] < 0:
                cols[r] = [-x for x in cols[r]]
            r += 1
    H = [[cols[j][i] for j in range(k)] for i in range(m)]
    U = [[cols[j][m + i] for j in range(k)] for i in range(k)]
    return H, U, r


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def integer_rank(A) -> int:
    return column_echelon(A)[2]


def kernel_lattice_basis(A, reduce: bool = True) -> list[tuple[int, ...]]:
    """Basis of ``{z in Z^k : A z = 0}``; LLL-reduced when ``reduce`` is set."""
    rows = _as_rows(A)
    k = len(rows[0]) if rows else 0
    if not rows:
        return [tuple(int(i == j) for j in range(k)) for i in range(k)]
    _, U, r = column_echelon(rows)
    basis = [[U[i][j] for i in range(k)] for j in range(r, k)]
    if reduce and len(basis) > 1:
        basis = DomainMatrix(basis, (len(basis), k), ZZ).lll().to_list()
        basis = [[int(x) for x in row] for row in basis]
    out = []
    for v in basis:
        lead = next(x for x in v if x)
        out.append(tuple(v if lead > 0 else [-x for x in v]))
    return out


def hermite_normal_form(A) -> list[list[int]]:
    """Row-style HNF of the integer row lattice of ``A`` (zero rows dropped)."""
    rows = _as_rows(A)
    H, _, r = column_echelon([list(c) for c in zip(*rows)])
    # column echelon of A^T is the row echelon of A, transposed back
    E = [[H[i][j] for i in range(len(H))] for j in range(r)]
    # make it reduced: pivots positive, entries above each pivot in [0, pivot)
    pivots = []
    for i, row in enumerate(E):
        c = next(j for j, x in enumerate(row) if x)
        pivots.append(c)
    for i in range(len(E)):
        c = pivots[i]
        for h in range(i):
            q = E[h][c] // E[i][c]
            if q:
                E[h] = [a - q * b for a, b in zip(E[h], E[i])]
    return E


def row_lattice_equal(A, B) -> bool:
    return hermite_normal_form(A) == hermite_normal_form(B)


def rational_rank(A) -> int:
    return DomainMatrix(_as_rows(A), np.shape(A), ZZ).convert_to(ZZ.get_field()).rank()


def has_positive_row_combination(A: Sequence[Sequence[int]]) -> bool:
    """Whether the all-ones vector lies in the rational row span of ``A``."""
    rows = _as_rows(A)
    k = len(rows[0])
    return rational_rank(rows) == rational_rank(rows + [[1] * k])

"""Exact fiber enumeration and move-graph connectivity.

A fiber is the set of nonnegative integer vectors ``y`` with ``A y = t``.
Because the all-ones vector lies in the row span of ``A``, the total count
is fixed by ``t`` and every fiber is finite.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numba
import numpy as np
import sympy

DEFAULT_FIBER_CAP = 10**6
CAP_ENV = "FFMARKOV_FIBER_CAP"


class FiberTooLarge(RuntimeError):
    def __init__(self, cap: int, count: int):
        super().__init__(f"fiber enumeration exceeded the cap of {cap} points ({count} found so far)")
        self.cap = cap
        self.count = count


class InfiniteFiberError(ValueError):
    pass


def fiber_cap() -> int:
    return int(os.environ.get(CAP_ENV, DEFAULT_FIBER_CAP))


@dataclass
class Fiber:
    t: tuple[int, ...]
    points: np.ndarray  # (N, k), lexicographically descending

    def __len__(self) -> int:
        return self.points.shape[0]

    def as_lists(self) -> list[list[int]]:
        return self.points.tolist()


def total_weights(A) -> list[Fraction]:
    """Rational ``w`` with ``w A = 1``, so that ``sum(y) = w . (A y)``."""
    M = sympy.Matrix(np.asarray(A, dtype=object).tolist())
    ones = sympy.Matrix([[1] * M.shape[1]])
    try:
        sol, params = M.T.gauss_jordan_solve(ones.T)
    except ValueError:
        raise InfiniteFiberError("the all-ones vector is not in the row span of A; fibers may be infinite") from None
    sol = sol.subs({p: 0 for p in params})
    return [Fraction(int(x.p), int(x.q)) for x in sol]


def fiber_total(A, t: Sequence[int], weights: Sequence[Fraction] | None = None) -> Fraction:
    weights = total_weights(A) if weights is None else weights
    return sum((w * int(x) for w, x in zip(weights, t)), Fraction(0))


@numba.njit(cache=True)
def _enumerate(A, t, total, cap, limit):
    m, k = A.shape
    # per unit of count, coordinates i.. add between lo[i] and hi[i] to each row
    lo = np.zeros((k, m), dtype=np.int64)
    hi = np.zeros((k, m), dtype=np.int64)
    for r in range(m):
        cur_lo = A[r, k - 1]
        cur_hi = A[r, k - 1]
        for i in range(k - 1, -1, -1):
            cur_lo = min(cur_lo, A[r, i])
            cur_hi = max(cur_hi, A[r, i])
            lo[i, r] = cur_lo
            hi[i, r] = cur_hi
    out = np.zeros((16, k), dtype=np.int64)
    count = 0
    overflow = False
    y = np.zeros(k, dtype=np.int64)
    if k == 1:
        y[0] = total
        for r in range(m):
            if A[r, 0] * total != t[r]:
                return out[:0].copy(), False
        out[0] = y
        return out[:1].copy(), False
    rem = t.copy()
    left = total
    assigned = np.zeros(k, dtype=np.bool_)
    # DFS over coordinates 0..k-2, values counting down; the last one is forced
    i = 0
    y[0] = total + 1
    while i >= 0:
        if assigned[i]:
            for r in range(m):
                rem[r] += A[r, i] * y[i]
            left += y[i]
            assigned[i] = False
        y[i] -= 1
        if y[i] < 0:
            i -= 1
            continue
        v = y[i]
        left -= v
        for r in range(m):
            rem[r] -= A[r, i] * v
        assigned[i] = True
        ok = True
        for r in range(m):
            if rem[r] < lo[i + 1, r] * left or rem[r] > hi[i + 1, r] * left:
                ok = False
                break
        if not ok:
            continue
        if i < k - 2:
            i += 1
            y[i] = left + 1
            continue
        # lo == hi == A[:, k-1] on the last coordinate, so the rows are exact
        y[k - 1] = left
        if count == out.shape[0]:
            bigger = np.zeros((2 * out.shape[0], k), dtype=np.int64)
            bigger[:count] = out[:count]
            out = bigger
        out[count] = y
        count += 1
        if count > cap:
            overflow = True
            break
        if limit > 0 and count >= limit:
            break
    return out[:count].copy(), overflow


def enumerate_fiber(A, t: Sequence[int], cap: int | None = None, limit: int = 0) -> Fiber:
    """All nonnegative integer ``y`` with ``A y = t``.

    ``limit`` stops after that many points (a probe); ``cap`` raises
    :class:`FiberTooLarge` when the fiber is bigger.
    """
    A = np.asarray(A, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    cap = fiber_cap() if cap is None else cap
    total = fiber_total(A, t)
    if total.denominator != 1 or total < 0:
        return Fiber(tuple(int(x) for x in t), np.zeros((0, A.shape[1]), dtype=np.int64))
    pts, overflow = _enumerate(A, t.copy(), int(total), cap, limit)
    if overflow:
        raise FiberTooLarge(cap, len(pts))
    return Fiber(tuple(int(x) for x in t), pts)


def fiber_of(A, y: Sequence[int], cap: int | None = None) -> Fiber:
    A = np.asarray(A, dtype=np.int64)
    return enumerate_fiber(A, A @ np.asarray(y, dtype=np.int64), cap)


# -- connectivity ----------------------------------------------------------

@numba.njit(cache=True)
def _hash(row, mult):
    h = np.uint64(1469598103934665603)
    for x in range(row.shape[0]):
        h = (h ^ np.uint64(row[x] + 1)) * mult
    return h


@numba.njit(cache=True)
def _build_table(points):
    n = points.shape[0]
    size = 1
    while size < 2 * n + 2:
        size *= 2
    table = -np.ones(size, dtype=np.int64)
    mult = np.uint64(1099511628211)
    for p in range(n):
        slot = np.int64(_hash(points[p], mult) & np.uint64(size - 1))
        while table[slot] >= 0:
            slot = (slot + 1) & (size - 1)
        table[slot] = p
    return table


@numba.njit(cache=True)
def _lookup(table, points, q):
    size = table.shape[0]
    mult = np.uint64(1099511628211)
    slot = np.int64(_hash(q, mult) & np.uint64(size - 1))
    while table[slot] >= 0:
        p = table[slot]
        same = True
        for x in range(q.shape[0]):
            if points[p, x] != q[x]:
                same = False
                break
        if same:
            return p
        slot = (slot + 1) & (size - 1)
    return -1


@numba.njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@numba.njit(cache=True)
def _components(points, moves):
    n, k = points.shape
    parent = np.arange(n)
    if n == 0:
        return parent
    table = _build_table(points)
    q = np.zeros(k, dtype=np.int64)
    for p in range(n):
        for mv in range(moves.shape[0]):
            for sign in (1, -1):
                ok = True
                for x in range(k):
                    val = points[p, x] + sign * moves[mv, x]
                    if val < 0:
                        ok = False
                        break
                    q[x] = val
                if not ok:
                    continue
                other = _lookup(table, points, q)
                if other >= 0:
                    a = _find(parent, p)
                    b = _find(parent, other)
                    if a != b:
                        parent[b] = a
    for p in range(n):
        parent[p] = _find(parent, p)
    return parent


def _move_array(moves, k: int) -> np.ndarray:
    arr = np.asarray([tuple(getattr(m, "z", m)) for m in moves], dtype=np.int64)
    return arr.reshape(-1, k)


def component_labels(f: Fiber, moves: Iterable) -> np.ndarray:
    k = f.points.shape[1]
    return _components(f.points, _move_array(list(moves), k))


def is_connected(f: Fiber, moves: Iterable) -> bool:
    """Whether ``moves`` (and their negatives) connect all points of ``f``."""
    if len(f) <= 1:
        return True
    labels = component_labels(f, moves)
    return bool((labels == labels[0]).all())


def linked(f: Fiber, moves: np.ndarray, start, goal) -> bool:
    """Whether ``start`` and ``goal`` (points of ``f``) share a component."""
    k = f.points.shape[1]
    labels = _components(f.points, np.asarray(moves, dtype=np.int64).reshape(-1, k))
    table = _build_table(f.points)
    a = _lookup(table, f.points, np.asarray(start, dtype=np.int64))
    b = _lookup(table, f.points, np.asarray(goal, dtype=np.int64))
    if a < 0 or b < 0:
        raise ValueError("endpoint is not a point of the fiber")
    return bool(labels[a] == labels[b])


def edge_list(f: Fiber, moves: Iterable) -> list[tuple[int, int]]:
    """Undirected edges ``(i, j)``, ``i < j``, between fiber points one move apart."""
    index = {tuple(p): i for i, p in enumerate(f.points.tolist())}
    edges = set()
    for i, p in enumerate(f.points.tolist()):
        for z in _move_array(list(moves), f.points.shape[1]).tolist():
            for sign in (1, -1):
                q = tuple(a + sign * b for a, b in zip(p, z))
                j = index.get(q)
                if j is not None and j != i:
                    edges.add((min(i, j), max(i, j)))
    return sorted(edges)


# -- sweeps over small totals ----------------------------------------------

def _multisets(k: int, total: int) -> np.ndarray:
    """Count vectors of every multiset of ``total`` cells out of ``k``."""
    combos = np.array(list(itertools.combinations_with_replacement(range(k), total)), dtype=np.intp)
    pts = np.zeros((len(combos), k), dtype=np.int64)
    rows = np.arange(len(combos))
    for j in range(total):
        np.add.at(pts, (rows, combos[:, j]), 1)
    return pts


def _grouped(A: np.ndarray, total: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All points of the given total, sorted by ``A y``, with group offsets."""
    k = A.shape[1]
    if total == 0:
        return np.zeros((1, k), dtype=np.int64), np.array([0, 1]), np.zeros((1, A.shape[0]), dtype=np.int64)
    pts = _multisets(k, total)
    stats = np.ascontiguousarray(pts @ A.T)
    keys = stats.view(np.dtype((np.void, stats.dtype.itemsize * stats.shape[1]))).ravel()
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    order = np.argsort(inverse.ravel(), kind="stable")
    bounds = np.searchsorted(inverse.ravel()[order], np.arange(len(first) + 1))
    return pts[order], bounds, stats[first]


def fibers_by_total(A, total: int) -> list[Fiber]:
    """Every nonempty fiber whose points have the given total count."""
    A = np.asarray(A, dtype=np.int64)
    pts, bounds, stats = _grouped(A, total)
    return [Fiber(tuple(int(x) for x in stats[g]), pts[bounds[g]:bounds[g + 1]])
            for g in range(len(bounds) - 1)]


@numba.njit(cache=True)
def _groups_connected(points, bounds, moves):
    k = points.shape[1]
    nm = moves.shape[0]
    pmask = np.zeros(nm, dtype=np.int64)
    nmask = np.zeros(nm, dtype=np.int64)
    for mv in range(nm):
        for x in range(k):
            if moves[mv, x] > 0:
                pmask[mv] |= 1 << (x % 62)
            elif moves[mv, x] < 0:
                nmask[mv] |= 1 << (x % 62)
    ok = np.ones(bounds.shape[0] - 1, dtype=np.bool_)
    q = np.zeros(k, dtype=np.int64)
    for g in range(bounds.shape[0] - 1):
        lo = bounds[g]
        n = bounds[g + 1] - lo
        if n <= 1:
            continue
        pts = points[lo:lo + n]
        table = _build_table(pts)
        parent = np.arange(n)
        comps = n
        for p in range(n):
            sm = 0
            for x in range(k):
                if pts[p, x] > 0:
                    sm |= 1 << (x % 62)
            for mv in range(nm):
                for sign in (1, -1):
                    need = pmask[mv] if sign == -1 else nmask[mv]
                    if (need & ~sm) != 0:
                        continue
                    good = True
                    for x in range(k):
                        val = pts[p, x] + sign * moves[mv, x]
                        if val < 0:
                            good = False
                            break
                        q[x] = val
                    if not good:
                        continue
                    other = _lookup(table, pts, q)
                    if other >= 0:
                        a = _find(parent, p)
                        b = _find(parent, other)
                        if a != b:
                            parent[b] = a
                            comps -= 1
            if comps == 1:
                break
        ok[g] = comps == 1
    return ok


def disconnected_fibers(A, moves, total: int) -> tuple[int, list[Fiber]]:
    """Number of fibers of the given total, and those ``moves`` leave disconnected."""
    A = np.asarray(A, dtype=np.int64)
    moves = np.asarray(moves, dtype=np.int64).reshape(-1, A.shape[1])
    moves = moves[np.maximum(moves, 0).sum(axis=1) <= total]
    pts, bounds, stats = _grouped(A, total)
    ok = _groups_connected(pts, bounds, moves)
    bad = [Fiber(tuple(int(x) for x in stats[g]), pts[bounds[g]:bounds[g + 1]]) for g in np.flatnonzero(~ok)]
    return len(ok), bad


def pairwise_disjoint(points: np.ndarray) -> bool:
    supp = points > 0
    for a, b in itertools.combinations(range(len(points)), 2):
        if (supp[a] & supp[b]).any():
            return False
    return True


def find_disjoint_support_fibers(A, total_bound: int) -> list[Fiber]:
    """Fibers with at least two points, all with pairwise disjoint supports."""
    out = []
    for n in range(1, total_bound + 1):
        for f in fibers_by_total(A, n):
            if len(f) >= 2 and pairwise_disjoint(f.points):
                out.append(f)
    return out

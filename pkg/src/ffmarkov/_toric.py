"""Binomial Buchberger completion with variable-by-variable saturation.

Given a set of kernel moves containing a lattice basis of ``ker A`` (``A``
positively graded), the binomials ``x^{z+} - x^{z-}`` generate an ideal
``J`` whose saturation by the product of all variables is the toric ideal
``I_A``.  Saturating one variable at a time, each step is a Groebner basis
under degree reverse lexicographic order with the saturated variable last;
dividing the basis by that variable yields ``J : x_j^inf``.  Once a
variable is saturated, common factors in it may be cancelled from any
binomial in later steps.

The Groebner kernel is compiled with numba.  Pairs are filtered with the
Gebauer-Moeller criteria; the criterion on already queued pairs is
applied when a pair is popped, which sees exactly the elements added while
the pair was waiting.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from typing import Sequence

import numba
import numpy as np

log = logging.getLogger(__name__)

@numba.njit(cache=True)
def _mask(u):
    m = 0
    for x in range(u.shape[0]):
        if u[x] > 0:
            m |= 1 << (x % 62)
    return m


@numba.njit(cache=True)
def _greater(u, v, order):
    du = 0
    dv = 0
    for x in range(u.shape[0]):
        du += u[x]
        dv += v[x]
    if du != dv:
        return du > dv
    for idx in range(order.shape[0] - 1, -1, -1):
        x = order[idx]
        d = u[x] - v[x]
        if d != 0:
            return d < 0
    return False


@numba.njit(cache=True)
def _divides(a, b):
    for x in range(a.shape[0]):
        if a[x] > b[x]:
            return False
    return True


@numba.njit(cache=True)
def _equal(a, b):
    for x in range(a.shape[0]):
        if a[x] != b[x]:
            return False
    return True


@numba.njit(cache=True)
def _normal_form(m, leads, tails, masks, active, size):
    m = m.copy()
    while True:
        mm = _mask(m)
        found = -1
        for i in range(size):
            if active[i] and (masks[i] & ~mm) == 0 and _divides(leads[i], m):
                found = i
                break
        if found < 0:
            return m
        for x in range(m.shape[0]):
            m[x] += tails[found, x] - leads[found, x]


@numba.njit(cache=True)
def _reduce(u, v, leads, tails, masks, active, size, order, cancel):
    u = u.copy()
    v = v.copy()
    while True:
        for x in range(u.shape[0]):
            if cancel[x]:
                g = min(u[x], v[x])
                u[x] -= g
                v[x] -= g
        if not _greater(u, v, order):
            u, v = v, u
        if _equal(u, v):
            return False, u, v
        nu = _normal_form(u, leads, tails, masks, active, size)
        nv = _normal_form(v, leads, tails, masks, active, size)
        if _equal(nu, nv):
            return False, u, v
        if _equal(nu, u) and _equal(nv, v):
            return True, u, v
        u = nu
        v = nv


@numba.njit(cache=True)
def _groebner(gu, gv, order, cancel):
    n = gu.shape[1]
    cap = 256
    leads = np.zeros((cap, n), dtype=np.int32)
    tails = np.zeros((cap, n), dtype=np.int32)
    masks = np.zeros(cap, dtype=np.int64)
    active = np.zeros(cap, dtype=np.bool_)
    size = 0
    heap = [(np.int64(0), np.int64(0), np.int64(0), np.int64(0))]
    heap.pop()
    seq = 0
    lcm = np.zeros(n, dtype=np.int32)

    ngen = gu.shape[0]
    g = 0
    while True:
        if g < ngen:
            ok, u, v = _reduce(gu[g], gv[g], leads, tails, masks, active, size, order, cancel)
            g += 1
        elif len(heap) > 0:
            _, _, i, j = heapq.heappop(heap)
            for x in range(n):
                lcm[x] = max(leads[i, x], leads[j, x])
            lm = masks[i] | masks[j]
            skip = False
            for h in range(max(i, j) + 1, size):
                if (masks[h] & ~lm) == 0 and _divides(leads[h], lcm):
                    same_i = True
                    same_j = True
                    for x in range(n):
                        hx = leads[h, x]
                        if max(leads[i, x], hx) != lcm[x]:
                            same_i = False
                        if max(leads[j, x], hx) != lcm[x]:
                            same_j = False
                    if not same_i and not same_j:
                        skip = True
                        break
            if skip:
                continue
            su = lcm - leads[i] + tails[i]
            sv = lcm - leads[j] + tails[j]
            ok, u, v = _reduce(su, sv, leads, tails, masks, active, size, order, cancel)
        else:
            break
        if not ok:
            continue

        # -- add the new element h with Gebauer-Moeller filtering of its pairs
        if size == cap:
            cap *= 2
            nl = np.zeros((cap, n), dtype=np.int32)
            nt = np.zeros((cap, n), dtype=np.int32)
            nm = np.zeros(cap, dtype=np.int64)
            na = np.zeros(cap, dtype=np.bool_)
            nl[:size] = leads[:size]
            nt[:size] = tails[:size]
            nm[:size] = masks[:size]
            na[:size] = active[:size]
            leads, tails, masks, active = nl, nt, nm, na
        h = size
        leads[h] = u
        tails[h] = v
        hm = _mask(u)
        masks[h] = hm
        act = np.flatnonzero(active[:size])
        na_ = act.shape[0]
        lcms = np.zeros((na_, n), dtype=np.int32)
        lmask = np.zeros(na_, dtype=np.int64)
        degs = np.zeros(na_, dtype=np.int64)
        coprime = np.zeros(na_, dtype=np.bool_)
        for a in range(na_):
            gi = act[a]
            d = 0
            for x in range(n):
                val = max(leads[gi, x], u[x])
                lcms[a, x] = val
                d += val
            degs[a] = d
            lmask[a] = masks[gi] | hm
            coprime[a] = (masks[gi] & hm) == 0
        for a in range(na_):
            if coprime[a]:
                continue
            drop = False
            for b in range(na_):
                if b == a or degs[b] > degs[a] or (lmask[b] & ~lmask[a]) != 0:
                    continue
                if not _divides(lcms[b], lcms[a]):
                    continue
                if degs[b] < degs[a] or coprime[b] or b < a:
                    drop = True
                    break
            if not drop:
                seq += 1
                heapq.heappush(heap, (degs[a], np.int64(seq), np.int64(act[a]), np.int64(h)))
        for a in range(na_):
            gi = act[a]
            if (hm & ~masks[gi]) == 0 and _divides(u, leads[gi]):
                active[gi] = False
        active[h] = True
        size += 1

    keep = np.flatnonzero(active[:size])
    return leads[keep].copy(), tails[keep].copy()


def toric_generators(moves: Sequence[Sequence[int]], n: int,
                     sat_order: Sequence[int] | None = None) -> list[tuple[int, ...]]:
    """Generating set of the toric ideal, as canonical kernel vectors.

    ``moves`` must contain a lattice basis of the kernel; extra kernel moves
    only speed the completion up.
    """
    z = np.asarray(moves, dtype=np.int32).reshape(-1, n)
    gu, gv = np.maximum(z, 0), np.maximum(-z, 0)
    sat_order = list(range(n))[::-1] if sat_order is None else list(sat_order)
    cancel = np.zeros(n, dtype=np.bool_)
    for step, j in enumerate(sat_order):
        order = np.array([x for x in range(n) if x != j] + [j], dtype=np.int64)
        gu, gv = _groebner(gu, gv, order, cancel)
        cancel[j] = True
        common = np.minimum(gu, gv) * cancel
        gu, gv = gu - common, gv - common
        log.debug("saturated variable %d (%d/%d): %d binomials", j, step + 1, n, len(gu))
    return sorted({_canonical(u - v) for u, v in zip(gu, gv) if (u != v).any()})


def _canonical(z: np.ndarray) -> tuple[int, ...]:
    nz = np.flatnonzero(z)
    if z[nz[0]] < 0:
        z = -z
    return tuple(int(x) for x in z)


def low_degree_moves(A: np.ndarray, max_degree: int) -> list[tuple[int, ...]]:
    """Moves joining the support-components of every fiber of total ``<= max_degree``.

    Two points of one fiber sharing a support coordinate are connected by
    moves of lower degree, so only fibers splitting into several
    support-components need a new move of their own degree.
    """
    A = np.asarray(A, dtype=np.int64)
    k = A.shape[1]
    moves: list[tuple[int, ...]] = []
    for deg in range(2, max_degree + 1):
        combos = np.array(list(itertools.combinations_with_replacement(range(k), deg)), dtype=np.intp)
        stats = A[:, combos].sum(axis=2).T
        _, inverse, counts = np.unique(stats, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        order = np.argsort(inverse, kind="stable")
        bounds = np.concatenate([[0], np.cumsum(counts)])
        for g in np.flatnonzero(counts > 1):
            members = combos[order[bounds[g]:bounds[g + 1]]]
            for a, b in _component_links(members):
                z = np.bincount(a, minlength=k) - np.bincount(b, minlength=k)
                moves.append(tuple(int(x) for x in z))
    return moves


def _component_links(members: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Representatives of consecutive support-components of one fiber."""
    parent = list(range(len(members)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[int, int] = {}
    for idx, cells in enumerate(members):
        for c in set(cells.tolist()):
            if c in owner:
                ra, rb = find(owner[c]), find(idx)
                if ra != rb:
                    parent[rb] = ra
            else:
                owner[c] = idx
    reps: dict[int, int] = {}
    for idx in range(len(members)):
        reps.setdefault(find(idx), idx)
    heads = list(reps.values())
    return [(members[heads[0]], members[h]) for h in heads[1:]]

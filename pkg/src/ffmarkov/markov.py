"""Markov bases of ``ker A``: computation, minimization, indispensability."""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from math import comb
from typing import Callable, Iterable, Sequence

import numpy as np

from . import fiber as fib
from ._toric import low_degree_moves, toric_generators
from .lattice import has_positive_row_combination, kernel_lattice_basis

log = logging.getLogger(__name__)

__all__ = [
    "Move",
    "MarkovBasis",
    "InfiniteFiberError",
    "kernel_lattice_basis",
    "compute_markov_basis",
    "reduce_to_minimal",
    "classify_indispensable",
    "degree_census",
    "certify",
    "format_move",
    "parse_move",
]

InfiniteFiberError = fib.InfiniteFiberError


@dataclass(frozen=True, order=True)
class Move:
    z: tuple[int, ...]

    def __post_init__(self):
        # the lowest cell goes in the negative part: y112*y221 - y111*y222
        nz = next((x for x in self.z if x), 0)
        if nz > 0:
            object.__setattr__(self, "z", tuple(-x for x in self.z))
        elif nz == 0:
            raise ValueError("the zero vector is not a move")

    @property
    def plus(self) -> tuple[int, ...]:
        return tuple(max(x, 0) for x in self.z)

    @property
    def minus(self) -> tuple[int, ...]:
        return tuple(max(-x, 0) for x in self.z)

    @property
    def degree(self) -> int:
        return sum(x for x in self.z if x > 0)

    def __len__(self) -> int:
        return len(self.z)


@dataclass
class MarkovBasis:
    moves: list[Move]
    matrix: np.ndarray
    indispensable: dict[Move, bool] | None = None
    labels: tuple[str, ...] | None = None
    minimal: bool = False

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.int64)
        self.moves = sorted(set(self.moves), key=_stable_key)
        if self.labels is None:
            self.labels = tuple(f"y{i + 1}" for i in range(self.matrix.shape[1]))

    def __len__(self) -> int:
        return len(self.moves)

    def __iter__(self):
        return iter(self.moves)

    def array(self) -> np.ndarray:
        k = self.matrix.shape[1]
        return np.array([m.z for m in self.moves], dtype=np.int64).reshape(-1, k)

    def move_set(self) -> frozenset[tuple[int, ...]]:
        return frozenset(m.z for m in self.moves)

    def to_text(self) -> str:
        return "".join(format_move(m, self.labels) + "\n" for m in self.moves)

    def to_json(self) -> dict:
        rows = []
        for m in self.moves:
            row = {"z": list(m.z), "degree": m.degree, "binomial": format_move(m, self.labels)}
            if self.indispensable is not None:
                row["indispensable"] = self.indispensable[m]
            rows.append(row)
        return {
            "cells": list(self.labels),
            "matrix": self.matrix.tolist(),
            "minimal": self.minimal,
            "census": {str(d): list(c) for d, c in degree_census(self).items()},
            "moves": rows,
        }

    @classmethod
    def from_json(cls, data: dict) -> "MarkovBasis":
        moves = [Move(tuple(r["z"])) for r in data["moves"]]
        flags = None
        if moves and all("indispensable" in r for r in data["moves"]):
            flags = {Move(tuple(r["z"])): bool(r["indispensable"]) for r in data["moves"]}
        return cls(moves, np.array(data["matrix"]), flags, tuple(data["cells"]), bool(data.get("minimal")))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def _stable_key(m: Move):
    return (m.degree, tuple(-x for x in m.z))


def _monomial(exps: Sequence[int], labels: Sequence[str]) -> str:
    parts = []
    for e, lab in zip(exps, labels):
        if e == 1:
            parts.append(lab)
        elif e > 1:
            parts.append(f"{lab}^{e}")
    return "*".join(parts)


def format_move(m: Move, labels: Sequence[str]) -> str:
    """``y112*y221 - y111*y222`` style binomial, positive part first."""
    return f"{_monomial(m.plus, labels)} - {_monomial(m.minus, labels)}"


def parse_move(text: str, labels: Sequence[str]) -> Move:
    index = {lab: i for i, lab in enumerate(labels)}
    z = [0] * len(labels)
    try:
        left, right = text.split(" - ")
    except ValueError:
        raise ValueError(f"bad binomial {text!r}") from None
    for sign, side in ((1, left), (-1, right)):
        for tok in side.strip().split("*"):
            name, _, exp = tok.partition("^")
            if name not in index:
                raise ValueError(f"unknown cell {name!r} in {text!r}")
            z[index[name]] += sign * int(exp or 1)
    return Move(tuple(z))


# -- computation -----------------------------------------------------------

SEED_COMBINATIONS = 200_000


def seed_degree(k: int, limit: int = SEED_COMBINATIONS, max_degree: int = 4) -> int:
    """Largest degree whose multisets of cells stay below ``limit``."""
    d = 1
    while d < max_degree and comb(k + d, d + 1) <= limit:
        d += 1
    return d


def compute_markov_basis(A, labels: Sequence[str] | None = None, seed_total: int | None = None,
                         sat_order: Sequence[int] | None = None) -> MarkovBasis:
    """A (generally non-minimal) Markov basis of ``A``.

    The binomials of a lattice basis, plus the moves needed by every
    fiber of small total, are completed and saturated one variable at a
    time; the resulting generators of the toric ideal form the basis.
    ``seed_total`` overrides the total up to which fibers are pre-scanned
    (0 disables the scan); ``sat_order`` is the order in which variables
    are saturated, last column first by default.
    """
    A = np.asarray(A, dtype=np.int64)
    if A.ndim != 2 or A.shape[1] == 0:
        raise ValueError("A must be a nonempty integer matrix")
    if not has_positive_row_combination(A):
        raise InfiniteFiberError("the all-ones vector is not in the row span of A; fibers may be infinite")
    k = A.shape[1]
    lattice = kernel_lattice_basis(A)
    if not lattice:
        return MarkovBasis([], A, labels=_labels(labels, k))
    d = seed_degree(k) if seed_total is None else seed_total
    start = list(lattice) + (low_degree_moves(A, d) if d >= 2 else [])
    gens = toric_generators(start, k, sat_order)
    moves = [Move(z) for z in gens]
    bad = [m for m in moves if (A @ np.array(m.z)).any()]
    assert not bad, "completion produced a vector outside the kernel"
    log.info("computed %d generators (seed degree %d)", len(moves), d)
    return MarkovBasis(moves, A, labels=_labels(labels, k))


def _labels(labels, k):
    return tuple(labels) if labels is not None else None


# -- minimization ----------------------------------------------------------

ORDERS = ("lex", "revlex", "shuffle")


def removal_order(moves: Sequence[Move], order: str = "lex", seed: int = 0) -> list[Move]:
    """Descending degree, ties broken by ``order``.

    ``lex`` visits ties in descending lexicographic order of ``z``,
    ``revlex`` in ascending order, ``shuffle`` in a seeded random order.
    """
    if order == "lex":
        return sorted(moves, key=lambda m: (-m.degree, tuple(-x for x in m.z)))
    if order == "revlex":
        return sorted(moves, key=lambda m: (-m.degree, m.z))
    if order == "shuffle":
        shuffled = list(moves)
        random.Random(seed).shuffle(shuffled)
        return sorted(shuffled, key=lambda m: -m.degree)
    raise ValueError(f"unknown removal order {order!r}; choose from {ORDERS}")


def reduce_to_minimal(b: MarkovBasis, order: str = "lex", seed: int = 0, cap: int | None = None) -> MarkovBasis:
    """Drop moves whose endpoints stay connected without them.

    Candidates are visited in descending degree; a move is dropped when
    ``z+`` and ``z-`` lie in one component of the fiber ``F(A z+)`` under
    the moves still kept.
    """
    A = b.matrix
    arr = {m: np.array(m.z, dtype=np.int64) for m in b.moves}
    keep = {m: True for m in b.moves}
    fibers: dict[bytes, fib.Fiber] = {}
    for m in removal_order(b.moves, order, seed):
        plus = np.array(m.plus, dtype=np.int64)
        minus = np.array(m.minus, dtype=np.int64)
        t = A @ plus
        f = fibers.get(t.tobytes())
        if f is None:
            f = fibers[t.tobytes()] = fib.enumerate_fiber(A, t, cap)
        # moves of higher degree than the fiber total never apply inside it
        others = [arr[o] for o in b.moves if keep[o] and o != m and o.degree <= m.degree]
        if fib.linked(f, np.array(others).reshape(-1, A.shape[1]), plus, minus):
            keep[m] = False
    moves = [m for m in b.moves if keep[m]]
    log.info("minimal basis: %d of %d moves kept", len(moves), len(b.moves))
    return MarkovBasis(moves, A, labels=b.labels, minimal=True)


def classify_indispensable(b: MarkovBasis, cap: int | None = None) -> MarkovBasis:
    """Flag each move of a minimal basis as indispensable or not.

    ``z`` is dispensable when ``F(A z+)`` stays connected under the other
    basis moves together with differences of fiber points other than
    ``+-z``.  Differences to ``z+`` and ``z-`` from every third point are
    enough: any third point links the two ends.
    """
    A = b.matrix
    flags: dict[Move, bool] = {}
    for m in b.moves:
        plus = np.array(m.plus, dtype=np.int64)
        minus = np.array(m.minus, dtype=np.int64)
        f = fib.enumerate_fiber(A, A @ plus, cap)
        extra = [p - e for p in f.points for e in (plus, minus)]
        extra = [v for v in extra if v.any() and not (np.array_equal(v, m.z) or np.array_equal(-v, m.z))]
        others = [np.array(o.z) for o in b.moves if o != m and o.degree <= m.degree] + extra
        moves = np.array(others, dtype=np.int64).reshape(-1, A.shape[1])
        flags[m] = not fib.linked(f, moves, plus, minus)
    return replace(b, indispensable=flags)


def degree_census(b: MarkovBasis) -> dict[int, tuple[int, int]]:
    """``degree -> (count, indispensable count)``; the second entry is 0 when unclassified."""
    counts = Counter(m.degree for m in b.moves)
    ind = Counter(m.degree for m in b.moves if b.indispensable and b.indispensable[m])
    return {d: (counts[d], ind[d]) for d in sorted(counts)}


def is_unique_minimal(b: MarkovBasis) -> bool:
    """A classified minimal basis is the unique minimal one iff all moves are indispensable."""
    if b.indispensable is None:
        raise ValueError("classify the basis first")
    return all(b.indispensable.values())


# -- certification ---------------------------------------------------------

@dataclass
class Certificate:
    n_max: int
    fibers_checked: int = 0
    disconnected: list[fib.Fiber] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disconnected


def certify(b: MarkovBasis, n_max: int = 6, progress: Callable[[int, int], None] | None = None) -> Certificate:
    """Check connectivity of every fiber with total count at most ``n_max``."""
    moves = b.array()
    cert = Certificate(n_max)
    for n in range(2, n_max + 1):
        checked, bad = fib.disconnected_fibers(b.matrix, moves, n)
        cert.fibers_checked += checked
        cert.disconnected += bad
        if progress:
            progress(n, cert.fibers_checked)
    return cert


def applicable(moves: Iterable[Move], y: Sequence[int]) -> list[tuple[Move, int]]:
    """``(move, sign)`` pairs keeping ``y`` nonnegative."""
    y = np.asarray(y)
    out = []
    for m in moves:
        z = np.array(m.z)
        for sign in (1, -1):
            if (y + sign * z >= 0).all():
                out.append((m, sign))
    return out

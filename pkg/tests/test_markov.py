import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ffmarkov.fiber import component_labels, fiber_of, fibers_by_total, is_connected, pairwise_disjoint
from ffmarkov.markov import (
    ORDERS,
    InfiniteFiberError,
    MarkovBasis,
    Move,
    certify,
    classify_indispensable,
    compute_markov_basis,
    degree_census,
    format_move,
    is_unique_minimal,
    parse_move,
    reduce_to_minimal,
    removal_order,
)

from catalogue import CASES, D331, D341, D352A, D352B, FAST_CASES, full_basis, labels, matrix, minimal_basis


def move(text, design):
    return parse_move(text, labels(design))


# -- moves -----------------------------------------------------------------

def test_move_canonical_sign():
    assert Move((1, -1, 0)).z == (-1, 1, 0)
    assert Move((0, -2, 2)) == Move((0, 2, -2))
    with pytest.raises(ValueError):
        Move((0, 0))


@given(st.lists(st.integers(-3, 3), min_size=2, max_size=6).filter(any))
def test_move_parts(z):
    m = Move(tuple(z))
    assert np.array_equal(np.subtract(m.plus, m.minus), m.z)
    assert m.degree == sum(m.plus)
    assert not (np.array(m.plus) & np.array(m.minus)).any()


def test_format_and_parse():
    m = move("y112*y221 - y111*y222", D352A)
    assert format_move(m, labels(D352A)) == "y112*y221 - y111*y222"
    twice = parse_move("y112*y121 - y111^2", labels(D341))
    assert format_move(twice, labels(D341)) == "y112*y121 - y111^2"
    with pytest.raises(ValueError):
        parse_move("y999 - y111", labels(D341))


# -- computation -----------------------------------------------------------

def test_ones_row():
    b = compute_markov_basis([[1, 1]])
    assert b.move_set() == {(-1, 1)}
    c = classify_indispensable(reduce_to_minimal(b))
    assert is_unique_minimal(c)


def test_infinite_fibers_rejected():
    with pytest.raises(InfiniteFiberError, match="fibers may be infinite"):
        compute_markov_basis([[1, -1, 0], [0, 1, -1]])


def test_trivial_kernel():
    b = compute_markov_basis(np.eye(3, dtype=int))
    assert len(b) == 0
    assert degree_census(b) == {}


PERMUTATIONS = ("y11*y22*y33", "y12*y23*y31", "y13*y21*y32")
PERM_MOVES = {move(f"{a} - {b}", D331).z for a, b in itertools.combinations(PERMUTATIONS, 2)}


def test_3_3_1_minimal_is_two_permutation_moves():
    b = reduce_to_minimal(full_basis(CASES[0]))
    assert len(b) == 2
    assert b.move_set() <= PERM_MOVES


def test_removal_order_changes_surviving_pair():
    A = matrix(D331, "main: all")
    b = MarkovBasis([Move(z) for z in PERM_MOVES], A, labels=labels(D331))
    kept = {reduce_to_minimal(b, order).move_set() for order in ORDERS}
    kept |= {reduce_to_minimal(b, "shuffle", seed=s).move_set() for s in range(10)}
    assert all(len(k) == 2 and k <= PERM_MOVES for k in kept)
    assert len(kept) > 1


def test_removal_order_rejects_unknown():
    with pytest.raises(ValueError):
        removal_order([], "random")


def test_minimal_basis_is_fixed_point():
    b = minimal_basis(CASES[0])
    again = reduce_to_minimal(b)
    assert again.move_set() == b.move_set()


@pytest.mark.parametrize("case", FAST_CASES, ids=lambda c: c.id)
def test_every_move_in_kernel(case):
    b = full_basis(case)
    assert not (b.matrix @ b.array().T).any()
    zs = b.move_set()
    assert not any(tuple(-x for x in z) in zs for z in zs)


@pytest.mark.parametrize("case", FAST_CASES, ids=lambda c: c.id)
def test_census_invariant_across_orders(case):
    b = full_basis(case)
    censuses = {tuple(degree_census(reduce_to_minimal(b, o, seed=3)).items()) for o in ORDERS}
    assert len(censuses) == 1


def test_3_5_2b_main_nothing_removable():
    case = next(c for c in CASES if c.design == D352B and not c.interactions)
    b = minimal_basis(case)
    assert degree_census(b) == {2: (108, 108)}


# -- indispensability ------------------------------------------------------

def test_indispensable_degree_two_example():
    case = next(c for c in CASES if c.design == D352A and not c.interactions)
    b = minimal_basis(case)
    m = move("y112*y221 - y111*y222", D352A)
    assert b.indispensable[m]


def test_3_4_1_degree_three_dispensable():
    b = minimal_basis(CASES[1])
    assert all(not flag for m, flag in b.indispensable.items() if m.degree == 3)


def test_classify_requires_classification_for_uniqueness():
    with pytest.raises(ValueError):
        is_unique_minimal(reduce_to_minimal(compute_markov_basis([[1, 1]])))


def lower_degree_moves(A, degree):
    """Differences of fiber points for every total below ``degree``."""
    out = []
    for d in range(2, degree):
        for f in fibers_by_total(A, d):
            out += [p - q for p, q in itertools.combinations(f.points, 2)]
    return np.array(out, dtype=np.int64).reshape(-1, A.shape[1])


def test_degree4_move_has_an_alternative():
    # a move joining two lower-degree classes of three points each can be
    # swapped for any of the eight other cross-class pairs
    A = matrix(D352A, "main: all")
    z = move("y112*y121*y231*y312 - y111*y131*y212*y322", D352A)
    assert not (A @ np.array(z.z)).any()
    f = fiber_of(A, z.plus)
    assert len(f) == 6
    comp = component_labels(f, lower_degree_moves(A, 4))
    index = {p: i for i, p in enumerate(map(tuple, f.as_lists()))}
    assert sorted(np.bincount(comp)[np.bincount(comp) > 0]) == [3, 3]
    assert comp[index[z.plus]] != comp[index[z.minus]]
    # the degree-2 move that puts y132 y211 in the same class as y131 y212
    assert not (A @ np.array(move("y132*y211 - y131*y212", D352A).z)).any()


def test_indispensable_iff_two_point_fiber():
    for case in FAST_CASES:
        b = minimal_basis(case)
        for m, flag in b.indispensable.items():
            assert flag == (len(fiber_of(b.matrix, m.plus)) == 2), (case.id, m)


def reference_dispensable(case, b):
    return [m for m in b.moves if case.census.get(m.degree, (0, None))[1] == 0]


@pytest.mark.slow
@pytest.mark.parametrize("case", [c for c in CASES if any(ind == 0 for _, ind in c.census.values())],
                         ids=lambda c: c.id)
def test_dispensable_moves_join_disjoint_supports(case):
    b = minimal_basis(case)
    for m in reference_dispensable(case, b):
        f = fiber_of(b.matrix, m.plus)
        lower = np.array([o.z for o in b.moves if o.degree < m.degree], dtype=np.int64).reshape(-1, len(m))
        comp = component_labels(f, lower)
        reps = np.array([f.points[np.flatnonzero(comp == c)[0]] for c in np.unique(comp)])
        assert len(reps) >= 3, (case.id, m)
        assert pairwise_disjoint(reps), (case.id, m)
        if len(f) == len(reps):
            assert pairwise_disjoint(f.points)


# -- certification and serialization ---------------------------------------

def test_certify_passes_and_fails():
    b = minimal_basis(CASES[0])
    cert = certify(b, 4)
    assert cert.ok and cert.fibers_checked > 0
    broken = MarkovBasis(b.moves[:1], b.matrix, labels=b.labels)
    cert = certify(broken, 4)
    assert not cert.ok
    assert all(not is_connected(f, broken.moves) for f in cert.disconnected)


def test_text_and_json_round_trip():
    b = minimal_basis(CASES[1])
    lines = b.to_text().splitlines()
    assert len(lines) == 78
    assert {parse_move(line, b.labels) for line in lines} == set(b.moves)
    data = json.loads(b.dumps())
    assert data["census"] == {"2": [54, 0], "3": [24, 0]}
    again = MarkovBasis.from_json(data)
    assert again.move_set() == b.move_set()
    assert again.indispensable == b.indispensable
    assert again.dumps() == b.dumps()


def test_stable_ordering():
    b = minimal_basis(CASES[1])
    degrees = [m.degree for m in b.moves]
    assert degrees == sorted(degrees)
    shuffled = MarkovBasis(list(reversed(b.moves)), b.matrix, b.indispensable, b.labels, True)
    assert shuffled.to_text() == b.to_text()

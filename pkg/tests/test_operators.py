import numpy as np
import pytest

from xges.graph import ChangeKind, EdgeChange, Pdag, complete_pdag, consistent_extension, to_mask
from xges.operators import (DeleteOp, InsertOp, InvalidOperatorError, ReverseOp, apply_operator,
                            check_insert, delete_valid, enumerate_deletes, enumerate_inserts,
                            enumerate_inserts_to, enumerate_reversals, insert_valid,
                            make_delete, make_insert, make_reverse, reverse_valid)
from xges.scoring import Scorer

from . import oracles

U = ChangeKind


def G(d, directed=(), undirected=()):
    return Pdag.from_edges(d, directed, undirected)


@pytest.fixture
def sc3():
    return Scorer(np.random.default_rng(0).normal(size=(60, 3)))


@pytest.fixture
def sc4():
    return Scorer(np.random.default_rng(1).normal(size=(60, 4)))


def successors(g, ops):
    out = set()
    for op in ops:
        h = g.copy()
        apply_operator(h, op)
        h.check_invariants()
        assert complete_pdag(h) == h
        out.add(oracles.pdag_sets(h))
    return out


# validity --------------------------------------------------------------------

def test_insert_valid_on_empty(sc3):
    g = Pdag(3)
    for x in range(3):
        for y in range(3):
            if x != y:
                assert insert_valid(g, make_insert(sc3, x, y, 0, 0))


def test_insert_between_collider_parents(sc3):
    g = G(3, [(0, 2), (1, 2)])
    assert insert_valid(g, make_insert(sc3, 0, 1, 0, 0))
    assert insert_valid(g, make_insert(sc3, 1, 0, 0, 0))


def test_insert_blocked_by_semidirected_path(sc3):
    # inserting 0 -> 2 would close the cycle 2 -> 1 -> 0 -> 2
    g = G(3, [(2, 1), (1, 0)])
    ok, path = check_insert(g, make_insert(sc3, 0, 2, 0, 0))
    assert not ok and path == [2, 1, 0]


def test_insert_e_must_match(sc3):
    g = Pdag(3)
    assert not insert_valid(g, make_insert(sc3, 0, 1, 0, 1 << 2))


def test_delete_valid_undirected(sc3):
    sc = Scorer(np.random.default_rng(0).normal(size=(20, 2)))
    assert delete_valid(G(2, undirected=[(0, 1)]), make_delete(sc, 0, 1, 0, 0))
    # E has to carry Pa(y)
    g = G(3, [(2, 1)], [(0, 1)])
    assert delete_valid(g, make_delete(sc3, 0, 1, 0, 0b100))
    assert not delete_valid(g, make_delete(sc3, 0, 1, 0, 0))


def test_reverse_valid(sc3):
    g = G(3, [(0, 1), (2, 1)])
    # turn 0 -> 1 into 1 -> 0: x=1, y=0, E = Pa(0) = {}, F = Pa(1) = {0, 2}
    op = make_reverse(sc3, 1, 0, 0, 0, 0b101)
    assert reverse_valid(g, op)
    assert not reverse_valid(g, make_reverse(sc3, 1, 0, 0, 0, 0b001))


# enumeration -----------------------------------------------------------------

def test_enumerate_inserts_empty(sc3):
    ops = enumerate_inserts_to(Pdag(3), 1, sc3)
    assert sorted((op.x, op.T, op.E) for op in ops) == [(0, 0, 0), (2, 0, 0)]


def test_enumerate_inserts_t_subsets(sc3):
    # 0 - 1 - 2, insert 0 -> 2: 1 is adjacent to 0, so Ne(2) \ Ad(0) is empty
    # and the only candidate is T = {}, with NA = {1} blocking the path 2 - 1 - 0
    g = G(3, undirected=[(0, 1), (1, 2)])
    ops = [op for op in enumerate_inserts_to(g, 2, sc3) if op.x == 0]
    assert [(op.T, op.E) for op in ops] == [(0, 0b010)]
    h = g.copy()
    apply_operator(h, ops[0])
    assert h == G(3, undirected=[(0, 1), (1, 2), (0, 2)])


def test_enumerate_inserts_t_subsets_bruteforce(sc4):
    # every T subset of Ne(y) \ Ad(x) checked directly against the enumeration
    from itertools import combinations
    from xges.graph import iter_bits
    idx = oracles.MecIndex(4)
    for members in idx.classes.values():
        g = G(4, *idx.cpdag(members[0]))
        for y in range(4):
            got = {(op.x, op.T) for op in enumerate_inserts_to(g, y, sc4)}
            want = set()
            for x in range(4):
                if x == y or g.adjacent(x, y):
                    continue
                cand = list(iter_bits(g.ne[y] & ~g.ad(x)))
                for k in range(len(cand) + 1):
                    for T in combinations(cand, k):
                        Tm = to_mask(T)
                        E = (g.ne[y] & g.ad(x)) | Tm | g.pa[y]
                        if insert_valid(g, make_insert(sc4, x, y, Tm, E)):
                            want.add((x, Tm))
            assert got == want


def test_forbidden_pairs_filtered(sc3):
    ops = enumerate_inserts(Pdag(3), sc3, forbidden={frozenset((0, 1))})
    assert all({op.x, op.y} != {0, 1} for op in ops)
    assert len(ops) == 4


def test_enumerate_empty_graph_deletes_reversals(sc3):
    assert enumerate_deletes(Pdag(3), sc3) == []
    assert enumerate_reversals(Pdag(3), sc3) == []


def test_enumerate_undirected_edge():
    sc = Scorer(np.random.default_rng(0).normal(size=(20, 2)))
    g = G(2, undirected=[(0, 1)])
    dels = enumerate_deletes(g, sc)
    assert [(op.x, op.y, op.C, op.E) for op in dels] == [(0, 1, 0, 0)]
    assert enumerate_reversals(g, sc) == []


def test_enumerate_reversal_of_directed_edge(sc3):
    g = G(3, [(0, 1), (2, 1)])
    revs = enumerate_reversals(g, sc3)
    assert any(op.x == 1 and op.y == 0 for op in revs)
    for op in revs:
        assert g.has_directed(op.y, op.x)


def test_enumerated_operators_are_valid_and_distinct(sc4):
    idx = oracles.MecIndex(4)
    for members in idx.classes.values():
        d, u = idx.cpdag(members[0])
        g = G(4, d, u)
        ops = enumerate_inserts(g, sc4) + enumerate_deletes(g, sc4) + enumerate_reversals(g, sc4)
        assert len({op.key for op in ops}) == len(ops)
        for op in ops:
            h = g.copy()
            apply_operator(h, op)


# application -----------------------------------------------------------------

def test_apply_insert_on_empty(sc3):
    g = Pdag(3)
    changes = apply_operator(g, make_insert(sc3, 0, 1, 0, 0))
    assert g == G(3, undirected=[(0, 1)])
    assert changes == [EdgeChange(0, 1, U.U2), EdgeChange(0, 1, U.U6)]


def test_apply_insert_creating_collider(sc3):
    g = G(3, undirected=[(0, 1)])
    op = make_insert(sc3, 2, 1, 0, 0)
    assert insert_valid(g, op)
    apply_operator(g, op)
    # T = {}: 0 stays a neighbor of 1, giving the chain class 2 -> 1 -> 0
    assert oracles.pdag_sets(g) == oracles.MecIndex(3).cpdag({(2, 1), (1, 0)})
    # T = {0}: 0 becomes a parent of 1 next to 2, the collider 0 -> 1 <- 2
    g = G(3, undirected=[(0, 1)])
    op = make_insert(sc3, 2, 1, 0b001, 0b001)
    apply_operator(g, op)
    assert oracles.pdag_sets(g) == oracles.MecIndex(3).cpdag({(0, 1), (2, 1)})


def test_apply_delete_undirected():
    sc = Scorer(np.random.default_rng(0).normal(size=(20, 2)))
    g = G(2, undirected=[(0, 1)])
    changes = apply_operator(g, make_delete(sc, 0, 1, 0, 0))
    assert g == Pdag(2)
    assert changes == [EdgeChange(0, 1, U.U3)]


def test_apply_invalid_raises(sc3):
    g = G(3, [(0, 1)])
    with pytest.raises(InvalidOperatorError):
        apply_operator(g, make_insert(sc3, 0, 1, 0, 0))


def test_change_list_replays(sc4):
    idx = oracles.MecIndex(4)
    for members in list(idx.classes.values())[::3]:
        d, u = idx.cpdag(members[0])
        g = G(4, d, u)
        for op in enumerate_inserts(g, sc4) + enumerate_deletes(g, sc4) + enumerate_reversals(g, sc4):
            h = g.copy()
            changes = apply_operator(h, op)
            replay = g.copy()
            for c in changes:
                replay.apply_change(c)
            assert replay == h
            for c in reversed(changes):
                replay.apply_change(c.inverse())
            assert replay == g


def test_successors_match_bruteforce_small(sc3):
    for d in (2, 3):
        idx = oracles.MecIndex(d)
        sc = Scorer(np.random.default_rng(d).normal(size=(30, d)))
        for members in idx.classes.values():
            cp = idx.cpdag(members[0])
            g = G(d, *cp)
            ins, dele, rev = oracles.successors(idx, members[0])
            assert successors(g, enumerate_inserts(g, sc)) == ins
            assert successors(g, enumerate_deletes(g, sc)) == dele
            assert successors(g, enumerate_reversals(g, sc)) == rev


def test_delta_equals_score_difference(sc4):
    rng = np.random.default_rng(11)
    X = rng.normal(size=(200, 4))
    X[:, 1] += X[:, 0]
    X[:, 3] += X[:, 1] - X[:, 2]
    sc = Scorer(X)
    idx = oracles.MecIndex(4)
    for members in list(idx.classes.values())[::5]:
        g = G(4, *idx.cpdag(members[0]))
        base = sc.total_dag_score(consistent_extension(g))
        for op in enumerate_inserts(g, sc) + enumerate_deletes(g, sc) + enumerate_reversals(g, sc):
            h = g.copy()
            apply_operator(h, op)
            after = sc.total_dag_score(consistent_extension(h))
            assert after - base == pytest.approx(op.delta, abs=1e-7 * (1 + abs(base)))


def test_operator_serialization(sc3):
    op = make_reverse(sc3, 1, 0, 0, 0, 0b101)
    dd = op.to_dict()
    assert dd["kind"] == "reverse" and dd["F"] == [0, 2] and dd["delta"] == op.delta
    assert InsertOp.kind == "insert" and DeleteOp.kind == "delete" and ReverseOp.kind == "reverse"
    assert make_insert(sc3, 0, 1, 0, 0).key < make_delete(sc3, 0, 1, 0, 0).key < op.key

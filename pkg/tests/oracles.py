"""Brute-force reference implementations used by the tests.

Everything here works on plain edge sets and numpy least squares so that it
shares no code with the package under test.
"""

import itertools
import math

import numpy as np


def dags(d):
    """All labeled DAGs on d nodes as frozensets of directed (i, j) edges."""
    pairs = list(itertools.combinations(range(d), 2))
    out = []
    for states in itertools.product(range(3), repeat=len(pairs)):
        edges = set()
        for (a, b), s in zip(pairs, states):
            if s == 1:
                edges.add((a, b))
            elif s == 2:
                edges.add((b, a))
        if acyclic(d, edges):
            out.append(frozenset(edges))
    return out


def acyclic(d, edges):
    # repeatedly strip sinks
    nodes = set(range(d))
    edges = set(edges)
    while nodes:
        sinks = [v for v in nodes if not any(a == v for a, _ in edges)]
        if not sinks:
            return False
        for v in sinks:
            nodes.discard(v)
            edges = {(a, b) for a, b in edges if b != v}
    return True


def skeleton(edges):
    return frozenset(frozenset(e) for e in edges)


def vstructs(edges, sk=None):
    """Unshielded colliders a -> c <- b (a < b); adjacency is read from ``sk``
    when given, otherwise from ``edges`` themselves."""
    sk = skeleton(edges) if sk is None else sk
    out = set()
    for a, c in edges:
        for b, c2 in edges:
            if c == c2 and a < b and frozenset((a, b)) not in sk:
                out.add((a, c, b))
    return frozenset(out)


def mec_signature(edges):
    return skeleton(edges), vstructs(edges)


class MecIndex:
    """Groups every DAG on d nodes by equivalence class."""

    def __init__(self, d):
        self.d = d
        self.dags = dags(d)
        self.classes = {}
        for g in self.dags:
            self.classes.setdefault(mec_signature(g), []).append(g)

    def members(self, edges):
        return self.classes[mec_signature(edges)]

    def cpdag(self, edges):
        """(directed, undirected) where an edge is directed iff all members agree."""
        members = self.members(edges)
        directed, undirected = set(), set()
        for pair in skeleton(edges):
            a, b = sorted(pair)
            fwd = {(a, b) in m for m in members}
            if fwd == {True}:
                directed.add((a, b))
            elif fwd == {False}:
                directed.add((b, a))
            else:
                undirected.add((a, b))
        return frozenset(directed), frozenset(undirected)


def successors(idx, cp_edges):
    """MEC-level neighbors of the class of ``cp_edges``: classes of every DAG
    obtained from one member by adding, removing or reversing one edge."""
    members = idx.members(cp_edges)
    me = idx.cpdag(cp_edges)
    ins, dele, rev = set(), set(), set()
    for m in members:
        for x in range(idx.d):
            for y in range(idx.d):
                if x == y:
                    continue
                if (x, y) not in m and (y, x) not in m:
                    h = m | {(x, y)}
                    if acyclic(idx.d, h):
                        ins.add(idx.cpdag(h))
                elif (x, y) in m:
                    dele.add(idx.cpdag(m - {(x, y)}))
                    if (x, y) in me[0]:
                        h = (m - {(x, y)}) | {(y, x)}
                        if acyclic(idx.d, h) and idx.cpdag(h) != me:
                            rev.add(idx.cpdag(h))
    return ins, dele, rev


def pdag_sets(g):
    """Package Pdag -> (directed, undirected) edge sets, undirected as (a<b)."""
    directed = frozenset(tuple(e) for e in g.directed_edges())
    undirected = frozenset(tuple(sorted(e)) for e in g.undirected_edges())
    return directed, undirected


def ols_local_score(X, j, parents, alpha=2.0):
    """BIC local score from a least-squares fit with intercept."""
    n = X.shape[0]
    y = X[:, j]
    A = np.column_stack([np.ones(n)] + [X[:, p] for p in parents])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    s2 = float(r @ r) / n
    return -0.5 * n * (1 + math.log(2 * math.pi) + math.log(s2)) - 0.5 * alpha * math.log(n) * len(parents)


def ols_dag_score(X, edges, alpha=2.0):
    d = X.shape[1]
    return sum(ols_local_score(X, j, sorted(a for a, b in edges if b == j), alpha) for j in range(d))


def class_members(directed, undirected, d):
    """All DAGs in the class of a CPDAG, by orienting its undirected edges
    every possible way."""
    directed = set(directed)
    undirected = sorted(undirected)
    sk = skeleton(directed | set(undirected))
    sig = (sk, vstructs(directed, sk))
    out = []
    for bits in itertools.product((0, 1), repeat=len(undirected)):
        edges = set(directed)
        for (a, b), flip in zip(undirected, bits):
            edges.add((b, a) if flip else (a, b))
        if acyclic(d, edges) and mec_signature(edges) == sig:
            out.append(frozenset(edges))
    return out


def d_separated(d, edges, x, y, given):
    """d-separation by reachability in the moralized ancestral graph."""
    given = set(given)
    keep = {x, y} | given
    frontier = list(keep)
    while frontier:
        v = frontier.pop()
        for a, b in edges:
            if b == v and a not in keep:
                keep.add(a)
                frontier.append(a)
    und = {v: set() for v in keep}
    for a, b in edges:
        if a in keep and b in keep:
            und[a].add(b)
            und[b].add(a)
    for v in keep:
        ps = [a for a, b in edges if b == v and a in keep]
        for p, q in itertools.combinations(ps, 2):
            und[p].add(q)
            und[q].add(p)
    seen = {x}
    frontier = [x]
    while frontier:
        v = frontier.pop()
        for w in und[v]:
            if w == y:
                return False
            if w not in seen and w not in given:
                seen.add(w)
                frontier.append(w)
    return True

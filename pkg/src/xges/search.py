"""Greedy searches over Markov equivalence classes.

XGES-0 keeps every candidate operator in one of three max-heaps and never
rescans the whole graph: after an operator is applied, the single-edge
changes it produced decide which (source, target) scopes can hold operators
that just became valid, and only those are re-enumerated. Operators that
went stale stay in the heaps and are discarded when popped.
"""

from __future__ import annotations

import heapq
import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional

from .graph import (ChangeKind, EdgeChange, Pdag, consistent_extension,
                    dag_to_cpdag, iter_bits)
from .operators import (DeleteOp, InsertOp, Operator, ReverseOp, apply_operator,
                        check, enumerate_deletes, enumerate_deletes_of,
                        enumerate_inserts_to, enumerate_reversals,
                        enumerate_reversals_of, forbidden_masks)
from .scoring import Scorer

log = logging.getLogger(__name__)

KINDS = ("insert", "delete", "reverse")
METHODS = ("ges", "ges-r", "ops", "xges0", "xges")


class CandidateSet:
    """Three lazy max-heaps plus the operators blocked by a saved path.

    ``blocked`` maps an unordered edge to the (kind, x, y) scopes whose
    operators were rejected only because of a semi-directed path through
    that edge.
    """

    def __init__(self):
        self.heaps: dict[str, list] = {k: [] for k in KINDS}
        self.keys: set = set()
        self.blocked: dict[tuple[int, int], set] = {}
        self.blocked_paths: dict[tuple, set] = {}

    def copy(self) -> "CandidateSet":
        new = CandidateSet.__new__(CandidateSet)
        new.heaps = {k: h[:] for k, h in self.heaps.items()}
        new.keys = set(self.keys)
        new.blocked = {e: set(s) for e, s in self.blocked.items()}
        new.blocked_paths = {p: set(s) for p, s in self.blocked_paths.items()}
        return new

    def push(self, op: Operator) -> None:
        key = op.key
        if key in self.keys:
            return
        self.keys.add(key)
        heapq.heappush(self.heaps[op.kind], (-op.delta, key, op))

    def extend(self, ops: Iterable[Operator]) -> None:
        for op in ops:
            self.push(op)

    def top(self, kind: str) -> Optional[Operator]:
        h = self.heaps[kind]
        return h[0][2] if h else None

    def pop(self, kind: str) -> Operator:
        _, key, op = heapq.heappop(self.heaps[kind])
        self.keys.discard(key)
        return op

    def clear(self) -> None:
        for h in self.heaps.values():
            h.clear()
        self.keys.clear()
        self.blocked.clear()
        self.blocked_paths.clear()

    def ops(self, kind: Optional[str] = None) -> list[Operator]:
        kinds = KINDS if kind is None else (kind,)
        return [entry[2] for k in kinds for entry in self.heaps[k]]

    def __len__(self) -> int:
        return len(self.keys)

    def block(self, kind: str, x: int, y: int, path: list) -> None:
        scope = (kind, x, y)
        edges = self.blocked_paths.setdefault(scope, set())
        for a, b in zip(path, path[1:]):
            e = (a, b) if a < b else (b, a)
            if e not in edges:
                edges.add(e)
                self.blocked.setdefault(e, set()).add(scope)

    def take_blocked(self, a: int, b: int) -> set:
        """Remove and return every scope whose saved path uses edge {a, b}."""
        e = (a, b) if a < b else (b, a)
        scopes = self.blocked.pop(e, None)
        if not scopes:
            return set()
        for scope in scopes:
            for other in self.blocked_paths.pop(scope, ()):
                if other != e:
                    s = self.blocked.get(other)
                    if s is not None:
                        s.discard(scope)
                        if not s:
                            del self.blocked[other]
        return scopes


@dataclass
class SearchStats:
    operators_applied: int = 0
    inserts: int = 0
    deletes: int = 0
    reversals: int = 0
    stale_popped: int = 0
    deltas: list = field(default_factory=list)


@dataclass
class SearchResult:
    cpdag: Pdag
    score: float
    score_calls: int
    runtime_ms: float
    stats: SearchStats

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "score_calls": self.score_calls,
            "runtime_ms": self.runtime_ms,
            "operators_applied": self.stats.operators_applied,
            "inserts": self.stats.inserts,
            "deletes": self.stats.deletes,
            "reversals": self.stats.reversals,
            "edges": self.cpdag.num_edges(),
        }


class SearchState:
    """A CPDAG, its running score and the candidate operators for it."""

    def __init__(self, scorer: Scorer, graph: Optional[Pdag] = None,
                 forbidden: Iterable = (), trace: Optional[IO[str]] = None,
                 debug: bool = False):
        self.scorer = scorer
        self.graph = graph.copy() if graph is not None else Pdag(scorer.d)
        self.forbidden: set[frozenset] = {frozenset(p) for p in forbidden}
        self._fmask = forbidden_masks(self.graph.d, self.forbidden)
        self.candidates = CandidateSet()
        self.stats = SearchStats()
        self.trace = trace
        self.debug = debug
        self.total_score = scorer.total_dag_score(consistent_extension(self.graph))

    def copy(self) -> "SearchState":
        new = SearchState.__new__(SearchState)
        new.scorer = self.scorer
        new.graph = self.graph.copy()
        new.forbidden = set(self.forbidden)
        new._fmask = self._fmask[:]
        new.candidates = self.candidates.copy()
        new.stats = SearchStats(**{k: (v[:] if isinstance(v, list) else v)
                                   for k, v in vars(self.stats).items()})
        new.trace = self.trace
        new.debug = self.debug
        new.total_score = self.total_score
        return new

    def forbid(self, x: int, y: int) -> None:
        self.forbidden.add(frozenset((x, y)))
        self._fmask[x] |= 1 << y
        self._fmask[y] |= 1 << x

    def allow_all(self) -> None:
        """Lift every forbidden pair and add the inserts that were held back."""
        pairs = list(self.forbidden)
        self.forbidden.clear()
        self._fmask = [0] * self.graph.d
        for pair in pairs:
            a, b = tuple(pair)
            self._enumerate_inserts(b, 1 << a)
            self._enumerate_inserts(a, 1 << b)

    def is_forbidden(self, x: int, y: int) -> bool:
        return bool(self._fmask[x] >> y & 1)

    # enumeration helpers ----------------------------------------------

    def _enumerate_inserts(self, y: int, xs: Optional[int] = None) -> None:
        self.candidates.extend(enumerate_inserts_to(
            self.graph, y, self.scorer, self._fmask[y], xs, self.candidates.block))

    def rebuild(self, kinds: Iterable[str] = KINDS) -> None:
        """Drop all candidates and enumerate the requested kinds from scratch."""
        self.candidates.clear()
        g, sc = self.graph, self.scorer
        for kind in kinds:
            if kind == "insert":
                for y in range(g.d):
                    self._enumerate_inserts(y)
            elif kind == "delete":
                self.candidates.extend(enumerate_deletes(g, sc))
            else:
                self.candidates.extend(enumerate_reversals(g, sc, self.candidates.block))

    def pop_best(self, kind: str, strict: bool) -> Optional[Operator]:
        """Pop the best valid operator of ``kind`` whose delta is positive
        (``strict``) or non-negative; stale operators are discarded."""
        cands = self.candidates
        g = self.graph
        while True:
            op = cands.top(kind)
            if op is None or op.delta < 0 or (strict and op.delta <= 0):
                return None
            cands.pop(kind)
            if kind == "insert" and self.is_forbidden(op.x, op.y):
                continue
            valid, path = check(g, op)
            if valid:
                return op
            self.stats.stale_popped += 1
            if path is not None:
                cands.block(kind, op.x, op.y, path)

    def apply(self, op: Operator, refresh: bool = True) -> list[EdgeChange]:
        changes = apply_operator(self.graph, op, validate=False)
        self.total_score += op.delta
        st = self.stats
        st.operators_applied += 1
        st.deltas.append(op.delta)
        if op.kind == "insert":
            st.inserts += 1
        elif op.kind == "delete":
            st.deletes += 1
        else:
            st.reversals += 1
        if self.trace is not None:
            rec = {"step": st.operators_applied, "kind": op.kind, "x": op.x, "y": op.y,
                   "delta": op.delta, "total_score": self.total_score}
            self.trace.write(json.dumps(rec) + "\n")
        if self.debug:
            self.graph.check_invariants()
            self.check_score()
        if refresh:
            refresh_candidates(self, changes)
        return changes

    def check_score(self, rtol: float = 1e-6) -> None:
        exact = self.scorer.total_dag_score(consistent_extension(self.graph))
        if abs(exact - self.total_score) > rtol * (1.0 + abs(exact)):
            raise AssertionError(f"running score {self.total_score} != {exact}")

    def result(self, t0: float, calls0: int) -> SearchResult:
        return SearchResult(self.graph.copy(), self.total_score,
                            self.scorer.call_counter - calls0,
                            (time.perf_counter() - t0) * 1000.0, self.stats)


# incremental refresh --------------------------------------------------------

class _Scopes:
    """(source, target) regions that must be re-enumerated, per operator kind.

    ``*_y`` hold targets whose every source is rescanned, ``*_x`` sources
    whose every target is rescanned, ``*_pairs`` single (x, y) pairs.
    """

    __slots__ = ("ins_y", "ins_pairs", "del_y", "del_x", "del_pairs",
                 "rev_y", "rev_x", "rev_pairs")

    def __init__(self):
        for s in self.__slots__:
            setattr(self, s, set())


def _collect_scopes(sc: _Scopes, pre: Pdag, post: Pdag, c: EdgeChange) -> None:
    """Necessary conditions for an operator to turn valid through change ``c``.

    ``pre`` and ``post`` are the graph right before and after the change.
    Paths through the changed edge are handled separately by the blocked
    store.
    """
    a, b, k = c
    ne, ad = pre.ne, pre.ad
    U = ChangeKind
    common_ne = ne[a] & ne[b]

    # inserts
    if k == U.U1 or k == U.U2:
        if k == U.U1:
            sc.ins_y.update((a, b))
        else:
            sc.ins_y.add(b)
        sc.ins_y.update(iter_bits(common_ne))
        sc.ins_pairs.update((a, y) for y in iter_bits(ne[b]))
        sc.ins_pairs.update((b, y) for y in iter_bits(ne[a]))
    elif k == U.U3 or k == U.U5:
        sc.ins_pairs.update((a, y) for y in iter_bits(ne[b] | 1 << b))
        sc.ins_pairs.update((b, y) for y in iter_bits(ne[a] | 1 << a))
        if k == U.U3:
            sc.ins_pairs.update((x, a) for x in iter_bits(ad(b)))
            sc.ins_pairs.update((x, b) for x in iter_bits(ad(a)))
        else:
            sc.ins_y.add(b)
    elif k == U.U4:
        sc.ins_pairs.update((x, a) for x in iter_bits(ad(b)))
        sc.ins_y.add(b)
    else:  # U6, U7
        sc.ins_y.update((a, b))

    # deletes
    if k == U.U1 or k == U.U2:
        if k == U.U1:
            sc.del_y.update((a, b))
        else:
            sc.del_y.add(b)
        sc.del_x.update((a, b))
        ys = post.ne[a] & post.ne[b]
        xs = post.ad(a) & post.ad(b)
        if ys and xs:
            sc.del_pairs.update(itertools.product(iter_bits(xs), iter_bits(ys)))
    elif k == U.U4 or k == U.U5:
        sc.del_y.add(b)
    elif k == U.U6 or k == U.U7:
        sc.del_y.update((a, b))

    # reversals
    if k == U.U1:
        sc.rev_y.update((a, b))
        sc.rev_y.update(iter_bits(common_ne))
        sc.rev_x.update((a, b))
    elif k == U.U2:
        sc.rev_y.add(b)
        sc.rev_y.update(iter_bits(common_ne))
        sc.rev_pairs.update((a, y) for y in iter_bits(ne[b]))
        sc.rev_x.add(b)
    elif k == U.U3:
        sc.rev_pairs.update((a, y) for y in iter_bits(ne[b] | 1 << b))
        sc.rev_pairs.update((b, y) for y in iter_bits(ne[a] | 1 << a))
        sc.rev_pairs.update((x, a) for x in iter_bits(ad(b)))
        sc.rev_pairs.update((x, b) for x in iter_bits(ad(a)))
    elif k == U.U4:
        sc.rev_pairs.update((x, a) for x in iter_bits(ad(b)))
        sc.rev_y.add(b)
        sc.rev_x.add(b)
    elif k == U.U5:
        sc.rev_y.add(b)
        sc.rev_pairs.update((a, y) for y in iter_bits(ne[b] | 1 << b))
        sc.rev_x.add(b)
    else:  # U6, U7
        sc.rev_y.update((a, b))
        sc.rev_x.update((a, b))


def refresh_candidates(state: SearchState, changes: list[EdgeChange]) -> None:
    """Add every operator that may have become valid through ``changes``.

    ``changes`` must be the exact sequence produced by ``apply_operator`` on
    ``state.graph``; they are undone one by one on a scratch copy so that each
    change is examined against the graph it was applied to.
    """
    if not changes:
        return
    g = state.graph
    cands = state.candidates
    scopes = _Scopes()
    work = g.copy()
    for c in reversed(changes):
        post = work.copy()
        work.apply_change(c.inverse())
        _collect_scopes(scopes, work, post, c)
        for kind, x, y in cands.take_blocked(c.a, c.b):
            if kind == "insert":
                scopes.ins_pairs.add((x, y))
            else:
                scopes.rev_pairs.add((x, y))

    sc = state.scorer
    # inserts, grouped by target
    by_target: dict[int, int] = {}
    for x, y in scopes.ins_pairs:
        if y not in scopes.ins_y and x != y:
            by_target[y] = by_target.get(y, 0) | 1 << x
    for y in scopes.ins_y:
        state._enumerate_inserts(y)
    for y, xs in by_target.items():
        state._enumerate_inserts(y, xs)

    # deletes: every edge touching a scope, undirected ones from the low end
    del_pairs = set()
    for y in scopes.del_y:
        for x in iter_bits(g.pa[y] | g.ne[y]):
            del_pairs.add((x, y))
    for x in scopes.del_x:
        for y in iter_bits(g.ch[x] | g.ne[x]):
            del_pairs.add((x, y))
    for x, y in scopes.del_pairs:
        if x != y and (g.ch[x] | g.ne[x]) >> y & 1:
            del_pairs.add((x, y))
    for x, y in del_pairs:
        if g.ne[x] >> y & 1 and x > y:
            x, y = y, x
        cands.extend(enumerate_deletes_of(g, x, y, sc))

    # reversals of y -> x
    rev_pairs = set()
    for y in scopes.rev_y:
        for x in iter_bits(g.ch[y]):
            rev_pairs.add((x, y))
    for x in scopes.rev_x:
        for y in iter_bits(g.pa[x]):
            rev_pairs.add((x, y))
    for x, y in scopes.rev_pairs:
        if x != y and g.pa[x] >> y & 1:
            rev_pairs.add((x, y))
    for x, y in rev_pairs:
        cands.extend(enumerate_reversals_of(g, x, y, sc, cands.block))


def missing_candidates(state: SearchState) -> list[Operator]:
    """Valid operators for the current graph absent from the candidate heaps."""
    g, sc = state.graph, state.scorer
    valid = []
    for y in range(g.d):
        valid += enumerate_inserts_to(g, y, sc, state._fmask[y])
    valid += enumerate_deletes(g, sc)
    valid += enumerate_reversals(g, sc)
    keys = state.candidates.keys
    return [op for op in valid if op.key not in keys]


# searches --------------------------------------------------------------------

def _run_xges0(state: SearchState) -> None:
    while True:
        op = state.pop_best("delete", strict=False)
        if op is None:
            op = state.pop_best("reverse", strict=True)
        if op is None:
            op = state.pop_best("insert", strict=True)
        if op is None:
            return
        state.apply(op)


def new_state(scorer: Scorer, init: Optional[Pdag] = None, forbidden: Iterable = (),
              trace: Optional[IO[str]] = None, debug: bool = False) -> SearchState:
    state = SearchState(scorer, init, forbidden, trace, debug)
    state.rebuild()
    return state


def xges0(scorer: Scorer, init: Optional[Pdag] = None, forbidden: Iterable = (),
          trace: Optional[IO[str]] = None, debug: bool = False) -> SearchResult:
    """Interleaved greedy search: best delete with delta >= 0 first, then the
    best improving reversal, then the best improving insert."""
    t0, calls0 = time.perf_counter(), scorer.call_counter
    state = new_state(scorer, init, forbidden, trace, debug)
    _run_xges0(state)
    return state.result(t0, calls0)


def xges(scorer: Scorer, trace: Optional[IO[str]] = None, debug: bool = False,
         tol: float = 1e-9) -> SearchResult:
    """XGES-0 followed by forced deletions.

    Each valid delete of the current class is tried in decreasing delta
    order on a copy; the copy resumes XGES-0 with the deleted pair banned
    from re-insertion and replaces the current class only if it ends with a
    higher score (by more than ``tol``, guarding against float noise).
    """
    t0, calls0 = time.perf_counter(), scorer.call_counter
    state = new_state(scorer, trace=trace, debug=debug)
    _run_xges0(state)
    while True:
        deletes = sorted(enumerate_deletes(state.graph, scorer), key=lambda op: (-op.delta, op.key))
        accepted = None
        for op in deletes:
            trial = state.copy()
            trial.trace = None
            trial.forbid(op.x, op.y)
            trial.apply(op)
            _run_xges0(trial)
            if trial.total_score > state.total_score + tol:
                accepted = trial
                break
        if accepted is None:
            break
        log.debug("xges: accepted forced deletion, score %.6f -> %.6f",
                  state.total_score, accepted.total_score)
        accepted.trace = trace
        accepted.allow_all()
        state = accepted
    return state.result(t0, calls0)


def ges(scorer: Scorer, reversal_phase: bool = False, simultaneous_ops: bool = False,
        naive: bool = False, trace: Optional[IO[str]] = None,
        debug: bool = False) -> SearchResult:
    """Phased greedy search: inserts, then deletes, then optional reversals.

    ``simultaneous_ops`` lets inserts and deletes compete on raw delta in a
    single phase. ``naive`` re-enumerates the operators of the current phase
    from scratch after every step instead of refreshing incrementally.
    """
    t0, calls0 = time.perf_counter(), scorer.call_counter
    state = SearchState(scorer, trace=trace, debug=debug)

    if simultaneous_ops:
        phases = [("insert", "delete")]
    else:
        phases = [("insert",), ("delete",)]
    if reversal_phase:
        phases.append(("reverse",))

    if not naive:
        state.rebuild()
    for kinds in phases:
        while True:
            if naive:
                state.rebuild(kinds)
            best = None
            for kind in kinds:
                op = state.pop_best(kind, strict=True)
                if op is None:
                    continue
                if best is None or (-op.delta, op.key) < (-best.delta, best.key):
                    if best is not None:
                        state.candidates.push(best)
                    best = op
                else:
                    state.candidates.push(op)
            if best is None:
                break
            state.apply(best, refresh=not naive)
    return state.result(t0, calls0)


def run_method(method: str, scorer: Scorer, trace: Optional[IO[str]] = None,
               naive: bool = False) -> SearchResult:
    if method == "ges":
        return ges(scorer, naive=naive, trace=trace)
    if method == "ges-r":
        return ges(scorer, reversal_phase=True, naive=naive, trace=trace)
    if method == "ops":
        return ges(scorer, simultaneous_ops=True, naive=naive, trace=trace)
    if method == "xges0":
        return xges0(scorer, trace=trace)
    if method == "xges":
        return xges(scorer, trace=trace)
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


# exhaustive oracle -----------------------------------------------------------

MAX_ORACLE_NODES = 5


def all_dags(d: int):
    """Every labeled DAG on ``d`` nodes (3^(d choose 2) candidates filtered)."""
    pairs = list(itertools.combinations(range(d), 2))
    for states in itertools.product(range(3), repeat=len(pairs)):
        g = Pdag(d)
        for (a, b), s in zip(pairs, states):
            if s == 1:
                g.add_directed(a, b)
            elif s == 2:
                g.add_directed(b, a)
        if not g.has_directed_cycle():
            yield g


def exhaustive_oracle(scorer: Scorer, d: Optional[int] = None) -> tuple[Pdag, float]:
    """Best-scoring equivalence class over all DAGs; first argmax wins ties."""
    d = scorer.d if d is None else d
    if d > MAX_ORACLE_NODES:
        raise ValueError(f"exhaustive oracle supports d <= {MAX_ORACLE_NODES}, got {d}")
    best, best_score = None, -float("inf")
    for g in all_dags(d):
        s = sum(scorer.local_score(j, g.pa[j]) for j in range(d))
        if s > best_score:
            best, best_score = g, s
    return dag_to_cpdag(best), best_score

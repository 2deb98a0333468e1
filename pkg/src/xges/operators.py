"""Insert, Delete and Reverse operators on CPDAGs.

Each operator carries the extra parameter ``E`` (and ``F`` for reversals)
fixing the parent sets its score is computed from, so the stored ``delta``
never goes stale: when the graph moves, an operator can only become invalid,
never mis-scored.

All node sets (``T``, ``C``, ``E``, ``F``) are bitmasks.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Optional, Union

from .graph import (ChangeKind, EdgeChange, GraphError, Pdag, complete_pdag,
                    from_mask, iter_bits)
from .scoring import Scorer

BlockedCallback = Callable[[str, int, int, list], None]


class InvalidOperatorError(GraphError):
    pass


class InsertOp(NamedTuple):
    x: int
    y: int
    T: int
    E: int
    delta: float

    kind = "insert"

    @property
    def key(self) -> tuple:
        return (0, self.x, self.y, self.T, self.E)

    def to_dict(self) -> dict:
        return {"kind": "insert", "x": self.x, "y": self.y, "T": from_mask(self.T),
                "E": from_mask(self.E), "delta": self.delta}


class DeleteOp(NamedTuple):
    x: int
    y: int
    C: int
    E: int
    delta: float

    kind = "delete"

    @property
    def key(self) -> tuple:
        return (1, self.x, self.y, self.C, self.E)

    def to_dict(self) -> dict:
        return {"kind": "delete", "x": self.x, "y": self.y, "C": from_mask(self.C),
                "E": from_mask(self.E), "delta": self.delta}


class ReverseOp(NamedTuple):
    """Turns the edge ``y -> x`` into ``x -> y``."""

    x: int
    y: int
    T: int
    E: int
    F: int
    delta: float

    kind = "reverse"

    @property
    def key(self) -> tuple:
        return (2, self.x, self.y, self.T, self.E, self.F)

    def to_dict(self) -> dict:
        return {"kind": "reverse", "x": self.x, "y": self.y, "T": from_mask(self.T),
                "E": from_mask(self.E), "F": from_mask(self.F), "delta": self.delta}


Operator = Union[InsertOp, DeleteOp, ReverseOp]


def make_insert(sc: Scorer, x: int, y: int, T: int, E: int) -> InsertOp:
    return InsertOp(x, y, T, E, sc.insert_delta(x, y, E))


def make_delete(sc: Scorer, x: int, y: int, C: int, E: int) -> DeleteOp:
    return DeleteOp(x, y, C, E, sc.delete_delta(x, y, E))


def make_reverse(sc: Scorer, x: int, y: int, T: int, E: int, F: int) -> ReverseOp:
    return ReverseOp(x, y, T, E, F, sc.reverse_delta(x, y, E, F))


# validity ------------------------------------------------------------------
#
# The check_* functions return (valid, path). ``path`` is set only when every
# condition holds except the semi-directed path one; it is the unblocked path
# that witnesses the failure.

def check_insert(g: Pdag, op: InsertOp) -> tuple[bool, Optional[list]]:
    x, y, T, E = op.x, op.y, op.T, op.E
    if x == y or g.adjacent(x, y):
        return False, None
    ne_y = g.ne[y]
    ad_x = g.ad(x)
    if T & ~(ne_y & ~ad_x):
        return False, None
    block = (ne_y & ad_x) | T
    if not g.is_clique_mask(block):
        return False, None
    if E != block | g.pa[y]:
        return False, None
    path = g.semidirected_path(y, x, block)
    return path is None, path


def check_delete(g: Pdag, op: DeleteOp) -> tuple[bool, None]:
    x, y, C, E = op.x, op.y, op.C, op.E
    if not ((g.ch[x] | g.ne[x]) >> y & 1):
        return False, None
    if C & ~(g.ne[y] & g.ad(x)):
        return False, None
    if not g.is_clique_mask(C):
        return False, None
    return E == C | g.pa[y], None


def check_reverse(g: Pdag, op: ReverseOp) -> tuple[bool, Optional[list]]:
    x, y, T, E, F = op.x, op.y, op.T, op.E, op.F
    if not g.pa[x] >> y & 1:
        return False, None
    ne_y = g.ne[y]
    ad_x = g.ad(x)
    if T & ~(ne_y & ~ad_x):
        return False, None
    na_t = (ne_y & ad_x) | T
    if not g.is_clique_mask(na_t):
        return False, None
    if E != na_t | g.pa[y] or F != g.pa[x]:
        return False, None
    path = g.semidirected_path(y, x, na_t | g.ne[x], ignored_edge=(y, x))
    return path is None, path


def check(g: Pdag, op: Operator) -> tuple[bool, Optional[list]]:
    if isinstance(op, InsertOp):
        return check_insert(g, op)
    if isinstance(op, DeleteOp):
        return check_delete(g, op)
    return check_reverse(g, op)


def insert_valid(g: Pdag, op: InsertOp) -> bool:
    return check_insert(g, op)[0]


def delete_valid(g: Pdag, op: DeleteOp) -> bool:
    return check_delete(g, op)[0]


def reverse_valid(g: Pdag, op: ReverseOp) -> bool:
    return check_reverse(g, op)[0]


def is_valid(g: Pdag, op: Operator) -> bool:
    return check(g, op)[0]


# enumeration ---------------------------------------------------------------

def _clique_extensions(g: Pdag, base: int, cands: int):
    """Yield every subset S of ``cands`` with ``base | S`` a clique.

    Depth-first in lexicographic order; a non-clique prefix prunes its
    whole subtree since no superset of it can be a clique.
    """
    stack = [(0, cands)]
    while stack:
        S, rest = stack.pop()
        yield S
        cur = base | S
        for t in reversed(list(iter_bits(rest))):
            if cur & ~g.ad(t):
                continue
            stack.append((S | 1 << t, rest >> (t + 1) << (t + 1)))


def enumerate_inserts_to(g: Pdag, y: int, sc: Scorer, forbidden_mask: int = 0,
                         xs: Optional[int] = None,
                         on_blocked: Optional[BlockedCallback] = None) -> list[InsertOp]:
    """All valid inserts with target ``y``.

    ``forbidden_mask`` excludes sources whose pair with ``y`` may not be
    re-inserted; ``xs`` restricts the sources considered. ``on_blocked`` is
    called with ("insert", x, y, path) for every operator rejected only by a
    semi-directed path.
    """
    d = g.d
    ne_y = g.ne[y]
    pa_y = g.pa[y]
    cand = ((1 << d) - 1) & ~(g.ad(y) | 1 << y | forbidden_mask)
    if xs is not None:
        cand &= xs
    out = []
    ad = [g.pa[v] | g.ch[v] | g.ne[v] for v in range(d)] if cand else None
    for x in iter_bits(cand):
        ad_x = ad[x]
        na = ne_y & ad_x
        if not g.is_clique_mask(na):
            continue
        t_cands = ne_y & ~ad_x
        # (T, extension candidates, path condition already known to hold)
        stack = [(0, t_cands, False)]
        while stack:
            T, rest, ok = stack.pop()
            block = na | T
            if not ok:
                path = g.semidirected_path(y, x, block)
                if path is None:
                    ok = True
                elif on_blocked is not None:
                    on_blocked("insert", x, y, path)
            if ok:
                out.append(make_insert(sc, x, y, T, block | pa_y))
            for t in reversed(list(iter_bits(rest))):
                if block & ~ad[t]:
                    continue
                stack.append((T | 1 << t, rest >> (t + 1) << (t + 1), ok))
    return out


def enumerate_inserts(g: Pdag, sc: Scorer, forbidden: frozenset = frozenset(),
                      on_blocked: Optional[BlockedCallback] = None) -> list[InsertOp]:
    fmask = forbidden_masks(g.d, forbidden)
    out = []
    for y in range(g.d):
        out += enumerate_inserts_to(g, y, sc, fmask[y], on_blocked=on_blocked)
    return out


def forbidden_masks(d: int, forbidden) -> list[int]:
    masks = [0] * d
    for pair in forbidden:
        a, b = tuple(pair)
        masks[a] |= 1 << b
        masks[b] |= 1 << a
    return masks


def enumerate_deletes_of(g: Pdag, x: int, y: int, sc: Scorer) -> list[DeleteOp]:
    """Valid deletes of the edge ``x -> y`` or ``x - y``.

    Undirected edges are only enumerated from their lower endpoint.
    """
    if g.ch[x] >> y & 1:
        pass
    elif g.ne[x] >> y & 1:
        if x > y:
            return []
    else:
        return []
    na = g.ne[y] & g.ad(x)
    pa_y = g.pa[y]
    return [make_delete(sc, x, y, C, C | pa_y) for C in _clique_extensions(g, 0, na)]


def enumerate_deletes(g: Pdag, sc: Scorer) -> list[DeleteOp]:
    out = []
    for x in range(g.d):
        for y in iter_bits(g.ch[x] | g.ne[x]):
            out += enumerate_deletes_of(g, x, y, sc)
    return out


def enumerate_reversals_of(g: Pdag, x: int, y: int, sc: Scorer,
                           on_blocked: Optional[BlockedCallback] = None) -> list[ReverseOp]:
    """Valid reversals turning ``y -> x`` into ``x -> y``."""
    if not g.pa[x] >> y & 1:
        return []
    ne_y = g.ne[y]
    ad_x = g.ad(x)
    na = ne_y & ad_x
    if not g.is_clique_mask(na):
        return []
    pa_y = g.pa[y]
    F = g.pa[x]
    ne_x = g.ne[x]
    out = []
    stack = [(0, ne_y & ~ad_x, False)]
    while stack:
        T, rest, ok = stack.pop()
        na_t = na | T
        if not ok:
            path = g.semidirected_path(y, x, na_t | ne_x, ignored_edge=(y, x))
            if path is None:
                ok = True
            elif on_blocked is not None:
                on_blocked("reverse", x, y, path)
        if ok:
            out.append(make_reverse(sc, x, y, T, na_t | pa_y, F))
        for t in reversed(list(iter_bits(rest))):
            if na_t & ~g.ad(t):
                continue
            stack.append((T | 1 << t, rest >> (t + 1) << (t + 1), ok))
    return out


def enumerate_reversals(g: Pdag, sc: Scorer,
                        on_blocked: Optional[BlockedCallback] = None) -> list[ReverseOp]:
    out = []
    for x in range(g.d):
        for y in iter_bits(g.pa[x]):
            out += enumerate_reversals_of(g, x, y, sc, on_blocked)
    return out


# application ---------------------------------------------------------------

def apply_operator(g: Pdag, op: Operator, validate: bool = True) -> list[EdgeChange]:
    """Apply ``op`` to CPDAG ``g`` in place and complete the result.

    Returns the single-edge changes, in order: first the operator's own
    actions, then the orientation changes made by completion.
    """
    if validate and not check(g, op)[0]:
        raise InvalidOperatorError(f"operator {op} is not valid for this graph")
    changes: list[EdgeChange] = []

    def do(a, b, kind):
        c = EdgeChange(a, b, kind)
        g.apply_change(c)
        changes.append(c)

    x, y = op.x, op.y
    if isinstance(op, InsertOp):
        do(x, y, ChangeKind.U2)
        for t in iter_bits(op.T):
            do(t, y, ChangeKind.U4)
    elif isinstance(op, DeleteOp):
        H = g.ne[y] & g.ad(x) & ~op.C
        if g.ch[x] >> y & 1:
            do(x, y, ChangeKind.U5)
        else:
            do(x, y, ChangeKind.U3)
        # nodes of H become colliders x -> h <- y
        for h in iter_bits(H):
            do(y, h, ChangeKind.U4)
            if g.ne[x] >> h & 1:
                do(x, h, ChangeKind.U4)
    else:
        do(y, x, ChangeKind.U7)
        for t in iter_bits(op.T):
            do(t, y, ChangeKind.U4)

    done = complete_pdag(g)
    for a, b in g.directed_edges():
        if done.ne[a] >> b & 1:
            do(a, b, ChangeKind.U6)
        elif not done.ch[a] >> b & 1:
            raise GraphError(f"completion reversed {a}->{b}")
    for a, b in g.undirected_edges():
        if done.ch[a] >> b & 1:
            do(a, b, ChangeKind.U4)
        elif done.ch[b] >> a & 1:
            do(b, a, ChangeKind.U4)
    return changes

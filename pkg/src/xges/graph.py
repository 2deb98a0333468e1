"""Partially directed graphs over integer nodes.

Node sets are stored as Python ``int`` bitmasks (bit ``i`` set means node ``i``
is in the set). Every per-node adjacency query is then a couple of integer
operations, which keeps the operator search fast in pure Python.
"""

from __future__ import annotations

import heapq
import json
from enum import IntEnum
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence


class GraphError(ValueError):
    pass


class InvalidChangeError(GraphError):
    """An edge change whose before-state does not hold in the graph."""


class CycleError(GraphError):
    pass


class NoExtensionError(GraphError):
    """The PDAG admits no consistent DAG extension."""


def iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def to_mask(nodes: Iterable[int]) -> int:
    mask = 0
    for v in nodes:
        mask |= 1 << v
    return mask


def from_mask(mask: int) -> list[int]:
    return list(iter_bits(mask))


class ChangeKind(IntEnum):
    U1 = 1  # a  b  -> a - b
    U2 = 2  # a  b  -> a -> b
    U3 = 3  # a - b -> a  b
    U4 = 4  # a - b -> a -> b
    U5 = 5  # a -> b -> a  b
    U6 = 6  # a -> b -> a - b
    U7 = 7  # a -> b -> a <- b


class EdgeChange(NamedTuple):
    a: int
    b: int
    kind: ChangeKind

    def inverse(self) -> "EdgeChange":
        a, b, k = self
        if k == ChangeKind.U7:
            return EdgeChange(b, a, ChangeKind.U7)
        return EdgeChange(a, b, _INVERSE[k])


_INVERSE = {
    ChangeKind.U1: ChangeKind.U3,
    ChangeKind.U3: ChangeKind.U1,
    ChangeKind.U2: ChangeKind.U5,
    ChangeKind.U5: ChangeKind.U2,
    ChangeKind.U4: ChangeKind.U6,
    ChangeKind.U6: ChangeKind.U4,
}

# edge status codes returned by Pdag.status(a, b)
NONE, UNDIRECTED, FORWARD, BACKWARD = 0, 1, 2, 3


class Pdag:
    """Mixed graph with parent, child and neighbor bitmasks per node."""

    __slots__ = ("d", "pa", "ch", "ne")

    def __init__(self, d: int):
        if d < 0:
            raise GraphError("negative node count")
        self.d = d
        self.pa = [0] * d
        self.ch = [0] * d
        self.ne = [0] * d

    @classmethod
    def from_edges(cls, d: int, directed: Iterable[Sequence[int]] = (),
                   undirected: Iterable[Sequence[int]] = ()) -> "Pdag":
        g = cls(d)
        for a, b in directed:
            g._check_pair(a, b)
            if g.adjacent(a, b):
                raise GraphError(f"duplicate edge between {a} and {b}")
            g.add_directed(a, b)
        for a, b in undirected:
            g._check_pair(a, b)
            if g.adjacent(a, b):
                raise GraphError(f"duplicate edge between {a} and {b}")
            g.add_undirected(a, b)
        if g.has_directed_cycle():
            raise CycleError("directed edges form a cycle")
        return g

    def _check_pair(self, a: int, b: int) -> None:
        if not (0 <= a < self.d and 0 <= b < self.d):
            raise GraphError(f"node out of range in edge ({a}, {b})")
        if a == b:
            raise GraphError(f"self-loop on node {a}")

    def copy(self) -> "Pdag":
        g = Pdag.__new__(Pdag)
        g.d = self.d
        g.pa = self.pa[:]
        g.ch = self.ch[:]
        g.ne = self.ne[:]
        return g

    # queries ---------------------------------------------------------------

    def ad(self, x: int) -> int:
        return self.pa[x] | self.ch[x] | self.ne[x]

    def parents(self, x: int) -> list[int]:
        return from_mask(self.pa[x])

    def children(self, x: int) -> list[int]:
        return from_mask(self.ch[x])

    def neighbors(self, x: int) -> list[int]:
        return from_mask(self.ne[x])

    def adjacents(self, x: int) -> list[int]:
        return from_mask(self.ad(x))

    def adjacent(self, a: int, b: int) -> bool:
        return bool((self.pa[a] | self.ch[a] | self.ne[a]) >> b & 1)

    def has_directed(self, a: int, b: int) -> bool:
        return bool(self.ch[a] >> b & 1)

    def has_undirected(self, a: int, b: int) -> bool:
        return bool(self.ne[a] >> b & 1)

    def status(self, a: int, b: int) -> int:
        if self.ne[a] >> b & 1:
            return UNDIRECTED
        if self.ch[a] >> b & 1:
            return FORWARD
        if self.pa[a] >> b & 1:
            return BACKWARD
        return NONE

    def directed_edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a in range(self.d) for b in iter_bits(self.ch[a])]

    def undirected_edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a in range(self.d) for b in iter_bits(self.ne[a] >> (a + 1) << (a + 1))]

    def num_edges(self) -> int:
        return sum(m.bit_count() for m in self.ch) + sum(m.bit_count() for m in self.ne) // 2

    def is_dag(self) -> bool:
        return not any(self.ne) and not self.has_directed_cycle()

    def key(self) -> tuple:
        """Hashable canonical form; equal keys mean identical graphs."""
        return (self.d, tuple(self.ch), tuple(self.ne))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pdag):
            return NotImplemented
        return self.d == other.d and self.ch == other.ch and self.ne == other.ne

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        parts = [f"{a}->{b}" for a, b in self.directed_edges()]
        parts += [f"{a}--{b}" for a, b in self.undirected_edges()]
        return f"Pdag(d={self.d}, [{', '.join(parts)}])"

    # raw mutation ---------------------------------------------------------

    def add_directed(self, a: int, b: int) -> None:
        self.ch[a] |= 1 << b
        self.pa[b] |= 1 << a

    def remove_directed(self, a: int, b: int) -> None:
        self.ch[a] &= ~(1 << b)
        self.pa[b] &= ~(1 << a)

    def add_undirected(self, a: int, b: int) -> None:
        self.ne[a] |= 1 << b
        self.ne[b] |= 1 << a

    def remove_undirected(self, a: int, b: int) -> None:
        self.ne[a] &= ~(1 << b)
        self.ne[b] &= ~(1 << a)

    def apply_change(self, c: EdgeChange) -> None:
        a, b, kind = c
        st = self.status(a, b)
        if kind == ChangeKind.U1 or kind == ChangeKind.U2:
            if st != NONE:
                raise InvalidChangeError(f"{kind.name}({a},{b}) needs {a} and {b} non-adjacent")
            if kind == ChangeKind.U1:
                self.add_undirected(a, b)
            else:
                self.add_directed(a, b)
        elif kind == ChangeKind.U3 or kind == ChangeKind.U4:
            if st != UNDIRECTED:
                raise InvalidChangeError(f"{kind.name}({a},{b}) needs {a}-{b}")
            self.remove_undirected(a, b)
            if kind == ChangeKind.U4:
                self.add_directed(a, b)
        else:
            if st != FORWARD:
                raise InvalidChangeError(f"{kind.name}({a},{b}) needs {a}->{b}")
            self.remove_directed(a, b)
            if kind == ChangeKind.U6:
                self.add_undirected(a, b)
            elif kind == ChangeKind.U7:
                self.add_directed(b, a)

    # structure -------------------------------------------------------------

    def is_clique_mask(self, mask: int) -> bool:
        m = mask
        while m:
            low = m & -m
            v = low.bit_length() - 1
            m ^= low
            if m & ~(self.pa[v] | self.ch[v] | self.ne[v]):
                return False
        return True

    def is_clique(self, nodes: Iterable[int]) -> bool:
        return self.is_clique_mask(to_mask(nodes))

    def semidirected_path(self, src: int, dst: int, blocked: int = 0,
                          ignored_edge: Optional[tuple[int, int]] = None) -> Optional[list[int]]:
        """Shortest semi-directed path ``src ~> dst`` whose inner nodes avoid
        ``blocked``, never traversing the directed ``ignored_edge``; None if
        there is none."""
        if src == dst:
            raise GraphError("path endpoints must differ")
        target = 1 << dst
        allowed = ~blocked | target
        prev = {src: -1}
        seen = (1 << src)
        frontier = [src]
        ig_from, ig_to = ignored_edge if ignored_edge is not None else (-1, -1)
        while frontier:
            nxt = []
            for u in frontier:
                step = self.ch[u] | self.ne[u]
                if u == ig_from:
                    step &= ~(1 << ig_to) | self.ne[u]
                step &= allowed & ~seen
                if not step:
                    continue
                seen |= step
                if step & target:
                    path = [dst, u]
                    while prev[path[-1]] != -1:
                        path.append(prev[path[-1]])
                    path.reverse()
                    return path
                for v in iter_bits(step):
                    prev[v] = u
                    nxt.append(v)
            frontier = nxt
        return None

    def has_directed_cycle(self) -> bool:
        return topological_order(self, directed_only=True) is None

    def v_structures(self) -> set[tuple[int, int, int]]:
        out = set()
        for y in range(self.d):
            ps = from_mask(self.pa[y])
            for i, x in enumerate(ps):
                adx = self.ad(x)
                for z in ps[i + 1:]:
                    if not adx >> z & 1:
                        out.add((x, y, z))
        return out

    def skeleton(self) -> set[tuple[int, int]]:
        return {(min(a, b), max(a, b)) for a in range(self.d) for b in iter_bits(self.ad(a))}

    def check_invariants(self) -> None:
        for x in range(self.d):
            if (self.pa[x] | self.ch[x] | self.ne[x]) >> x & 1:
                raise GraphError(f"self-loop at {x}")
            if self.pa[x] & self.ch[x] or self.pa[x] & self.ne[x] or self.ch[x] & self.ne[x]:
                raise GraphError(f"two edge types on one pair at {x}")
            for y in iter_bits(self.pa[x]):
                if not self.ch[y] >> x & 1:
                    raise GraphError(f"asymmetric parent {y} of {x}")
            for y in iter_bits(self.ch[x]):
                if not self.pa[y] >> x & 1:
                    raise GraphError(f"asymmetric child {y} of {x}")
            for y in iter_bits(self.ne[x]):
                if not self.ne[y] >> x & 1:
                    raise GraphError(f"asymmetric neighbor {y} of {x}")
        if self.has_directed_cycle():
            raise CycleError("directed cycle")


def apply_change(g: Pdag, c: EdgeChange) -> None:
    g.apply_change(c)


def is_clique(g: Pdag, nodes: Iterable[int]) -> bool:
    return g.is_clique(nodes)


def exists_unblocked_semidirected_path(g: Pdag, src: int, dst: int, blocked: Iterable[int] = (),
                                       ignored_edge: Optional[tuple[int, int]] = None):
    return g.semidirected_path(src, dst, to_mask(blocked), ignored_edge)


def v_structures(g: Pdag) -> set[tuple[int, int, int]]:
    return g.v_structures()


def topological_order(g: Pdag, directed_only: bool = False) -> Optional[list[int]]:
    """Kahn order over directed edges, smallest index first; None on a cycle."""
    indeg = [m.bit_count() for m in g.pa]
    ready = [v for v in range(g.d) if indeg[v] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for c in iter_bits(g.ch[v]):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != g.d:
        return None
    return order


# equivalence classes -----------------------------------------------------

_UNKNOWN, _COMPELLED, _REVERSIBLE = 0, 1, 2


def dag_to_cpdag(g: Pdag) -> Pdag:
    """CPDAG of the Markov equivalence class of DAG ``g``.

    Edges are visited in Chickering's order (heads ascending in topological
    order, tails descending) and labeled compelled or reversible.
    """
    if any(g.ne):
        raise GraphError("dag_to_cpdag needs a DAG (found undirected edges)")
    order = topological_order(g)
    if order is None:
        raise CycleError("input graph is cyclic")
    pos = [0] * g.d
    for i, v in enumerate(order):
        pos[v] = i
    label: dict[tuple[int, int], int] = {}
    ordered = []
    for y in order:
        for x in sorted(iter_bits(g.pa[y]), key=lambda v: -pos[v]):
            ordered.append((x, y))
            label[(x, y)] = _UNKNOWN

    for x, y in ordered:
        if label[(x, y)] != _UNKNOWN:
            continue
        pa_y = g.pa[y]
        done = False
        for w in iter_bits(g.pa[x]):
            if label[(w, x)] != _COMPELLED:
                continue
            if not pa_y >> w & 1:
                for p in iter_bits(pa_y):
                    label[(p, y)] = _COMPELLED
                done = True
                break
            label[(w, y)] = _COMPELLED
        if done:
            continue
        others = pa_y & ~(1 << x) & ~g.ad(x)
        tag = _COMPELLED if others else _REVERSIBLE
        for p in iter_bits(pa_y):
            if label[(p, y)] == _UNKNOWN:
                label[(p, y)] = tag

    out = Pdag(g.d)
    for (x, y), lab in label.items():
        if lab == _COMPELLED:
            out.add_directed(x, y)
        else:
            out.add_undirected(x, y)
    return out


def consistent_extension(g: Pdag) -> Pdag:
    """A DAG with the skeleton and v-structures of ``g`` that keeps its
    directed edges (Dor and Tarsi). The lowest-index eligible sink is peeled
    first, so the result is deterministic."""
    d = g.d
    pa = g.pa[:]
    ch = g.ch[:]
    ne = g.ne[:]
    out = Pdag(d)
    for a, b in g.directed_edges():
        out.add_directed(a, b)
    alive = (1 << d) - 1
    while alive:
        chosen = -1
        for v in iter_bits(alive):
            if ch[v]:
                continue
            adj_v = pa[v] | ne[v]
            ok = True
            for u in iter_bits(ne[v]):
                if adj_v & ~(1 << u) & ~(pa[u] | ch[u] | ne[u]):
                    ok = False
                    break
            if ok:
                chosen = v
                break
        if chosen < 0:
            raise NoExtensionError("PDAG has no consistent extension")
        v = chosen
        bit = 1 << v
        for u in iter_bits(ne[v]):
            out.add_directed(u, v)
            ne[u] &= ~bit
        for u in iter_bits(pa[v]):
            ch[u] &= ~bit
        pa[v] = ne[v] = 0
        alive &= ~bit
    return out


def complete_pdag(g: Pdag) -> Pdag:
    return dag_to_cpdag(consistent_extension(g))


def mec_equal(p: Pdag, q: Pdag) -> bool:
    return p == q


# serialization -----------------------------------------------------------

def to_json_dict(g: Pdag) -> dict:
    return {
        "d": g.d,
        "directed": [list(e) for e in g.directed_edges()],
        "undirected": [list(e) for e in g.undirected_edges()],
    }


def from_json_dict(obj: dict) -> Pdag:
    try:
        d = int(obj["d"])
        return Pdag.from_edges(d, obj.get("directed", []), obj.get("undirected", []))
    except (KeyError, TypeError) as e:
        raise GraphError(f"malformed graph JSON: {e}") from e


def to_text(g: Pdag) -> str:
    lines = [f"d={g.d}"]
    lines += [f"{a} -> {b}" for a, b in g.directed_edges()]
    lines += [f"{a} -- {b}" for a, b in g.undirected_edges()]
    return "\n".join(lines) + "\n"


def from_text(text: str) -> Pdag:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("d="):
        raise GraphError("graph text must start with 'd=<int>'")
    directed, undirected = [], []
    try:
        d = int(lines[0][2:])
        for ln in lines[1:]:
            if "->" in ln:
                a, b = ln.split("->")
                directed.append((int(a), int(b)))
            elif "--" in ln:
                a, b = ln.split("--")
                undirected.append((int(a), int(b)))
            else:
                raise GraphError(f"unrecognized edge line: {ln!r}")
    except ValueError as e:
        raise GraphError(f"malformed graph text: {e}") from e
    return Pdag.from_edges(d, directed, undirected)


def dumps(g: Pdag, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(to_json_dict(g)) + "\n"
    return to_text(g)


def loads(text: str) -> Pdag:
    s = text.lstrip()
    if s.startswith("{"):
        return from_json_dict(json.loads(s))
    return from_text(s)

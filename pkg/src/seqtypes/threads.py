"""Mutable edges, threads, polarity, consumption and brotherhood.

A mutable edge is a track-labelled edge nested somewhere in a derivation:
an argument edge of the derivation tree, an edge inside the type of a
judgment (right), or an edge inside a context entry (left; the root edges
of context entries are the axiom edges).  Ascendance follows an edge
upward through the typing rules and polar inversion flips it at an axiom;
threads are the equivalence classes, and the interface of an operable
derivation consumes them pairwise at application nodes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Union

from .positions import EPS, Position, Track, applicative_depth, format_position
from .stypes import print_type, type_support
from .derivations import (
    AbsNode,
    AppNode,
    AxNode,
    CheckedDerivation,
    FLAVOR_S,
)
from .reduction import OperableDerivation, make_operable
from .terms import Abs, Var, subterm_at

POS = "+"
NEG = "-"


@dataclass(frozen=True)
class ArgEdge:
    pos: Position  # a.k with k >= 2


@dataclass(frozen=True)
class RightEdge:
    pos: Position
    inner: Position  # c.k in supp_mut(T(pos))


@dataclass(frozen=True)
class LeftEdge:
    pos: Position
    var: str
    inner: Position  # k.c in supp_mut(C(pos)(var)); |inner| == 1 is an axiom edge


Edge = Union[ArgEdge, RightEdge, LeftEdge]


def edge_key(e: Edge) -> tuple:
    if isinstance(e, ArgEdge):
        return (0, e.pos)
    if isinstance(e, RightEdge):
        return (1, e.pos, e.inner)
    return (2, e.pos, e.var, e.inner)


def edge_label(e: Edge) -> Track:
    if isinstance(e, ArgEdge):
        return e.pos[-1]
    return e.inner[-1]


def format_edge(e: Edge) -> str:
    if isinstance(e, ArgEdge):
        return f"arg {format_position(e.pos)}"
    if isinstance(e, RightEdge):
        return f"({format_position(e.pos)}, {format_position(e.inner)})"
    return f"({format_position(e.pos)}, {e.var}, {format_position(e.inner)})"


def _parent_key(e: Edge) -> tuple:
    """Edges sharing this key hang off the same node (structural siblings)."""
    if isinstance(e, ArgEdge):
        return ("arg", e.pos[:-1])
    if isinstance(e, RightEdge):
        return ("right", e.pos, e.inner[:-1])
    return ("left", e.pos, e.var, e.inner[:-1])


@dataclass(frozen=True)
class Thread:
    id: int
    edges: tuple[Edge, ...]
    referent: Edge
    label: Track
    kind: str  # "argument" | "inner" | "axiom"


@dataclass(frozen=True)
class ConsumptionArc:
    left: int
    right: int
    pos: Position
    left_polarity: str
    right_polarity: str
    left_edge: Edge
    right_edge: Edge


@dataclass(frozen=True)
class BrotherChain:
    threads: tuple[int, ...]
    positions: tuple[Position, ...]


class UnionFind:
    def __init__(self) -> None:
        self.parent: dict = {}

    def find(self, x):
        root = x
        while self.parent.setdefault(root, root) != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


class ThreadAnalysis:
    """Threads and consumption of one (operable) derivation.

    A flavor-S derivation is implicitly operable with identity interfaces.
    """

    def __init__(self, target: OperableDerivation | CheckedDerivation) -> None:
        if isinstance(target, OperableDerivation):
            self.op: Optional[OperableDerivation] = target
            self.checked = target.checked
        else:
            self.checked = target
            self.op = make_operable(target) if target.flavor == FLAVOR_S else None
        self.edges = self._mutable_edges()
        self._edge_set = set(self.edges)
        self._asc_memo: dict[Edge, Optional[Edge]] = {}
        self._build_threads()
        self._arcs: Optional[list[ConsumptionArc]] = None

    # -- edges ---------------------------------------------------------------

    def _mutable_edges(self) -> list[Edge]:
        checked = self.checked
        out: list[Edge] = []
        for a in checked.support():
            node = checked.node(a)
            if isinstance(node, AppNode):
                out.extend(ArgEdge(a + (k,)) for k in node.arg_tracks)
            sup, _ = type_support(checked.type_at(a))
            out.extend(RightEdge(a, c) for c in sup.mutable_support())
            for x, f in checked.context_at(a).entries:
                supf, _ = type_support(f)
                out.extend(LeftEdge(a, x, c) for c in supf.mutable_support())
        return sorted(out, key=edge_key)

    def asc(self, e: Edge) -> Optional[Edge]:
        """The ascendant edge, or None when e is ascendance-maximal."""
        if e in self._asc_memo:
            return self._asc_memo[e]
        result = self._asc(e)
        self._asc_memo[e] = result
        return result

    def _asc(self, e: Edge) -> Optional[Edge]:
        checked = self.checked
        if isinstance(e, ArgEdge):
            return None
        node = checked.node(e.pos)
        if isinstance(e, RightEdge):
            if isinstance(node, AppNode):
                return RightEdge(e.pos + (1,), (1,) + e.inner)
            if isinstance(node, AbsNode):
                subj = subterm_at(checked.term, e.pos)
                assert isinstance(subj, Abs)
                if e.inner[0] == 1:
                    return RightEdge(e.pos + (0,), e.inner[1:])
                return LeftEdge(e.pos + (0,), subj.binder, e.inner)
            return None
        if isinstance(node, AppNode):
            k = e.inner[0]
            for child in [1] + sorted(node.arg_tracks):
                if k in checked.context_at(e.pos + (child,)).get(e.var).tracks():
                    return LeftEdge(e.pos + (child,), e.var, e.inner)
            raise AssertionError("quantitativity: the entry comes from some premise")
        if isinstance(node, AbsNode):
            return LeftEdge(e.pos + (0,), e.var, e.inner)
        return None

    def highest_ascendant(self, e: Edge) -> Edge:
        while True:
            up = self.asc(e)
            if up is None:
                return e
            e = up

    def polarity(self, e: Edge) -> str:
        if isinstance(e, ArgEdge):
            return POS
        top = self.highest_ascendant(e)
        return POS if isinstance(top, RightEdge) else NEG

    # -- threads ---------------------------------------------------------------

    def _build_threads(self) -> None:
        uf = UnionFind()
        for e in self.edges:
            up = self.asc(e)
            if up is not None:
                uf.union(e, up)
        for a in self.checked.axiom_positions():
            node = self.checked.node(a)
            assert isinstance(node, AxNode)
            subj = subterm_at(self.checked.term, a)
            assert isinstance(subj, Var)
            sup, _ = type_support(node.stype)
            for c in sup.positions:
                if c and c[-1] >= 2:
                    uf.union(LeftEdge(a, subj.name, (node.track,) + c), RightEdge(a, c))
        classes: dict[Edge, list[Edge]] = {}
        for e in self.edges:
            classes.setdefault(uf.find(e), []).append(e)
        threads = []
        for members in classes.values():
            members.sort(key=edge_key)
            referent = self._referent(members)
            kind = (
                "argument"
                if isinstance(referent, ArgEdge)
                else "inner" if isinstance(referent, RightEdge) else "axiom"
            )
            threads.append((members, referent, kind))
        threads.sort(key=lambda item: edge_key(item[0][0]))
        self.threads: list[Thread] = []
        self._thread_of: dict[Edge, int] = {}
        for i, (members, referent, kind) in enumerate(threads):
            labels = {edge_label(e) for e in members}
            assert len(labels) == 1, "edges of one thread share their track"
            self.threads.append(Thread(i, tuple(members), referent, labels.pop(), kind))
            for e in members:
                self._thread_of[e] = i
        self._parent_keys = [
            frozenset(_parent_key(e) for e in thread.edges) for thread in self.threads
        ]

    def _referent(self, members: list[Edge]) -> Edge:
        if len(members) == 1 and isinstance(members[0], ArgEdge):
            return members[0]
        checked = self.checked
        tops = {self.highest_ascendant(e) for e in members}
        for top in sorted(tops, key=edge_key):
            if isinstance(top, RightEdge) and isinstance(checked.node(top.pos), AxNode):
                return top
        for top in sorted(tops, key=edge_key):
            if isinstance(top, LeftEdge) and len(top.inner) == 1:
                return top
        raise AssertionError("every thread has an inner, axiom or argument referent")

    def thread_of(self, e: Edge) -> int:
        return self._thread_of[e]

    def thread(self, tid: int) -> Thread:
        return self.threads[tid]

    def thread_ad(self, tid: int) -> int:
        thread = self.threads[tid]
        if thread.kind == "axiom":
            raise ValueError("applicative depth is undefined for axiom threads")
        return self._ref_ad(thread)

    def _ref_ad(self, thread: Thread) -> int:
        # for argument edges the position already ends with the argument track
        return applicative_depth(thread.referent.pos)

    # -- consumption -----------------------------------------------------------

    def consumption(self) -> list[ConsumptionArc]:
        if self._arcs is not None:
            return self._arcs
        if self.op is None:
            raise ValueError("consumption needs an interface (operable derivation)")
        arcs = []
        for a in self.checked.app_positions():
            phi = self.op.interface[a]
            left = self.checked.left_seq(a)
            sup, _ = type_support(left)
            for p in sorted(sup.mutable_support()):
                e_left = RightEdge(a + (1,), p)
                image = phi.mapping[p]
                e_right: Edge
                if len(p) == 1:
                    e_right = ArgEdge(a + (image[0],))
                else:
                    e_right = RightEdge(a + (image[0],), image[1:])
                arcs.append(
                    ConsumptionArc(
                        self._thread_of[e_left],
                        self._thread_of[e_right],
                        a,
                        self.polarity(e_left),
                        self.polarity(e_right),
                        e_left,
                        e_right,
                    )
                )
        self._arcs = arcs
        return arcs

    # -- brotherhood -----------------------------------------------------------

    def brothers(self, t1: int, t2: int) -> bool:
        """Sibling edges somewhere, or two distinct axiom threads."""
        if t1 == t2:
            return False
        th1, th2 = self.threads[t1], self.threads[t2]
        if th1.kind == "axiom" and th2.kind == "axiom":
            return True
        return bool(self._parent_keys[t1] & self._parent_keys[t2])

    def find_brother_chain(self) -> Optional[BrotherChain]:
        """A consumption path between two brother threads, if one exists."""
        arcs = self.consumption()
        adjacency: dict[int, list[tuple[int, Position]]] = {}
        for arc in arcs:
            adjacency.setdefault(arc.left, []).append((arc.right, arc.pos))
            adjacency.setdefault(arc.right, []).append((arc.left, arc.pos))
        component: dict[int, int] = {}
        for tid in range(len(self.threads)):
            if tid in component:
                continue
            stack = [tid]
            component[tid] = tid
            while stack:
                cur = stack.pop()
                for nxt, _ in adjacency.get(cur, []):
                    if nxt not in component:
                        component[nxt] = tid
                        stack.append(nxt)
        by_component: dict[int, list[int]] = {}
        for tid, root in component.items():
            by_component.setdefault(root, []).append(tid)
        for members in by_component.values():
            for t1, t2 in itertools.combinations(sorted(members), 2):
                if self.brothers(t1, t2):
                    return self._bfs_chain(adjacency, t1, t2)
        return None

    def _bfs_chain(self, adjacency, start: int, goal: int) -> BrotherChain:
        previous: dict[int, tuple[int, Position]] = {start: (start, EPS)}
        queue = [start]
        while queue:
            cur = queue.pop(0)
            if cur == goal:
                break
            for nxt, pos in adjacency.get(cur, []):
                if nxt not in previous:
                    previous[nxt] = (cur, pos)
                    queue.append(nxt)
        threads = [goal]
        positions = []
        cur = goal
        while cur != start:
            cur, pos = previous[cur]
            threads.append(cur)
            positions.append(pos)
        threads.reverse()
        positions.reverse()
        return BrotherChain(tuple(threads), tuple(positions))

    # -- consistency checks --------------------------------------------------

    def check_uniqueness_of_consumption(self) -> bool:
        """Per thread and polarity, at most one consumption involvement."""
        seen: dict[tuple[int, str], int] = {}
        for arc in self.consumption():
            for tid, pol in ((arc.left, arc.left_polarity), (arc.right, arc.right_polarity)):
                seen[(tid, pol)] = seen.get((tid, pol), 0) + 1
        return all(count <= 1 for count in seen.values())

    def check_monotonicity(self) -> bool:
        """Positive left-consumption strictly increases applicative depth."""
        for arc in self.consumption():
            if arc.left_polarity == POS:
                left_ad = self._ref_ad(self.threads[arc.left])
                right_ad = self._ref_ad(self.threads[arc.right])
                if not left_ad < right_ad:
                    return False
        return True


# -- reports -------------------------------------------------------------------

_PALETTE = [
    "crimson",
    "royalblue",
    "forestgreen",
    "darkorange",
    "purple",
    "teal",
    "deeppink",
    "saddlebrown",
    "olive",
    "slategray",
]


def dot_export(analysis: ThreadAnalysis) -> str:
    """The derivation tree with argument edges colored per thread."""
    checked = analysis.checked
    lines = ["digraph derivation {", '  node [shape=box, fontsize=10];']
    for a in sorted(checked.support()):
        node = checked.node(a)
        kind = "ax" if isinstance(node, AxNode) else "abs" if isinstance(node, AbsNode) else "app"
        label = f"{format_position(a)}\\n{kind} : {print_type(checked.type_at(a))}"
        lines.append(f'  "{format_position(a)}" [label="{label}"];')
    for a in sorted(checked.support()):
        for k in checked.children(a):
            child = a + (k,)
            if k >= 2:
                tid = analysis.thread_of(ArgEdge(child))
                color = _PALETTE[tid % len(_PALETTE)]
                extra = f' [label="{k} (t{tid})", color={color}, penwidth=2]'
            else:
                extra = f' [label="{k}"]'
            lines.append(f'  "{format_position(a)}" -> "{format_position(child)}"{extra};')
    lines.append("  // legend: thread id -> track label -> polarities")
    for thread in analysis.threads:
        pols = sorted({analysis.polarity(e) for e in thread.edges})
        lines.append(
            f"  // t{thread.id}: label {thread.label}, {thread.kind},"
            f" ref {format_edge(thread.referent)}, polarities {''.join(pols)}"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def text_report(analysis: ThreadAnalysis) -> str:
    lines = []
    for thread in analysis.threads:
        occurrences = ", ".join(
            f"{format_edge(e)}{analysis.polarity(e)}" for e in thread.edges
        )
        lines.append(
            f"thread t{thread.id} [label {thread.label}, {thread.kind},"
            f" ref {format_edge(thread.referent)}]: {occurrences}"
        )
    if analysis.op is not None:
        for arc in analysis.consumption():
            lines.append(
                f"t{arc.left}{arc.left_polarity} ->{format_position(arc.pos)}"
                f" t{arc.right}{arc.right_polarity}"
            )
    return "\n".join(lines) + "\n"


def mutable_edges(target: OperableDerivation | CheckedDerivation) -> list[Edge]:
    return ThreadAnalysis(target).edges


def compute_threads(target: OperableDerivation | CheckedDerivation) -> list[Thread]:
    return ThreadAnalysis(target).threads

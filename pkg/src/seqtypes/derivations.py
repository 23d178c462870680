"""Rigid derivations for systems S and S_h, and their multiset collapses.

A derivation is stored as shape data only: per-position node kinds, the
axiom tracks and types at the leaves, and the argument tracks at the
applications.  Judgments are a computed view, reconstructed bottom-up by
`check_derivation`; this keeps the stored data free of redundancy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Union

from .positions import (
    EPS,
    Position,
    Track,
    collapse_position,
    format_position,
    parse_position,
)
from .stypes import (
    EMPTY_SEQ,
    RType,
    SArrow,
    SAtom,
    SeqType,
    SType,
    TrackConflictError,
    collapse_type,
    equiv,
    parse_type,
    print_type,
    rarrow,
    rkey,
    rmultiset,
    seq,
    seq_union,
    type_support,
    label_at,
)
from .terms import (
    Abs,
    App,
    Term,
    Var,
    parse_term,
    print_term,
    alpha_key,
    is_normal,
    subterm_at,
    support,
)

FLAVOR_S = "S"
FLAVOR_SH = "Sh"


@dataclass(frozen=True)
class AxNode:
    track: Track
    stype: SType


@dataclass(frozen=True)
class AbsNode:
    pass


@dataclass(frozen=True)
class AppNode:
    arg_tracks: frozenset[Track]


Node = Union[AxNode, AbsNode, AppNode]


@dataclass(frozen=True)
class Derivation:
    term: Term
    flavor: str
    nodes: dict[Position, Node]

    def __post_init__(self) -> None:
        if self.flavor not in (FLAVOR_S, FLAVOR_SH):
            raise ValueError(f"unknown flavor {self.flavor!r}")


@dataclass(frozen=True)
class Context:
    entries: tuple[tuple[str, SeqType], ...]

    def __post_init__(self) -> None:
        names = [x for x, _ in self.entries]
        if names != sorted(names) or len(set(names)) != len(names):
            raise ValueError("context entries must be sorted by variable")
        if any(f.is_empty() for _, f in self.entries):
            raise ValueError("empty entries are left implicit")

    def get(self, x: str) -> SeqType:
        for name, f in self.entries:
            if name == x:
                return f
        return EMPTY_SEQ

    def domain(self) -> list[str]:
        return [x for x, _ in self.entries]

    def without(self, x: str) -> "Context":
        return Context(tuple((n, f) for n, f in self.entries if n != x))


EMPTY_CONTEXT = Context(())


def context(entries: dict[str, SeqType]) -> Context:
    return Context(tuple(sorted((x, f) for x, f in entries.items() if not f.is_empty())))


def context_union(parts: Iterable[Context]) -> Context:
    merged: dict[str, list[SeqType]] = {}
    for part in parts:
        for x, f in part.entries:
            merged.setdefault(x, []).append(f)
    out: dict[str, SeqType] = {}
    for x, fs in merged.items():
        out[x] = seq_union(*fs) if len(fs) > 1 else fs[0]
    return context(out)


@dataclass(frozen=True)
class Judgment:
    context: Context
    subject: Term
    stype: SType


def format_judgment(j: Judgment) -> str:
    ctx = ", ".join(f"{x}:{print_type(f)}" for x, f in j.context.entries)
    sep = " " if ctx else ""
    return f"{ctx}{sep}|- {print_term(j.subject)} : {print_type(j.stype)}"


class DerivationCheckError(ValueError):
    def __init__(self, position: Position, message: str) -> None:
        super().__init__(f"at {format_position(position)}: {message}")
        self.position = position


class MalformedShape(DerivationCheckError):
    pass


class TrackConflict(DerivationCheckError):
    def __init__(self, position: Position, variable: str, tracks: frozenset[Track]) -> None:
        super().__init__(position, f"track conflict on {sorted(tracks)} for {variable!r}")
        self.variable = variable
        self.tracks = tracks


class AppMismatch(DerivationCheckError):
    def __init__(self, position: Position, left: SeqType, right: SeqType) -> None:
        super().__init__(
            position, f"application sides differ: {print_type(left)} vs {print_type(right)}"
        )
        self.left = left
        self.right = right


class NotAnApplication(ValueError):
    pass


@dataclass
class CheckedDerivation:
    """A derivation together with its reconstructed judgments."""

    derivation: Derivation
    judgments: dict[Position, Judgment]
    _children: dict[Position, frozenset[Track]]

    @property
    def term(self) -> Term:
        return self.derivation.term

    @property
    def flavor(self) -> str:
        return self.derivation.flavor

    @property
    def nodes(self) -> dict[Position, Node]:
        return self.derivation.nodes

    def support(self) -> frozenset[Position]:
        return frozenset(self.derivation.nodes)

    def children(self, a: Position) -> list[Track]:
        return sorted(self._children[a])

    def node(self, a: Position) -> Node:
        return self.derivation.nodes[a]

    def type_at(self, a: Position) -> SType:
        return self.judgments[a].stype

    def context_at(self, a: Position) -> Context:
        return self.judgments[a].context

    def conclusion(self) -> Judgment:
        return self.judgments[EPS]

    def app_positions(self) -> list[Position]:
        return sorted(a for a, n in self.nodes.items() if isinstance(n, AppNode))

    def axiom_positions(self) -> list[Position]:
        return sorted(a for a, n in self.nodes.items() if isinstance(n, AxNode))

    def axiom_track(self, a: Position) -> Track:
        node = self.nodes[a]
        if not isinstance(node, AxNode):
            raise KeyError(f"{format_position(a)} is not an axiom")
        return node.track

    def left_seq(self, a: Position) -> SeqType:
        node = self.nodes.get(a)
        if not isinstance(node, AppNode):
            raise NotAnApplication(format_position(a))
        arrow = self.judgments[a + (1,)].stype
        assert isinstance(arrow, SArrow)
        return arrow.source

    def right_seq(self, a: Position) -> SeqType:
        node = self.nodes.get(a)
        if not isinstance(node, AppNode):
            raise NotAnApplication(format_position(a))
        return seq({k: self.judgments[a + (k,)].stype for k in node.arg_tracks})

    def axioms_above(self, a: Position, x: str) -> set[Position]:
        """Axioms above `a` typing occurrences of x not rebound in between."""
        out: set[Position] = set()
        stack = [a]
        while stack:
            p = stack.pop()
            subj = subterm_at(self.term, p)
            if isinstance(subj, Abs) and subj.binder == x:
                continue
            node = self.nodes[p]
            if isinstance(node, AxNode):
                if isinstance(subj, Var) and subj.name == x:
                    out.add(p)
            else:
                stack.extend(p + (k,) for k in self._children[p])
        return out

    def pos_of(self, a: Position, x: str, k: Track) -> Position:
        for a0 in self.axioms_above(a, x):
            if self.axiom_track(a0) == k:
                return a0
        raise KeyError(f"no axiom of {x!r} with track {k} above {format_position(a)}")


def check_derivation(deriv: Derivation) -> CheckedDerivation:
    term, nodes, flavor = deriv.term, deriv.nodes, deriv.flavor
    if EPS not in nodes:
        raise MalformedShape(EPS, "missing root node")
    tsupp = support(term)
    children: dict[Position, set[Track]] = {a: set() for a in nodes}
    for a in nodes:
        if a:
            parent = a[:-1]
            if parent not in nodes:
                raise MalformedShape(a, "parent position missing")
            children[parent].add(a[-1])
    judgments: dict[Position, Judgment] = {}
    for a in sorted(nodes, reverse=True):
        node = nodes[a]
        if collapse_position(a) not in tsupp:
            raise MalformedShape(a, "position outside the subject's support")
        subj = subterm_at(term, a)
        kids = children[a]
        if isinstance(node, AxNode):
            if kids:
                raise MalformedShape(a, "axiom with children")
            if not isinstance(subj, Var):
                raise MalformedShape(a, "axiom not at a variable")
            if node.track < 2:
                raise MalformedShape(a, "axiom track must be >= 2")
            ctx = context({subj.name: seq({node.track: node.stype})})
            judgments[a] = Judgment(ctx, subj, node.stype)
        elif isinstance(node, AbsNode):
            if not isinstance(subj, Abs):
                raise MalformedShape(a, "abstraction node not at an abstraction")
            if kids != {0}:
                raise MalformedShape(a, "abstraction needs exactly the child 0")
            premise = judgments[a + (0,)]
            source = premise.context.get(subj.binder)
            judgments[a] = Judgment(
                premise.context.without(subj.binder), subj, SArrow(source, premise.stype)
            )
        else:
            if not isinstance(subj, App):
                raise MalformedShape(a, "application node not at an application")
            if any(k < 2 for k in node.arg_tracks):
                raise MalformedShape(a, "argument tracks must be >= 2")
            if kids != {1} | set(node.arg_tracks):
                raise MalformedShape(a, "application children do not match its tracks")
            left = judgments[a + (1,)]
            if not isinstance(left.stype, SArrow):
                raise MalformedShape(a, "left premise does not conclude with an arrow")
            lseq = left.stype.source
            rseq = seq({k: judgments[a + (k,)].stype for k in node.arg_tracks})
            if flavor == FLAVOR_S:
                if lseq != rseq:
                    raise AppMismatch(a, lseq, rseq)
            elif not equiv(lseq, rseq):
                raise AppMismatch(a, lseq, rseq)
            try:
                merged = context_union(
                    [left.context] + [judgments[a + (k,)].context for k in sorted(node.arg_tracks)]
                )
            except TrackConflictError as exc:
                variable = _conflict_variable(judgments, a, node, exc.tracks)
                raise TrackConflict(a, variable, exc.tracks) from None
            judgments[a] = Judgment(merged, subj, left.stype.target)
    return CheckedDerivation(deriv, judgments, {a: frozenset(ks) for a, ks in children.items()})


def _conflict_variable(judgments, a, node, tracks) -> str:
    seen: dict[tuple[str, Track], int] = {}
    for k in [1] + sorted(node.arg_tracks):
        for x, f in judgments[a + (k,)].context.entries:
            for track in f.tracks():
                if (x, track) in seen and track in tracks:
                    return x
                seen[(x, track)] = 1
    return "?"


def quantitativity_holds(checked: CheckedDerivation) -> bool:
    """C(a)(x) is exactly the union of the axioms above; automatic when finite."""
    for a in checked.support():
        ctx = checked.context_at(a)
        names = set(ctx.domain())
        subj = subterm_at(checked.term, a)
        if isinstance(subj, Var):
            names.add(subj.name)
        for x in names:
            expected: dict[Track, SType] = {}
            for a0 in checked.axioms_above(a, x):
                node = checked.node(a0)
                assert isinstance(node, AxNode)
                if node.track in expected:
                    return False
                expected[node.track] = node.stype
            if seq(expected) != ctx.get(x):
                return False
    return True


# -- bipositions ------------------------------------------------------------


@dataclass(frozen=True)
class RightBip:
    pos: Position
    inner: Position


@dataclass(frozen=True)
class LeftBip:
    pos: Position
    var: str
    inner: Position


Biposition = Union[RightBip, LeftBip]


def bisupport(checked: CheckedDerivation) -> frozenset[Biposition]:
    out: set[Biposition] = set()
    for a in checked.support():
        j = checked.judgments[a]
        sup, _ = type_support(j.stype)
        out.update(RightBip(a, c) for c in sup.positions)
        for x, f in j.context.entries:
            supf, _ = type_support(f)
            out.update(LeftBip(a, x, c) for c in supf.positions)
    return frozenset(out)


def biposition_lookup(checked: CheckedDerivation, bip: Biposition) -> str:
    if isinstance(bip, RightBip):
        return label_at(checked.type_at(bip.pos), bip.inner)
    return label_at(checked.context_at(bip.pos).get(bip.var), bip.inner)


# -- multiset (R) derivations -----------------------------------------------


@dataclass(frozen=True)
class RAxD:
    rtype: RType


@dataclass(frozen=True)
class RAbsD:
    child: "RNode"


@dataclass(frozen=True)
class RAppD:
    left: "RNode"
    args: tuple["RNode", ...]


RNode = Union[RAxD, RAbsD, RAppD]

RStep = tuple[int, int]  # (0,0) abs child, (1,0) app left, (2,j) argument j
RPath = tuple[RStep, ...]


def rderiv_key(n: RNode) -> tuple:
    if isinstance(n, RAxD):
        return (0, rkey(n.rtype))
    if isinstance(n, RAbsD):
        return (1, rderiv_key(n.child))
    return (2, rderiv_key(n.left), tuple(rderiv_key(c) for c in n.args))


def rapp(left: RNode, args: Iterable[RNode]) -> RAppD:
    return RAppD(left, tuple(sorted(args, key=rderiv_key)))


@dataclass(frozen=True, eq=False)
class RDerivation:
    term: Term
    root: RNode

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RDerivation):
            return NotImplemented
        return alpha_key(self.term) == alpha_key(other.term) and self.root == other.root

    def __hash__(self) -> int:
        return hash((alpha_key(self.term), self.root))


class RCheckError(ValueError):
    def __init__(self, path: RPath, reason: str) -> None:
        super().__init__(f"at R-path {path}: {reason}")
        self.path = path
        self.reason = reason


RContext = dict[str, tuple[RType, ...]]


@dataclass(frozen=True)
class RJudgment:
    context: tuple[tuple[str, tuple[RType, ...]], ...]
    rtype: RType


def _rcontext_merge(parts: list[RContext]) -> RContext:
    out: dict[str, list[RType]] = {}
    for part in parts:
        for x, types in part.items():
            out.setdefault(x, []).extend(types)
    return {x: rmultiset(ts) for x, ts in out.items()}


def check_R(rd: RDerivation) -> RJudgment:
    """Validate the multiset-side rules; returns the concluding judgment."""

    def go(node: RNode, subj: Term, path: RPath) -> tuple[RContext, RType]:
        if isinstance(node, RAxD):
            if not isinstance(subj, Var):
                raise RCheckError(path, "axiom not at a variable")
            return {subj.name: (node.rtype,)}, node.rtype
        if isinstance(node, RAbsD):
            if not isinstance(subj, Abs):
                raise RCheckError(path, "abstraction node not at an abstraction")
            ctx, rtype = go(node.child, subj.body, path + ((0, 0),))
            source = ctx.pop(subj.binder, ())
            return ctx, rarrow(source, rtype)
        if not isinstance(subj, App):
            raise RCheckError(path, "application node not at an application")
        lctx, ltype = go(node.left, subj.left, path + ((1, 0),))
        from .stypes import RArrow

        if not isinstance(ltype, RArrow):
            raise RCheckError(path, "left premise does not conclude with an arrow")
        if tuple(sorted(node.args, key=rderiv_key)) != node.args:
            raise RCheckError(path, "argument premises not in canonical order")
        arg_results = [
            go(arg, subj.right, path + ((2, j),)) for j, arg in enumerate(node.args)
        ]
        premise_types = rmultiset(rtype for _, rtype in arg_results)
        if premise_types != ltype.source:
            raise RCheckError(path, "app_mismatch")
        merged = _rcontext_merge([lctx] + [ctx for ctx, _ in arg_results])
        return merged, ltype.target

    ctx, rtype = go(rd.root, rd.term, ())
    return RJudgment(tuple(sorted((x, ts) for x, ts in ctx.items() if ts)), rtype)


def collapse_derivation(checked: CheckedDerivation) -> RDerivation:
    rd, _ = collapse_with_paths(checked)
    return rd


def collapse_with_paths(
    checked: CheckedDerivation,
) -> tuple[RDerivation, dict[Position, RPath]]:
    """Collapse, returning where each rigid position lands in the R-tree.

    Argument premises with equal collapses are ordered by their original
    track, which fixes a deterministic correspondence.
    """
    rnodes: dict[Position, RNode] = {}
    for a in sorted(checked.support(), reverse=True):
        node = checked.node(a)
        if isinstance(node, AxNode):
            rnodes[a] = RAxD(collapse_type(node.stype))
        elif isinstance(node, AbsNode):
            rnodes[a] = RAbsD(rnodes[a + (0,)])
        else:
            order = sorted(node.arg_tracks, key=lambda k: (rderiv_key(rnodes[a + (k,)]), k))
            rnodes[a] = RAppD(rnodes[a + (1,)], tuple(rnodes[a + (k,)] for k in order))
    paths: dict[Position, RPath] = {EPS: ()}
    for a in sorted(checked.support()):
        node = checked.node(a)
        if isinstance(node, AbsNode):
            paths[a + (0,)] = paths[a] + ((0, 0),)
        elif isinstance(node, AppNode):
            paths[a + (1,)] = paths[a] + ((1, 0),)
            order = sorted(node.arg_tracks, key=lambda k: (rderiv_key(rnodes[a + (k,)]), k))
            for j, k in enumerate(order):
                paths[a + (k,)] = paths[a] + ((2, j),)
    return RDerivation(checked.term, rnodes[EPS]), paths


def r_subnode(rd: RDerivation, path: RPath) -> RNode:
    node = rd.root
    for kind, j in path:
        if kind == 0 and isinstance(node, RAbsD):
            node = node.child
        elif kind == 1 and isinstance(node, RAppD):
            node = node.left
        elif kind == 2 and isinstance(node, RAppD):
            node = node.args[j]
        else:
            raise KeyError(path)
    return node


# -- derivations of normal forms --------------------------------------------


@dataclass(frozen=True)
class GenBudget:
    width: int = 2
    limit: int = 64


def _decompose_normal(t: Term) -> tuple[list[str], str, list[Term]]:
    binders = []
    u = t
    while isinstance(u, Abs):
        binders.append(u.binder)
        u = u.body
    args: list[Term] = []
    while isinstance(u, App):
        args.append(u.right)
        u = u.left
    if not isinstance(u, Var):
        raise ValueError("term is not in beta-normal form")
    return binders, u.name, list(reversed(args))


def _shapes(t: Term, width: int) -> list:
    """Width choices for every application argument, deterministically ordered."""
    _, _, args = _decompose_normal(t)
    per_arg: list[list[tuple]] = []
    for arg in args:
        sub = _shapes(arg, width)
        options: list[tuple] = []
        for w in range(width + 1):
            options.extend(_combinations_with_replacement(sub, w))
        per_arg.append(options)
    out: list[tuple] = []

    def product(i: int, acc: tuple) -> None:
        if i == len(per_arg):
            out.append(acc)
            return
        for option in per_arg[i]:
            product(i + 1, acc + (option,))

    product(0, ())
    return out


def _combinations_with_replacement(items: list, r: int) -> list[tuple]:
    if r == 0:
        return [()]
    out = []

    def rec(start: int, acc: tuple) -> None:
        if len(acc) == r:
            out.append(acc)
            return
        for i in range(start, len(items)):
            rec(i, acc + (items[i],))

    rec(0, ())
    return out


class _Counters:
    def __init__(self) -> None:
        self.atom = 0
        self.track = 1

    def fresh_atom(self) -> SType:
        self.atom += 1
        return SAtom(f"o{self.atom}")

    def fresh_track(self) -> Track:
        self.track += 1
        return self.track


def _materialize(
    t: Term, shape: tuple, prefix: Position, counters: _Counters, nodes: dict[Position, Node]
) -> tuple[SType, dict[str, dict[Track, SType]]]:
    """Build the nodes of one subderivation; returns its type and context."""
    binders, head, args = _decompose_normal(t)
    n, m = len(binders), len(args)
    spine = prefix + (0,) * n
    for i in range(n):
        nodes[prefix + (0,) * i] = AbsNode()
    ctx: dict[str, dict[Track, SType]] = {}
    arg_seqs: list[SeqType] = []
    for j, (arg, arg_shape) in enumerate(zip(args, shape), start=1):
        app_pos = spine + (1,) * (m - j)
        entries: dict[Track, SType] = {}
        for copy_shape in arg_shape:
            track = counters.fresh_track()
            copy_type, copy_ctx = _materialize(
                arg, copy_shape, app_pos + (track,), counters, nodes
            )
            entries[track] = copy_type
            for x, entries_x in copy_ctx.items():
                ctx.setdefault(x, {}).update(entries_x)
        nodes[app_pos] = AppNode(frozenset(entries))
        arg_seqs.append(seq(entries))
    head_type: SType = counters.fresh_atom()
    for entries in reversed(arg_seqs):
        head_type = SArrow(entries, head_type)
    head_track = counters.fresh_track()
    nodes[spine + (1,) * m] = AxNode(head_track, head_type)
    ctx.setdefault(head, {})[head_track] = head_type
    result: SType = head_type
    for _ in range(m):
        assert isinstance(result, SArrow)
        result = result.target
    for binder in reversed(binders):
        source = seq(ctx.pop(binder, {}))
        result = SArrow(source, result)
    return result, ctx


def generate_normal_form_derivations(t: Term, budget: GenBudget = GenBudget()) -> list[Derivation]:
    """All flavor-S derivations of a beta-normal term, up to the budget.

    Axioms receive fresh atoms and globally distinct axiom tracks, so the
    contexts never conflict; every head variable gets an arrow of exact
    arity.  Enumeration order is deterministic (widths ascending).
    """
    if not is_normal(t):
        raise ValueError("the subject must be beta-normal")
    out: list[Derivation] = []
    for shape in _shapes(t, budget.width):
        if len(out) >= budget.limit:
            break
        counters = _Counters()
        nodes: dict[Position, Node] = {}
        _materialize(t, shape, EPS, counters, nodes)
        out.append(Derivation(t, FLAVOR_S, nodes))
    return out


# -- file format -------------------------------------------------------------


def derivation_to_json(deriv: Derivation) -> dict:
    entries = []
    for a in sorted(deriv.nodes):
        node = deriv.nodes[a]
        if isinstance(node, AxNode):
            entries.append(
                {
                    "pos": format_position(a),
                    "kind": "ax",
                    "track": node.track,
                    "type": print_type(node.stype),
                }
            )
        elif isinstance(node, AbsNode):
            entries.append({"pos": format_position(a), "kind": "abs"})
        else:
            entries.append(
                {"pos": format_position(a), "kind": "app", "args": sorted(node.arg_tracks)}
            )
    return {"term": print_term(deriv.term), "flavor": deriv.flavor, "nodes": entries}


def derivation_from_json(data: dict) -> Derivation:
    term = parse_term(data["term"])
    nodes: dict[Position, Node] = {}
    for entry in data["nodes"]:
        a = parse_position(entry["pos"])
        kind = entry["kind"]
        if kind == "ax":
            nodes[a] = AxNode(int(entry["track"]), parse_type(entry["type"]))
        elif kind == "abs":
            nodes[a] = AbsNode()
        elif kind == "app":
            nodes[a] = AppNode(frozenset(int(k) for k in entry["args"]))
        else:
            raise ValueError(f"unknown node kind {kind!r}")
    return Derivation(term, data["flavor"], nodes)


def dumps_derivation(deriv: Derivation) -> str:
    return json.dumps(derivation_to_json(deriv), indent=2) + "\n"


def loads_derivation(text: str) -> Derivation:
    return derivation_from_json(json.loads(text))


def save_derivation(deriv: Derivation, path: str) -> None:
    with open(path, "w") as handle:
        handle.write(dumps_derivation(deriv))


def load_derivation(path: str) -> Derivation:
    with open(path) as handle:
        return loads_derivation(handle.read())

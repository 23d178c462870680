"""Trivialization of operable derivations and derivation isomorphisms.

Consumption forces facing threads to share their new track value; closing
that constraint and assigning one fresh track per class yields a
relabelling whose resetting is a trivial (system S) derivation isomorphic
to the input.  The only obstruction would be a consumption path between
two brother threads, which cannot exist; the search for one is kept as a
diagnostic, never silenced.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .positions import (
    EPS,
    Position,
    Track,
    Relabelling01,
    ZeroOneIso,
    apply_relabelling,
    check_01_iso,
    collapse_position,
    enumerate_01_isos,
    format_position,
)
from .stypes import (
    SArrow,
    TypeIso,
    check_type_iso,
    collapse_type,
    enumerate_type_isos,
    identity_iso,
    rkey,
    type_support,
)
from .terms import Abs, Var, alpha_key, subterm_at
from .derivations import (
    AbsNode,
    AppNode,
    AxNode,
    CheckedDerivation,
    Derivation,
    FLAVOR_S,
    FLAVOR_SH,
    Node,
    check_derivation,
)
from .reduction import OperableDerivation, ResidualTypes, reduce_operable
from .threads import (
    ArgEdge,
    BrotherChain,
    ConsumptionArc,
    Edge,
    LeftEdge,
    NEG,
    RightEdge,
    ThreadAnalysis,
    UnionFind,
    edge_key,
)


class BrotherChainError(ValueError):
    """Two brother threads were forced to share a track.

    Unreachable for valid operable derivations; raised with an explicit
    witness so a hit is a diagnosable bug, never silent."""

    def __init__(self, chain: BrotherChain) -> None:
        super().__init__(f"brother chain through threads {chain.threads}")
        self.chain = chain


@dataclass(frozen=True)
class ThreadClasses:
    """Partition of the threads by the closure of consumption."""

    classes: tuple[tuple[int, ...], ...]
    class_of: dict[int, int]


def consumption_closure(analysis: ThreadAnalysis) -> ThreadClasses:
    uf = UnionFind()
    for thread in analysis.threads:
        uf.find(thread.id)
    for arc in analysis.consumption():
        uf.union(arc.left, arc.right)
    grouped: dict[int, list[int]] = {}
    for thread in analysis.threads:
        grouped.setdefault(uf.find(thread.id), []).append(thread.id)

    def least_edge(tids: list[int]):
        return min(edge_key(analysis.thread(t).edges[0]) for t in tids)

    ordered = sorted((sorted(tids) for tids in grouped.values()), key=least_edge)
    classes = tuple(tuple(tids) for tids in ordered)
    class_of = {tid: i for i, tids in enumerate(classes) for tid in tids}
    return ThreadClasses(classes, class_of)


def assign_track_values(
    analysis: ThreadAnalysis, classes: ThreadClasses
) -> dict[int, Track]:
    """One fresh track per class, least-unused in class order.

    Fails with an explicit brother chain if two brother threads ended up in
    the same class; this never happens for a valid operable derivation.
    """
    for tids in classes.classes:
        for t1, t2 in itertools.combinations(tids, 2):
            if analysis.brothers(t1, t2):
                chain = analysis.find_brother_chain()
                assert chain is not None
                raise BrotherChainError(chain)
    return {i: i + 2 for i in range(len(classes.classes))}


@dataclass
class DerivationRelabelling:
    """New tracks for the argument edges, the axiom types and axiom tracks."""

    arg: dict[Position, Track]
    axiom_types: dict[Position, dict[Position, Track]]
    axiom_tracks: dict[Position, Track]


def build_relabelling(
    analysis: ThreadAnalysis, classes: ThreadClasses, values: dict[int, Track]
) -> DerivationRelabelling:
    checked = analysis.checked

    def value_of(edge: Edge) -> Track:
        return values[classes.class_of[analysis.thread_of(edge)]]

    arg: dict[Position, Track] = {}
    for a in checked.app_positions():
        node = checked.node(a)
        assert isinstance(node, AppNode)
        for k in node.arg_tracks:
            arg[a + (k,)] = value_of(ArgEdge(a + (k,)))
    axiom_types: dict[Position, dict[Position, Track]] = {}
    axiom_tracks: dict[Position, Track] = {}
    for a in checked.axiom_positions():
        node = checked.node(a)
        assert isinstance(node, AxNode)
        subj = subterm_at(checked.term, a)
        assert isinstance(subj, Var)
        sup, _ = type_support(node.stype)
        axiom_types[a] = {c: value_of(RightEdge(a, c)) for c in sup.mutable_support()}
        axiom_tracks[a] = value_of(LeftEdge(a, subj.name, (node.track,)))
    return DerivationRelabelling(arg, axiom_types, axiom_tracks)


@dataclass
class DerivationIso:
    """01-isomorphism of supports plus one type isomorphism per axiom."""

    supp_map: dict[Position, Position]
    axiom_isos: dict[Position, TypeIso]


class IsoMismatch(ValueError):
    pass


class NodeIsos:
    """Derive the per-judgment type isomorphisms induced by a derivation iso.

    Everything follows from the support map and the axiom isos: contexts
    transport along the matched axioms, abstraction and application types
    are rebuilt structurally.
    """

    def __init__(
        self,
        c1: CheckedDerivation,
        c2: CheckedDerivation,
        supp_map: dict[Position, Position],
        axiom_isos: dict[Position, TypeIso],
    ) -> None:
        self.c1 = c1
        self.c2 = c2
        self.supp_map = supp_map
        self.axiom_isos = axiom_isos
        self._memo: dict[Position, TypeIso] = {}

    def node_iso(self, a: Position) -> TypeIso:
        if a in self._memo:
            return self._memo[a]
        node = self.c1.node(a)
        if isinstance(node, AxNode):
            iso = self.axiom_isos[a]
        elif isinstance(node, AbsNode):
            subj = subterm_at(self.c1.term, a)
            assert isinstance(subj, Abs)
            ctx_iso = self.context_iso(a + (0,), subj.binder)
            target = self.node_iso(a + (0,))
            mapping = {EPS: EPS, **ctx_iso.mapping}
            for c, c2 in target.mapping.items():
                mapping[(1,) + c] = (1,) + c2
            iso = TypeIso(mapping)
        else:
            inner = self.node_iso(a + (1,))
            sup, _ = type_support(self.c1.type_at(a))
            try:
                iso = TypeIso({c: inner.mapping[(1,) + c][1:] for c in sup.positions})
            except KeyError as exc:
                raise IsoMismatch(f"target mismatch at {format_position(a)}") from exc
        self._memo[a] = iso
        return iso

    def context_iso(self, a: Position, x: str) -> TypeIso:
        mapping: dict[Position, Position] = {}
        for k in self.c1.context_at(a).get(x).tracks():
            a0 = self.c1.pos_of(a, x, k)
            image = self.supp_map[a0]
            node2 = self.c2.node(image)
            if not isinstance(node2, AxNode):
                raise IsoMismatch(f"axiom {format_position(a0)} not matched to an axiom")
            inner = self.node_iso(a0)
            for c, c2 in inner.mapping.items():
                mapping[(k,) + c] = (node2.track,) + c2
        return TypeIso(mapping)

    def left_iso(self, a: Position) -> TypeIso:
        inner = self.node_iso(a + (1,))
        sup, _ = type_support(self.c1.left_seq(a))
        return TypeIso({c: inner.mapping[c] for c in sup.positions})

    def right_iso(self, a: Position) -> TypeIso:
        node = self.c1.node(a)
        assert isinstance(node, AppNode)
        mapping: dict[Position, Position] = {}
        for k in node.arg_tracks:
            k2 = self.supp_map[a + (k,)][-1]
            inner = self.node_iso(a + (k,))
            for c, c2 in inner.mapping.items():
                mapping[(k,) + c] = (k2,) + c2
        return TypeIso(mapping)


def verify_derivation_iso(
    c1: CheckedDerivation,
    c2: CheckedDerivation,
    iso: DerivationIso,
    interface1: Optional[dict[Position, TypeIso]] = None,
    interface2: Optional[dict[Position, TypeIso]] = None,
) -> bool:
    """All hybrid-iso clauses; with interfaces, also the commuting square."""
    if alpha_key(c1.term) != alpha_key(c2.term):
        return False
    supp1, supp2 = c1.support(), c2.support()
    try:
        if not check_01_iso(supp1, supp2, ZeroOneIso(iso.supp_map)):
            return False
    except ValueError:
        return False
    if set(iso.axiom_isos) != set(c1.axiom_positions()):
        return False
    derived = NodeIsos(c1, c2, iso.supp_map, iso.axiom_isos)
    try:
        for a in supp1:
            if type(c1.node(a)) is not type(c2.node(iso.supp_map[a])):
                return False
            if not check_type_iso(
                c1.type_at(a), c2.type_at(iso.supp_map[a]), derived.node_iso(a)
            ):
                return False
        if interface1 is not None and interface2 is not None:
            for a in c1.app_positions():
                a2 = iso.supp_map[a]
                left = derived.left_iso(a)
                right = derived.right_iso(a)
                lhs = right.compose(interface1[a])
                rhs = interface2[a2].compose(left)
                if lhs.mapping != rhs.mapping:
                    return False
    except (IsoMismatch, KeyError):
        return False
    return True


def enumerate_derivation_isos(
    c1: CheckedDerivation, c2: CheckedDerivation, limit: int = 64
) -> list[DerivationIso]:
    """Hybrid-derivation isomorphisms, up to the given budget."""
    if alpha_key(c1.term) != alpha_key(c2.term):
        return []

    def labels(c: CheckedDerivation) -> dict[Position, str]:
        out = {}
        for a in c.support():
            node = c.node(a)
            if isinstance(node, AxNode):
                out[a] = f"ax{rkey(collapse_type(node.stype))}"
            else:
                out[a] = "abs" if isinstance(node, AbsNode) else "app"
        return out

    out: list[DerivationIso] = []
    for supp_iso in enumerate_01_isos(c1.support(), c2.support(), labels(c1), labels(c2)):
        axiom_choices = []
        for a in c1.axiom_positions():
            isos = enumerate_type_isos(c1.type_at(a), c2.type_at(supp_iso(a)))
            axiom_choices.append([(a, t) for t in isos])
        for combo in itertools.product(*axiom_choices):
            candidate = DerivationIso(dict(supp_iso.mapping), dict(combo))
            if verify_derivation_iso(c1, c2, candidate):
                out.append(candidate)
            if len(out) >= limit:
                return out
    return out


# -- resetting ----------------------------------------------------------------


@dataclass
class ResetResult:
    checked: CheckedDerivation
    iso: DerivationIso
    interface: Optional[dict[Position, TypeIso]]


def reset_derivation(
    checked: CheckedDerivation,
    relab: DerivationRelabelling,
    interface: Optional[dict[Position, TypeIso]] = None,
    flavor: str = FLAVOR_SH,
) -> ResetResult:
    """Apply a relabelling, rebuilding the derivation and the induced iso.

    The conjugated interface makes the result operably isomorphic to the
    input whenever an interface is supplied.
    """
    supp_map: dict[Position, Position] = {}
    for a in sorted(checked.support()):
        if not a:
            supp_map[a] = EPS
        else:
            k = a[-1]
            new_k = k if k < 2 else relab.arg[a]
            supp_map[a] = supp_map[a[:-1]] + (new_k,)
    new_nodes: dict[Position, Node] = {}
    axiom_isos: dict[Position, TypeIso] = {}
    for a, node in checked.nodes.items():
        target = supp_map[a]
        if isinstance(node, AxNode):
            type_relab = Relabelling01(relab.axiom_types[a])
            _, phi = apply_relabelling(type_support(node.stype)[0], type_relab)
            new_type = _relabel_type(node.stype, phi)
            new_nodes[target] = AxNode(relab.axiom_tracks[a], new_type)
            axiom_isos[a] = TypeIso(dict(phi.mapping))
        elif isinstance(node, AbsNode):
            new_nodes[target] = AbsNode()
        else:
            new_nodes[target] = AppNode(
                frozenset(relab.arg[a + (k,)] for k in node.arg_tracks)
            )
    new_checked = check_derivation(Derivation(checked.term, flavor, new_nodes))
    iso = DerivationIso(supp_map, axiom_isos)
    new_interface: Optional[dict[Position, TypeIso]] = None
    if interface is not None:
        derived = NodeIsos(checked, new_checked, supp_map, axiom_isos)
        new_interface = {}
        for a in checked.app_positions():
            left = derived.left_iso(a)
            right = derived.right_iso(a)
            new_interface[supp_map[a]] = right.compose(interface[a]).compose(left.inverse())
    return ResetResult(new_checked, iso, new_interface)


def _relabel_type(stype, phi: ZeroOneIso):
    """Rebuild an S-type along a 01-resetting of its support."""
    from .stypes import SAtom, seq

    def rebuild(u, prefix: Position):
        if isinstance(u, SAtom):
            return u
        entries = {}
        for k, s in u.source.items():
            new_k = phi.mapping[prefix + (k,)][-1]
            entries[new_k] = rebuild(s, prefix + (k,))
        return SArrow(seq(entries), rebuild(u.target, prefix + (1,)))

    return rebuild(stype, EPS)


def random_relabelling(checked: CheckedDerivation, rng) -> DerivationRelabelling:
    """A random relabelling; resetting by it yields a hybrid perturbation."""

    def fresh_tracks(n: int) -> list[Track]:
        pool = list(range(2, 2 + max(4, 3 * n)))
        rng.shuffle(pool)
        return pool[:n]

    arg: dict[Position, Track] = {}
    for a in checked.app_positions():
        node = checked.node(a)
        assert isinstance(node, AppNode)
        tracks = sorted(node.arg_tracks)
        for k, new in zip(tracks, fresh_tracks(len(tracks))):
            arg[a + (k,)] = new
    axiom_types: dict[Position, dict[Position, Track]] = {}
    axiom_tracks: dict[Position, Track] = {}
    axioms = checked.axiom_positions()
    track_pool = list(range(2, 2 + 3 * len(axioms) + 2))
    rng.shuffle(track_pool)
    for a, new_track in zip(axioms, track_pool):
        node = checked.node(a)
        assert isinstance(node, AxNode)
        sup, _ = type_support(node.stype)
        by_parent: dict[Position, list[Position]] = {}
        for c in sup.mutable_support():
            by_parent.setdefault(c[:-1], []).append(c)
        assignment: dict[Position, Track] = {}
        for parent, siblings in by_parent.items():
            for c, new in zip(sorted(siblings), fresh_tracks(len(siblings))):
                assignment[c] = new
        axiom_types[a] = assignment
        axiom_tracks[a] = new_track
    return DerivationRelabelling(arg, axiom_types, axiom_tracks)


# -- trivialization -----------------------------------------------------------


@dataclass
class TrivializeResult:
    trivial: CheckedDerivation
    iso: DerivationIso
    classes: ThreadClasses
    values: dict[int, Track]
    relabelling: DerivationRelabelling
    analysis: ThreadAnalysis


def trivialize(op: OperableDerivation) -> TrivializeResult:
    """A trivial derivation isomorphic to the operable input.

    The output checks under the syntactic application rule and collapses on
    the same multiset derivation; a BrotherChainError cannot arise from a
    valid input and is surfaced as a diagnostic.
    """
    analysis = ThreadAnalysis(op)
    classes = consumption_closure(analysis)
    values = assign_track_values(analysis, classes)
    relab = build_relabelling(analysis, classes, values)
    reset = reset_derivation(op.checked, relab, op.interface, flavor=FLAVOR_S)
    assert reset.interface is not None
    for a, phi in reset.interface.items():
        identity = identity_iso(reset.checked.left_seq(a))
        assert phi.mapping == identity.mapping, "trivialized interface is the identity"
    return TrivializeResult(reset.checked, reset.iso, classes, values, relab, analysis)


# -- the collapsing strategy ---------------------------------------------------


def residual_thread(
    analysis: ThreadAnalysis,
    maps,
    types: ResidualTypes,
    new_analysis: ThreadAnalysis,
    tid: int,
) -> Optional[int]:
    """The thread of the reduct containing the residual of a referent edge."""
    ref = analysis.thread(tid).referent
    b = maps.redex
    x_axioms = maps.x_axioms()
    if isinstance(ref, ArgEdge):
        if collapse_position(ref.pos[:-1]) == b:
            return None
        return new_analysis.thread_of(ArgEdge(maps.res[ref.pos]))
    if isinstance(ref, LeftEdge):
        if ref.pos in x_axioms:
            return None
        return new_analysis.thread_of(LeftEdge(maps.res[ref.pos], ref.var, ref.inner))
    if ref.pos in x_axioms:
        new_pos = maps.qres[ref.pos]
        new_inner = types.iso(ref.pos).mapping[ref.inner]
        return new_analysis.thread_of(RightEdge(new_pos, new_inner))
    return new_analysis.thread_of(RightEdge(maps.res[ref.pos], ref.inner))


@dataclass
class StrategyRun:
    fired: list[Position]
    final: OperableDerivation
    final_analysis: ThreadAnalysis
    left: Optional[int]
    right: Optional[int]


def run_collapsing_strategy(op: OperableDerivation, arc: ConsumptionArc) -> StrategyRun:
    """Fire the redex tower under a negative left-consumption until the two
    arc threads collapse into one (or both residuals disappear together)."""
    if arc.left_polarity != NEG:
        raise ValueError("the collapsing strategy needs a negative left arc")
    analysis = ThreadAnalysis(op)
    fired: list[Position] = []
    while True:
        a = arc.pos
        ref = analysis.thread(arc.left).referent
        alpha0 = ref.pos
        y = ref.var if isinstance(ref, LeftEdge) else _var_at(analysis.checked, alpha0)
        alpha = _binder_of(analysis.checked, alpha0, y)
        assert alpha is not None and len(alpha) > len(a)
        if len(alpha) - len(a) == 1:
            b = collapse_position(a)
        else:
            b = collapse_position(_deepest_app_prefix(analysis.checked, alpha, a))
        new_op, maps, types = reduce_operable(op, b)
        new_analysis = ThreadAnalysis(new_op)
        fired.append(b)
        left = residual_thread(analysis, maps, types, new_analysis, arc.left)
        right = residual_thread(analysis, maps, types, new_analysis, arc.right)
        if b == collapse_position(a):
            return StrategyRun(fired, new_op, new_analysis, left, right)
        assert left is not None and right is not None
        next_arc = [
            candidate
            for candidate in new_analysis.consumption()
            if candidate.left == left and candidate.pos == maps.res[a]
        ]
        assert len(next_arc) == 1 and next_arc[0].left_polarity == NEG
        op, analysis, arc = new_op, new_analysis, next_arc[0]


def collapsing_strategy(op: OperableDerivation, arc: ConsumptionArc) -> list[Position]:
    """The sequence of redex positions that collapses the arc's two threads."""
    return run_collapsing_strategy(op, arc).fired


def _var_at(checked: CheckedDerivation, a: Position) -> str:
    subj = subterm_at(checked.term, a)
    assert isinstance(subj, Var)
    return subj.name


def _binder_of(checked: CheckedDerivation, a: Position, y: str) -> Optional[Position]:
    for i in range(len(a) - 1, -1, -1):
        prefix = a[:i]
        subj = subterm_at(checked.term, prefix)
        if isinstance(subj, Abs) and subj.binder == y:
            return prefix
    return None


def _deepest_app_prefix(checked: CheckedDerivation, alpha: Position, a: Position) -> Position:
    for i in range(len(alpha) - 1, len(a), -1):
        prefix = alpha[:i]
        if isinstance(checked.node(prefix), AppNode):
            assert isinstance(checked.node(prefix + (1,)), AbsNode)
            return prefix
    raise AssertionError("a tower of height > 1 contains an inner redex")

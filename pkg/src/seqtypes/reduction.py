"""Subject reduction for S, S_h and R derivations, and reduction choices.

Firing a redex inside a rigid derivation replaces each axiom of the redex
variable by one argument subderivation.  In system S the pairing is forced
(axiom track = argument track); in S_h it is a root isomorphism chosen per
derivation node over the redex, and an interface (a full sequence-type
isomorphism) additionally determines how every inner position moves, which
is what residual interfaces and built-in choice sequences need.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .positions import (
    EPS,
    Position,
    Track,
    collapse_position,
    format_position,
    is_prefix,
)
from .stypes import (
    RArrow,
    RAtom,
    RType,
    SArrow,
    SAtom,
    SType,
    TypeIso,
    check_type_iso,
    collapse_type,
    enumerate_type_isos,
    equiv,
    identity_iso,
    rarrow,
    rkey,
    seq,
    type_support,
)
from .terms import Abs, App, Term, Var, beta_reduce_at, subterm_at
from .derivations import (
    AbsNode,
    AppNode,
    AxNode,
    CheckedDerivation,
    Derivation,
    FLAVOR_S,
    FLAVOR_SH,
    Node,
    RAbsD,
    RAppD,
    RAxD,
    RDerivation,
    RNode,
    RPath,
    check_R,
    check_derivation,
    collapse_with_paths,
    rapp,
)


class ReductionError(ValueError):
    pass


class ChoiceError(ReductionError):
    pass


# -- interfaces ---------------------------------------------------------------


def interfaces_at(checked: CheckedDerivation, a: Position) -> list[TypeIso]:
    """All interfaces at an application node, lexicographically ordered."""
    return enumerate_type_isos(checked.left_seq(a), checked.right_seq(a))


def root_interfaces_at(checked: CheckedDerivation, a: Position) -> list[dict[Track, Track]]:
    """All root interfaces at an application node."""
    left, right = checked.left_seq(a), checked.right_seq(a)
    groups_l: dict[tuple, list[Track]] = {}
    groups_r: dict[tuple, list[Track]] = {}
    for k, s in left.items():
        groups_l.setdefault(rkey(collapse_type(s)), []).append(k)
    for k, s in right.items():
        groups_r.setdefault(rkey(collapse_type(s)), []).append(k)
    if set(groups_l) != set(groups_r):
        return []
    out: list[dict[Track, Track]] = [{}]
    for key in sorted(groups_l):
        xs, ys = sorted(groups_l[key]), groups_r[key]
        if len(xs) != len(ys):
            return []
        extended = []
        for perm in itertools.permutations(sorted(ys)):
            for base in out:
                extended.append({**base, **dict(zip(xs, perm))})
        out = extended
    return sorted(out, key=lambda rho: tuple(sorted(rho.items())))


def default_interface(checked: CheckedDerivation, a: Position) -> TypeIso:
    return interfaces_at(checked, a)[0]


def extend_root_interface(
    checked: CheckedDerivation, a: Position, rho: dict[Track, Track]
) -> TypeIso:
    """Lexicographically least interface extending the given root mapping."""
    left, right = checked.left_seq(a), checked.right_seq(a)
    mapping: dict[Position, Position] = {}
    for k, s in left.items():
        k2 = rho[k]
        isos = enumerate_type_isos(s, right.get(k2))
        if not isos:
            raise ChoiceError(f"root mapping {k} -> {k2} at {format_position(a)} not extendable")
        for c, c2 in isos[0].mapping.items():
            mapping[(k,) + c] = (k2,) + c2
    return TypeIso(mapping)


@dataclass
class OperableDerivation:
    """A hybrid derivation endowed with a total interface."""

    checked: CheckedDerivation
    interface: dict[Position, TypeIso]

    def __post_init__(self) -> None:
        apps = set(self.checked.app_positions())
        if set(self.interface) != apps:
            raise ValueError("the interface must cover exactly the application nodes")
        for a, iso in self.interface.items():
            if not check_type_iso(self.checked.left_seq(a), self.checked.right_seq(a), iso):
                raise ValueError(f"invalid interface at {format_position(a)}")


def make_operable(
    checked: CheckedDerivation, interface: Optional[dict[Position, TypeIso]] = None
) -> OperableDerivation:
    full = dict(interface or {})
    for a in checked.app_positions():
        if a not in full:
            full[a] = default_interface(checked, a)
    return OperableDerivation(checked, full)


@dataclass
class ReductionChoice:
    """A redex position plus one root interface per derivation node over it."""

    redex: Position
    per_node: dict[Position, dict[Track, Track]]


# -- residual positions -------------------------------------------------------


@dataclass
class ResidualMaps:
    redex: Position
    nodes_over: list[Position]
    rho: dict[Position, dict[Track, Track]]
    ax_pos: dict[Position, dict[Track, Position]]  # node over b -> axiom track -> position
    res: dict[Position, Position]
    qres: dict[Position, Position]

    def x_axioms(self) -> set[Position]:
        return {p for by_track in self.ax_pos.values() for p in by_track.values()}


def _nodes_over(checked: CheckedDerivation, b: Position) -> list[Position]:
    return sorted(
        a
        for a in checked.support()
        if collapse_position(a) == b and isinstance(checked.node(a), AppNode)
    )


def residual_maps(
    checked: CheckedDerivation, b: Position, rho_per_node: dict[Position, dict[Track, Track]]
) -> ResidualMaps:
    subj = subterm_at(checked.term, b)
    if not (isinstance(subj, App) and isinstance(subj.left, Abs)):
        raise ReductionError(f"no redex at {format_position(b)}")
    x = subj.left.binder
    nodes_over = _nodes_over(checked, b)
    rho: dict[Position, dict[Track, Track]] = {}
    ax_pos: dict[Position, dict[Track, Position]] = {}
    for a in nodes_over:
        node = checked.node(a)
        assert isinstance(node, AppNode)
        tr_left = set(checked.left_seq(a).tracks())
        axioms = checked.axioms_above(a + (1, 0), x)
        by_track = {checked.axiom_track(p): p for p in axioms}
        assert set(by_track) == tr_left, "quantitativity ties axiom tracks to L(a)"
        rho_a = rho_per_node.get(a)
        if rho_a is None:
            raise ChoiceError(f"missing root interface at {format_position(a)}")
        if set(rho_a) != tr_left or set(rho_a.values()) != set(node.arg_tracks):
            raise ChoiceError(f"root interface at {format_position(a)} is not a bijection")
        if len(set(rho_a.values())) != len(rho_a):
            raise ChoiceError(f"root interface at {format_position(a)} is not injective")
        for k, k2 in rho_a.items():
            if not equiv(checked.left_seq(a).get(k), checked.right_seq(a).get(k2)):
                raise ChoiceError(
                    f"root interface {k} -> {k2} at {format_position(a)} mismatches types"
                )
        rho[a] = dict(rho_a)
        ax_pos[a] = by_track
    res: dict[Position, Position] = {}
    qres: dict[Position, Position] = {}
    x_axioms = {p for by_track in ax_pos.values() for p in by_track.values()}
    for alpha in checked.support():
        a = next((a for a in nodes_over if is_prefix(a, alpha)), None)
        if a is None:
            res[alpha] = alpha
            qres[alpha] = alpha
            continue
        node = checked.node(a)
        assert isinstance(node, AppNode)
        if alpha == a:
            qres[alpha] = a
            continue
        if alpha == a + (1,):
            continue
        k = alpha[len(a)]
        if k == 1:
            # inside the redex body (after a.1.0)
            rel = alpha[len(a) + 2 :]
            if alpha in x_axioms:
                qres[alpha] = a + rel
            else:
                res[alpha] = a + rel
                qres[alpha] = a + rel
        else:
            # inside an argument subderivation on track k
            k_left = next(kl for kl, kr in rho[a].items() if kr == k)
            rel_ax = ax_pos[a][k_left][len(a) + 2 :]
            res[alpha] = a + rel_ax + alpha[len(a) + 1 :]
            qres[alpha] = res[alpha]
    return ResidualMaps(b, nodes_over, rho, ax_pos, res, qres)


def residual_derivation(
    checked: CheckedDerivation,
    b: Position,
    rho_per_node: dict[Position, dict[Track, Track]],
) -> tuple[Derivation, ResidualMaps]:
    maps = residual_maps(checked, b, rho_per_node)
    new_term = beta_reduce_at(checked.term, b)
    new_nodes: dict[Position, Node] = {}
    for alpha, node in checked.nodes.items():
        target = maps.res.get(alpha)
        if target is not None:
            new_nodes[target] = node
    return Derivation(new_term, checked.flavor, new_nodes), maps


def identity_choice(checked: CheckedDerivation, b: Position) -> dict[Position, dict[Track, Track]]:
    out = {}
    for a in _nodes_over(checked, b):
        tracks = checked.left_seq(a).tracks()
        out[a] = {k: k for k in tracks}
    return out


def reduce_S(checked: CheckedDerivation, b: Position) -> CheckedDerivation:
    """Deterministic subject reduction; the concluding judgment is unchanged."""
    if checked.flavor != FLAVOR_S:
        raise ReductionError("reduce_S expects a flavor-S derivation")
    if not _nodes_over(checked, b):
        return _reduce_untyped(checked, b)
    deriv, _ = residual_derivation(checked, b, identity_choice(checked, b))
    return check_derivation(deriv)


def reduce_Sh(
    checked: CheckedDerivation, b: Position, choice: ReductionChoice
) -> CheckedDerivation:
    if choice.redex != b:
        raise ChoiceError("choice addresses a different redex")
    if not _nodes_over(checked, b):
        return _reduce_untyped(checked, b)
    deriv, _ = residual_derivation(checked, b, choice.per_node)
    deriv = Derivation(deriv.term, FLAVOR_SH, deriv.nodes)
    return check_derivation(deriv)


def _reduce_untyped(checked: CheckedDerivation, b: Position) -> CheckedDerivation:
    subj = subterm_at(checked.term, b)
    if not (isinstance(subj, App) and isinstance(subj.left, Abs)):
        raise ReductionError(f"no redex at {format_position(b)}")
    new_term = beta_reduce_at(checked.term, b)
    return check_derivation(Derivation(new_term, checked.flavor, dict(checked.nodes)))


# -- residual type isomorphisms ----------------------------------------------


class ResidualTypes:
    """Type isomorphisms T(alpha) -> T'(QRes(alpha)) after firing a redex.

    Requires a full interface at every node over the redex; other types are
    affected only when their subtree contains an axiom of the redex variable.
    """

    def __init__(
        self,
        checked: CheckedDerivation,
        maps: ResidualMaps,
        interfaces_at_b: dict[Position, TypeIso],
    ) -> None:
        self.checked = checked
        self.maps = maps
        self.interfaces = interfaces_at_b
        self._memo: dict[Position, TypeIso] = {}
        self._affected: set[Position] = set()
        for ax in maps.x_axioms():
            for i in range(len(ax) + 1):
                self._affected.add(ax[:i])
        self._nodes_over = set(maps.nodes_over)
        self._axiom_node: dict[Position, Position] = {}
        for a, by_track in maps.ax_pos.items():
            for k, p in by_track.items():
                self._axiom_node[p] = a

    def iso(self, alpha: Position) -> TypeIso:
        if alpha in self._memo:
            return self._memo[alpha]
        result = self._compute(alpha)
        self._memo[alpha] = result
        return result

    def _compute(self, alpha: Position) -> TypeIso:
        checked = self.checked
        if alpha not in self._affected:
            return identity_iso(checked.type_at(alpha))
        if alpha in self._axiom_node:
            a = self._axiom_node[alpha]
            node = checked.node(alpha)
            assert isinstance(node, AxNode)
            k_left = node.track
            phi = self.interfaces[a]
            sup, _ = type_support(checked.type_at(alpha))
            return TypeIso({c: phi.mapping[(k_left,) + c][1:] for c in sup.positions})
        if alpha in self._nodes_over:
            return self.iso(alpha + (1, 0))
        node = checked.node(alpha)
        if isinstance(node, AbsNode):
            inner = self.iso(alpha + (0,))
            arrow = checked.type_at(alpha)
            assert isinstance(arrow, SArrow)
            src_sup, _ = type_support(arrow.source)
            mapping: dict[Position, Position] = {EPS: EPS}
            for c in src_sup.positions:
                mapping[c] = c
            for c, c2 in inner.mapping.items():
                mapping[(1,) + c] = (1,) + c2
            return TypeIso(mapping)
        if isinstance(node, AppNode):
            inner = self.iso(alpha + (1,))
            sup, _ = type_support(checked.type_at(alpha))
            return TypeIso({c: inner.mapping[(1,) + c][1:] for c in sup.positions})
        raise AssertionError("variable nodes other than redex axioms are unaffected")

    def res_left(self, alpha: Position) -> TypeIso:
        """L(alpha) -> L'(alpha') for an application node not over the redex."""
        psi = self.iso(alpha + (1,))
        sup, _ = type_support(self.checked.left_seq(alpha))
        return TypeIso({c: psi.mapping[c] for c in sup.positions})

    def res_right(self, alpha: Position) -> TypeIso:
        node = self.checked.node(alpha)
        assert isinstance(node, AppNode)
        mapping: dict[Position, Position] = {}
        for k in node.arg_tracks:
            inner = self.iso(alpha + (k,))
            for c, c2 in inner.mapping.items():
                mapping[(k,) + c] = (k,) + c2
        return TypeIso(mapping)


def reduce_operable(
    op: OperableDerivation, b: Position
) -> tuple[OperableDerivation, ResidualMaps, ResidualTypes]:
    """Fire a redex using the derivation's own interface.

    The reduct carries the residual interface, so iterated reduction is
    fully deterministic.
    """
    checked = op.checked
    if not _nodes_over(checked, b):
        reduced = _reduce_untyped(checked, b)
        new_interface = {a: op.interface[a] for a in reduced.app_positions()}
        maps = ResidualMaps(b, [], {}, {}, {a: a for a in checked.support()}, {})
        types = ResidualTypes(checked, maps, {})
        return OperableDerivation(reduced, new_interface), maps, types
    rho = {a: _root_of_iso(op.interface[a]) for a in _nodes_over(checked, b)}
    deriv, maps = residual_derivation(checked, b, rho)
    deriv = Derivation(deriv.term, FLAVOR_SH, deriv.nodes)
    new_checked = check_derivation(deriv)
    types = ResidualTypes(checked, maps, {a: op.interface[a] for a in maps.nodes_over})
    new_interface: dict[Position, TypeIso] = {}
    inverse_res = {v: k for k, v in maps.res.items()}
    for a2 in new_checked.app_positions():
        alpha = inverse_res[a2]
        res_l = types.res_left(alpha)
        res_r = types.res_right(alpha)
        phi = op.interface[alpha]
        new_interface[a2] = res_r.compose(phi).compose(res_l.inverse())
    return OperableDerivation(new_checked, new_interface), maps, types


def _root_of_iso(iso: TypeIso) -> dict[Track, Track]:
    return {c[0]: c2[0] for c, c2 in iso.mapping.items() if len(c) == 1}


# -- reduction choices on the multiset side ----------------------------------


@dataclass
class RChoice:
    """Per redex node: which argument premise replaces which axiom."""

    redex: Position
    assignments: dict[RPath, dict[RPath, int]]


def _rtype_of_nodes(rd: RDerivation) -> dict[RPath, RType]:
    check_R(rd)
    types: dict[RPath, RType] = {}

    def go(node: RNode, subj: Term, path: RPath, env: dict[str, list[RType]]) -> RType:
        # env is unused for types; structure mirrors check_R
        if isinstance(node, RAxD):
            types[path] = node.rtype
            return node.rtype
        if isinstance(node, RAbsD):
            inner = go(node.child, subj.body, path + ((0, 0),), env)
            sources = _x_axiom_types(node.child, subj.body)
            types[path] = rarrow(sources.get(subj.binder, []), inner)
            return types[path]
        assert isinstance(node, RAppD) and isinstance(subj, App)
        left = go(node.left, subj.left, path + ((1, 0),), env)
        for j, arg in enumerate(node.args):
            go(arg, subj.right, path + ((2, j),), env)
        assert isinstance(left, RArrow)
        types[path] = left.target
        return left.target

    go(rd.root, rd.term, (), {})
    return types


def _x_axiom_types(node: RNode, subj: Term) -> dict[str, list[RType]]:
    out: dict[str, list[RType]] = {}

    def go(n: RNode, s: Term, bound: frozenset[str]) -> None:
        if isinstance(n, RAxD):
            assert isinstance(s, Var)
            if s.name not in bound:
                out.setdefault(s.name, []).append(n.rtype)
            return
        if isinstance(n, RAbsD):
            assert isinstance(s, Abs)
            go(n.child, s.body, bound | {s.binder})
            return
        assert isinstance(n, RAppD) and isinstance(s, App)
        go(n.left, s.left, bound)
        for arg in n.args:
            go(arg, s.right, bound)

    go(node, subj, frozenset())
    return out


def _redex_rnodes(rd: RDerivation, b: Position) -> list[tuple[RPath, RAppD, Term]]:
    found: list[tuple[RPath, RAppD, Term]] = []

    def go(node: RNode, subj: Term, tpos: Position, path: RPath) -> None:
        if isinstance(node, RAxD):
            return
        if isinstance(node, RAbsD):
            go(node.child, subj.body, tpos + (0,), path + ((0, 0),))
            return
        assert isinstance(node, RAppD) and isinstance(subj, App)
        if tpos == b:
            found.append((path, node, subj))
        go(node.left, subj.left, tpos + (1,), path + ((1, 0),))
        for j, arg in enumerate(node.args):
            go(arg, subj.right, tpos + (2,), path + ((2, j),))

    go(rd.root, rd.term, EPS, ())
    return sorted(found, key=lambda item: item[0])


def _x_axiom_paths(body: RNode, subj: Term, x: str) -> list[RPath]:
    out: list[RPath] = []

    def go(n: RNode, s: Term, path: RPath) -> None:
        if isinstance(n, RAxD):
            if isinstance(s, Var) and s.name == x:
                out.append(path)
            return
        if isinstance(n, RAbsD):
            if s.binder == x:
                return
            go(n.child, s.body, path + ((0, 0),))
            return
        assert isinstance(n, RAppD) and isinstance(s, App)
        go(n.left, s.left, path + ((1, 0),))
        for j, arg in enumerate(n.args):
            go(arg, s.right, path + ((2, j),))

    go(body, subj, ())
    return sorted(out)


def enumerate_r_choices(rd: RDerivation, b: Position) -> list[RChoice]:
    """All type-respecting redex choices, deterministically ordered."""
    subj = subterm_at(rd.term, b)
    if not (isinstance(subj, App) and isinstance(subj.left, Abs)):
        raise ReductionError(f"no redex at {format_position(b)}")
    types = _rtype_of_nodes(rd)
    per_node_options: list[tuple[RPath, list[dict[RPath, int]]]] = []
    for path, node, node_subj in _redex_rnodes(rd, b):
        assert isinstance(node.left, RAbsD)
        x = node_subj.left.binder
        ax_paths = _x_axiom_paths(node.left.child, node_subj.left.body, x)
        body_prefix = path + ((1, 0), (0, 0))
        groups_ax: dict[tuple, list[RPath]] = {}
        for p in ax_paths:
            groups_ax.setdefault(rkey(types[body_prefix + p]), []).append(p)
        groups_arg: dict[tuple, list[int]] = {}
        for j in range(len(node.args)):
            groups_arg.setdefault(rkey(types[path + ((2, j),)]), []).append(j)
        if set(groups_ax) != set(groups_arg):
            return []
        options: list[dict[RPath, int]] = [{}]
        for key in sorted(groups_ax):
            ps, js = sorted(groups_ax[key]), sorted(groups_arg[key])
            if len(ps) != len(js):
                return []
            extended = []
            for perm in itertools.permutations(js):
                for base in options:
                    extended.append({**base, **dict(zip(ps, perm))})
            options = extended
        per_node_options.append((path, options))
    out: list[RChoice] = []
    for combo in itertools.product(*(opts for _, opts in per_node_options)):
        out.append(
            RChoice(b, {path: dict(choice) for (path, _), choice in zip(per_node_options, combo)})
        )
    return out


def reduce_R(rd: RDerivation, b: Position, choice: RChoice) -> RDerivation:
    """Fire the redex, substituting argument premises per the choice."""
    if choice.redex != b:
        raise ChoiceError("choice addresses a different redex")
    subj = subterm_at(rd.term, b)
    if not (isinstance(subj, App) and isinstance(subj.left, Abs)):
        raise ReductionError(f"no redex at {format_position(b)}")
    types = _rtype_of_nodes(rd)
    redex_nodes = {path for path, _, _ in _redex_rnodes(rd, b)}
    if set(choice.assignments) != redex_nodes:
        raise ChoiceError("choice does not cover exactly the redex nodes")

    def go(node: RNode, s: Term, tpos: Position, path: RPath) -> RNode:
        if isinstance(node, RAxD):
            return node
        if isinstance(node, RAbsD):
            return RAbsD(go(node.child, s.body, tpos + (0,), path + ((0, 0),)))
        assert isinstance(node, RAppD) and isinstance(s, App)
        left = go(node.left, s.left, tpos + (1,), path + ((1, 0),))
        args = tuple(
            go(arg, s.right, tpos + (2,), path + ((2, j),)) for j, arg in enumerate(node.args)
        )
        if tpos != b:
            return rapp(left, args)
        assignment = choice.assignments[path]
        assert isinstance(left, RAbsD) and isinstance(s.left, Abs)
        x = s.left.binder
        ax_paths = _x_axiom_paths(left.child, s.left.body, x)
        if set(assignment) != set(ax_paths):
            raise ChoiceError(f"choice at {path} does not cover the axioms of {x!r}")
        if sorted(assignment.values()) != list(range(len(args))):
            raise ChoiceError(f"choice at {path} is not a bijection onto the premises")
        for p, j in assignment.items():
            ax_type = types[path + ((1, 0), (0, 0)) + p]
            arg_type = types[path + ((2, j),)]
            if ax_type != arg_type:
                raise ChoiceError(f"type mismatch for axiom {p} and premise {j}")
        return _substitute_axioms(left.child, s.left.body, x, assignment, args)

    new_root = go(rd.root, rd.term, EPS, ())
    return RDerivation(beta_reduce_at(rd.term, b), new_root)


def _substitute_axioms(
    body: RNode, subj: Term, x: str, assignment: dict[RPath, int], args: tuple[RNode, ...]
) -> RNode:
    def go(n: RNode, s: Term, path: RPath) -> RNode:
        if isinstance(n, RAxD):
            if isinstance(s, Var) and s.name == x:
                return args[assignment[path]]
            return n
        if isinstance(n, RAbsD):
            if s.binder == x:
                return n
            return RAbsD(go(n.child, s.body, path + ((0, 0),)))
        assert isinstance(n, RAppD) and isinstance(s, App)
        return rapp(
            go(n.left, s.left, path + ((1, 0),)),
            tuple(go(arg, s.right, path + ((2, j),)) for j, arg in enumerate(n.args)),
        )

    return go(body, subj, ())


def collapse_choice(
    checked: CheckedDerivation, b: Position, rho_per_node: dict[Position, dict[Track, Track]]
) -> RChoice:
    """The multiset-side choice realized by a rigid root-interface choice."""
    _, paths = collapse_with_paths(checked)
    maps = residual_maps(checked, b, rho_per_node)
    assignments: dict[RPath, dict[RPath, int]] = {}
    for a in maps.nodes_over:
        rpath = paths[a]
        body_prefix = rpath + ((1, 0), (0, 0))
        assignment: dict[RPath, int] = {}
        for k_left, k_right in maps.rho[a].items():
            ax_rel = paths[maps.ax_pos[a][k_left]][len(body_prefix) :]
            step = paths[a + (k_right,)][-1]
            assert step[0] == 2
            assignment[ax_rel] = step[1]
        assignments[rpath] = assignment
    return RChoice(b, assignments)


def realize_r_choice(
    checked: CheckedDerivation, b: Position, rchoice: RChoice
) -> dict[Position, dict[Track, Track]]:
    """Root interfaces on the rigid side realizing a multiset-side choice."""
    _, paths = collapse_with_paths(checked)
    rho_per_node: dict[Position, dict[Track, Track]] = {}
    subj = subterm_at(checked.term, b)
    if not (isinstance(subj, App) and isinstance(subj.left, Abs)):
        raise ReductionError(f"no redex at {format_position(b)}")
    x = subj.left.binder
    for a in _nodes_over(checked, b):
        rpath = paths[a]
        if rpath not in rchoice.assignments:
            raise ChoiceError(f"choice missing the redex node at {format_position(a)}")
        assignment = rchoice.assignments[rpath]
        body_prefix = rpath + ((1, 0), (0, 0))
        node = checked.node(a)
        assert isinstance(node, AppNode)
        arg_by_index = {}
        for k in node.arg_tracks:
            step = paths[a + (k,)][-1]
            arg_by_index[step[1]] = k
        rho: dict[Track, Track] = {}
        for p in checked.axioms_above(a + (1, 0), x):
            ax_rel = paths[p][len(body_prefix) :]
            if ax_rel not in assignment:
                raise ChoiceError(f"choice missing axiom {ax_rel} at {format_position(a)}")
            rho[checked.axiom_track(p)] = arg_by_index[assignment[ax_rel]]
        rho_per_node[a] = rho
    return rho_per_node


# -- hybrid representatives ---------------------------------------------------


def hybridize(rd: RDerivation) -> Derivation:
    """A hybrid derivation collapsing on the given multiset derivation."""
    check_R(rd)
    counter = itertools.count(2)

    def rigidify(rt: RType) -> SType:
        if isinstance(rt, RAtom):
            return SAtom(rt.name)
        entries = {i + 2: rigidify(s) for i, s in enumerate(rt.source)}
        return SArrow(seq(entries), rigidify(rt.target))

    nodes: dict[Position, Node] = {}

    def go(node: RNode, subj: Term, prefix: Position) -> tuple[SType, dict[str, dict[Track, SType]]]:
        if isinstance(node, RAxD):
            assert isinstance(subj, Var)
            stype = rigidify(node.rtype)
            track = next(counter)
            nodes[prefix] = AxNode(track, stype)
            return stype, {subj.name: {track: stype}}
        if isinstance(node, RAbsD):
            assert isinstance(subj, Abs)
            nodes[prefix] = AbsNode()
            inner, ctx = go(node.child, subj.body, prefix + (0,))
            source = seq(ctx.pop(subj.binder, {}))
            return SArrow(source, inner), ctx
        assert isinstance(node, RAppD) and isinstance(subj, App)
        left_type, ctx = go(node.left, subj.left, prefix + (1,))
        assert isinstance(left_type, SArrow)
        tracks: set[Track] = set()
        for j, arg in enumerate(node.args):
            track = j + 2
            tracks.add(track)
            _, arg_ctx = go(arg, subj.right, prefix + (track,))
            for name, entries in arg_ctx.items():
                ctx.setdefault(name, {}).update(entries)
        nodes[prefix] = AppNode(frozenset(tracks))
        return left_type.target, ctx

    go(rd.root, rd.term, EPS)
    return Derivation(rd.term, FLAVOR_SH, nodes)


# -- building choice sequences into one interface ------------------------------


def build_operable_from_choices(
    rd: RDerivation,
    base: OperableDerivation | CheckedDerivation,
    choices: list[tuple[Position, RChoice]],
) -> OperableDerivation:
    """Build a total interface on the base derivation encoding the choices.

    Reducing the result step by step with `reduce_operable` at the given
    redex positions collapses, at every step, onto the multiset derivations
    produced by `reduce_R` with the given choices.
    """
    from .derivations import collapse_derivation

    checked = base.checked if isinstance(base, OperableDerivation) else base
    if collapse_derivation(checked) != rd:
        raise ChoiceError("the base derivation does not collapse on the given derivation")
    alive: dict[Position, Position] = {a: a for a in checked.app_positions()}
    acc_left: dict[Position, TypeIso] = {
        a: identity_iso(checked.left_seq(a)) for a in alive
    }
    acc_right: dict[Position, TypeIso] = {
        a: identity_iso(checked.right_seq(a)) for a in alive
    }
    pinned: dict[Position, TypeIso] = {}
    current = checked
    current_rd = rd
    for b_i, rchoice in choices:
        if collapse_derivation(current) != current_rd:
            raise ChoiceError("choice sequence inconsistent with the collapse")
        rho = realize_r_choice(current, b_i, rchoice)
        interfaces_at_b = {a: extend_root_interface(current, a, rho[a]) for a in rho}
        for a0, a_i in list(alive.items()):
            if a_i in interfaces_at_b:
                pinned[a0] = (
                    acc_right[a0].inverse().compose(interfaces_at_b[a_i]).compose(acc_left[a0])
                )
                del alive[a0]
        deriv, maps = residual_derivation(current, b_i, rho)
        deriv = Derivation(deriv.term, FLAVOR_SH, deriv.nodes)
        new_checked = check_derivation(deriv)
        types = ResidualTypes(current, maps, interfaces_at_b)
        for a0, a_i in list(alive.items()):
            acc_left[a0] = types.res_left(a_i).compose(acc_left[a0])
            acc_right[a0] = types.res_right(a_i).compose(acc_right[a0])
            alive[a0] = maps.res[a_i]
        current = new_checked
        current_rd = reduce_R(current_rd, b_i, rchoice)
    interface = dict(pinned)
    for a0 in checked.app_positions():
        if a0 not in interface:
            interface[a0] = default_interface(checked, a0)
    return OperableDerivation(checked, interface)

"""Seeded corpora: random normal forms, expansions, and redex towers.

Derivations of terms with redexes are produced by subject expansion: pick
occurrences of a common subterm, abstract them behind a fresh variable and
re-apply.  On the derivation side each chosen occurrence's subderivations
become argument premises whose tracks match the new axiom tracks exactly,
so the created application node satisfies the syntactic rule and firing it
recovers the original derivation.
"""

from __future__ import annotations

import random
from typing import Iterable, Optional

from .positions import EPS, Position, collapse_position
from .stypes import SArrow, SAtom, SType, seq as mkseq
from .terms import (
    Abs,
    App,
    Term,
    Var,
    binders_above,
    free_vars,
    parse_term,
    print_term,
    subterm_at,
    support,
)
from .derivations import (
    AbsNode,
    AppNode,
    AxNode,
    CheckedDerivation,
    Derivation,
    GenBudget,
    Node,
    check_derivation,
    generate_normal_form_derivations,
)
from .reduction import OperableDerivation, interfaces_at

FREE_NAMES = ("u", "v", "w", "p", "q")
BINDER_NAMES = ("x", "y", "z", "s", "t")


def random_normal_term(rng: random.Random, max_size: int) -> Term:
    """A random beta-normal term with at most `max_size` applications/abstractions."""

    counter = [0]

    def go(budget: int, scope: tuple[str, ...]) -> Term:
        n_binders = rng.randint(0, min(2, budget))
        binders = []
        for _ in range(n_binders):
            name = BINDER_NAMES[counter[0] % len(BINDER_NAMES)] + (
                str(counter[0] // len(BINDER_NAMES)) if counter[0] >= len(BINDER_NAMES) else ""
            )
            counter[0] += 1
            binders.append(name)
        inner_scope = scope + tuple(binders)
        budget -= n_binders
        head = rng.choice(inner_scope + FREE_NAMES)
        n_args = rng.randint(0, min(2, budget))
        body: Term = Var(head)
        for _ in range(n_args):
            share = max(0, (budget - n_args) // max(1, n_args))
            body = App(body, go(rng.randint(0, share), inner_scope))
        for name in reversed(binders):
            body = Abs(name, body)
        return body

    return go(max_size, ())


def random_derivation(
    rng: random.Random, term: Term, width: int = 2, pool: int = 8
) -> CheckedDerivation:
    options = generate_normal_form_derivations(term, GenBudget(width=width, limit=pool))
    return check_derivation(rng.choice(options))


# -- subject expansion ---------------------------------------------------------


class ExpansionError(ValueError):
    pass


def expandable_groups(term: Term) -> list[list[Position]]:
    """Occurrences of a common subterm whose free variables are free there."""
    groups: dict[Term, list[Position]] = {}
    for o in support(term):
        s = subterm_at(term, o)
        if free_vars(s) & binders_above(term, o):
            continue
        groups.setdefault(s, []).append(o)
    return [sorted(v) for _, v in sorted(groups.items(), key=lambda kv: print_term(kv[0]))]


def expand_root(
    checked: CheckedDerivation, occurrences: list[Position], var: str
) -> Derivation:
    """Subject expansion at the root: produce a derivation of (\\var. r) s.

    `occurrences` address pairwise equal subterms (the new argument s);
    firing the created redex gives back the input derivation's judgment.
    """
    term = checked.term
    if not occurrences:
        raise ExpansionError("need at least one occurrence to abstract")
    s = subterm_at(term, occurrences[0])
    for o in occurrences:
        if subterm_at(term, o) != s:
            raise ExpansionError("occurrences address different subterms")
        if free_vars(s) & binders_above(term, o):
            raise ExpansionError("the subterm is not free at one occurrence")
    if var in free_vars(term) or _name_used(term, var):
        raise ExpansionError(f"{var!r} is not fresh")

    def replace(u: Term, at: Position) -> Term:
        if at in occurrences:
            return Var(var)
        if isinstance(u, Abs):
            return Abs(u.binder, replace(u.body, at + (0,)))
        if isinstance(u, App):
            return App(replace(u.left, at + (1,)), replace(u.right, at + (2,)))
        return u

    r = replace(term, EPS)
    new_term = App(Abs(var, r), s)
    ripped = sorted(
        alpha
        for alpha in checked.support()
        if any(collapse_position(alpha) == o for o in occurrences)
    )
    tracks = {alpha: i + 2 for i, alpha in enumerate(ripped)}
    new_nodes: dict[Position, Node] = {
        EPS: AppNode(frozenset(tracks.values())),
        (1,): AbsNode(),
    }
    for alpha, node in checked.nodes.items():
        root = next((rp for rp in ripped if alpha[: len(rp)] == rp), None)
        if root is None:
            new_nodes[(1, 0) + alpha] = node
        else:
            new_nodes[(tracks[root],) + alpha[len(root) :]] = node
    for alpha in ripped:
        new_nodes[(1, 0) + alpha] = AxNode(tracks[alpha], checked.type_at(alpha))
    return Derivation(new_term, checked.flavor, new_nodes)


def _name_used(term: Term, name: str) -> bool:
    if isinstance(term, Var):
        return term.name == name
    if isinstance(term, Abs):
        return term.binder == name or _name_used(term.body, name)
    return _name_used(term.left, name) or _name_used(term.right, name)


def expand_random(
    checked: CheckedDerivation, rng: random.Random, fresh_index: int
) -> Optional[CheckedDerivation]:
    groups = expandable_groups(checked.term)
    if not groups:
        return None
    typed_at = {collapse_position(alpha) for alpha in checked.support()}
    multi = []
    for group in groups:
        typed = [o for o in group if o in typed_at]
        if len(typed) >= 2:
            multi.append(typed)
    if multi and rng.random() < 0.7:
        typed = multi[rng.randrange(len(multi))]
        size = rng.randint(2, len(typed))
        occurrences = sorted(rng.sample(typed, size))
    else:
        group = groups[rng.randrange(len(groups))]
        size = rng.randint(1, len(group))
        occurrences = sorted(rng.sample(group, size))
    var = f"e{fresh_index}"
    if _name_used(checked.term, var):
        return None
    deriv = expand_root(checked, occurrences, var)
    return check_derivation(deriv)


def merge_atoms(deriv: Derivation, rng: random.Random, pool: int) -> Derivation:
    """Identify atoms modulo a small pool, creating collapse-equal types.

    A uniform renaming of atoms preserves validity in every flavor; it is
    what makes reduction choices and non-trivial interfaces plentiful.
    """
    names: list[str] = []

    def collect(stype: SType) -> None:
        if isinstance(stype, SAtom):
            if stype.name not in names:
                names.append(stype.name)
        else:
            for _, s in stype.source.items():
                collect(s)
            collect(stype.target)

    for node in deriv.nodes.values():
        if isinstance(node, AxNode):
            collect(node.stype)
    mapping = {name: f"o{rng.randrange(pool) + 1}" for name in sorted(names)}

    def rename(stype: SType) -> SType:
        if isinstance(stype, SAtom):
            return SAtom(mapping[stype.name])
        return SArrow(
            mkseq({k: rename(s) for k, s in stype.source.items()}), rename(stype.target)
        )

    new_nodes: dict[Position, Node] = {}
    for a, node in deriv.nodes.items():
        new_nodes[a] = AxNode(node.track, rename(node.stype)) if isinstance(node, AxNode) else node
    return Derivation(deriv.term, deriv.flavor, new_nodes)


def sr_corpus(seed: int, count: int, size: int = 7, width: int = 2) -> list[CheckedDerivation]:
    """Flavor-S derivations, most typing terms with redexes; deterministic."""
    rng = random.Random(seed)
    out: list[CheckedDerivation] = []
    fresh = 0
    while len(out) < count:
        term = random_normal_term(rng, rng.randint(1, size))
        checked = random_derivation(rng, term, width=width)
        expansions = rng.randint(0, 3)
        for _ in range(expansions):
            fresh += 1
            expanded = expand_random(checked, rng, fresh)
            if expanded is None:
                break
            checked = expanded
        if rng.random() < 0.7:
            merged = merge_atoms(checked.derivation, rng, pool=rng.choice([1, 1, 2]))
            checked = check_derivation(merged)
        out.append(checked)
    return out


# -- redex towers ---------------------------------------------------------------


def make_tower(
    body_deriv: Derivation,
    binder: str,
    height: int,
    spacer_names: Iterable[str] = ("m", "n", "r"),
    argument: str = "v",
) -> CheckedDerivation:
    """((\\z1..zk. \\binder. u) n1 .. nk) v with k = height - 1 untyped spacers.

    The binder's sequence is consumed at the root application; the argument
    copies of v are axioms with exactly the matching types, so the result
    is a valid hybrid (indeed trivial) derivation.
    """
    if height < 1:
        raise ValueError("a tower has height >= 1")
    body = check_derivation(body_deriv)
    k = height - 1
    spacers = list(spacer_names)[:k]
    if len(spacers) < k:
        raise ValueError("not enough spacer names")
    term: Term = body.term
    term = Abs(binder, term)
    for name in spacers:
        term = Abs(name, term)
    for name in reversed(spacers):
        term = App(term, Var(name + "0"))
    term = App(term, Var(argument))
    x_seq = body.conclusion().context.get(binder)
    prefix = (1,) * (k + 1) + (0,) * (k + 1)
    nodes: dict[Position, Node] = {}
    for alpha, node in body.nodes.items():
        nodes[prefix + alpha] = node
    for i in range(k + 1):
        nodes[(1,) * (k + 1) + (0,) * i] = AbsNode()
    for i in range(1, k + 1):
        nodes[(1,) * i] = AppNode(frozenset())
    ax_track = 2 + max([0] + [tr for tr, _ in x_seq.items()])
    arg_tracks = {}
    for tr, stype in x_seq.items():
        arg_tracks[tr] = stype
        nodes[(tr,)] = AxNode(ax_track, stype)
        ax_track += 1
    nodes[EPS] = AppNode(frozenset(arg_tracks))
    return check_derivation(Derivation(term, "Sh", nodes))


def tower_instances(seed: int, count: int) -> list[OperableDerivation]:
    """Operable redex towers of heights 1..3 with varying interfaces."""
    rng = random.Random(seed)
    bodies = [
        "x",
        "x w",
        "x w w",
        "x (w w)",
        "x (x w)",
    ]
    out: list[OperableDerivation] = []
    attempt = 0
    while len(out) < count:
        text = bodies[attempt % len(bodies)]
        height = 1 + (attempt // len(bodies)) % 3
        attempt += 1
        u = parse_term(text)
        options = generate_normal_form_derivations(u, GenBudget(width=2, limit=6))
        body = options[rng.randrange(len(options))]
        if rng.random() < 0.5:
            body = merge_atoms(body, rng, pool=1)
        tower = make_tower(body, "x", height)
        interface = {}
        for a in tower.app_positions():
            choices = interfaces_at(tower, a)
            interface[a] = choices[rng.randrange(len(choices))]
        out.append(OperableDerivation(tower, interface))
    return out

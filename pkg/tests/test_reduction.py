from __future__ import annotations

import pytest

from seqtypes.derivations import (
    AbsNode,
    AppNode,
    AxNode,
    Derivation,
    check_derivation,
    check_R,
    collapse_derivation,
    format_judgment,
    print_type,
)
from seqtypes.positions import EPS
from seqtypes.reduction import (
    ChoiceError,
    ReductionChoice,
    build_operable_from_choices,
    collapse_choice,
    default_interface,
    enumerate_r_choices,
    extend_root_interface,
    hybridize,
    interfaces_at,
    make_operable,
    realize_r_choice,
    reduce_operable,
    reduce_R,
    reduce_S,
    reduce_Sh,
    residual_maps,
    root_interfaces_at,
)
from seqtypes.stypes import SArrow, SAtom, check_type_iso, equiv, seq
from seqtypes.terms import parse_term

from samples import make_two_choice_redex, make_tracked_redex, make_brothers, make_self_app

O = SAtom("o")
A = SAtom("A")


def sequent(checked):
    j = checked.conclusion()
    ctx = ", ".join(f"{x}:{print_type(f)}" for x, f in j.context.entries)
    return (ctx, print_type(j.stype))


def make_identity_redex():
    # (\x. x) y with the argument on track 3
    term = parse_term("(\\x. x) y")
    nodes = {
        EPS: AppNode(frozenset({3})),
        (1,): AbsNode(),
        (1, 0): AxNode(3, O),
        (3,): AxNode(6, O),
    }
    return Derivation(term, "S", nodes)


def test_reduce_S_identity_redex():
    checked = check_derivation(make_identity_redex())
    before = sequent(checked)
    reduced = reduce_S(checked, EPS)
    assert sequent(reduced) == before
    assert reduced.term == parse_term("y")
    assert format_judgment(reduced.conclusion()) == "y:(6:o) |- y : o"


def test_reduce_S_erasing_redex():
    # (\x. y) z with the argument untyped (K = {}) and no axioms of x
    term = parse_term("(\\x. y) z")
    nodes = {
        EPS: AppNode(frozenset()),
        (1,): AbsNode(),
        (1, 0): AxNode(4, O),
    }
    checked = check_derivation(Derivation(term, "S", nodes))
    reduced = reduce_S(checked, EPS)
    assert sequent(reduced) == sequent(checked)
    assert reduced.term == parse_term("y")


def test_reduce_S_untyped_redex():
    # the redex sits in an untyped argument: only the subject changes
    term = parse_term("(\\x. y) ((\\z. z) w)")
    nodes = {
        EPS: AppNode(frozenset()),
        (1,): AbsNode(),
        (1, 0): AxNode(4, O),
    }
    checked = check_derivation(Derivation(term, "S", nodes))
    reduced = reduce_S(checked, (2,))
    assert reduced.term == parse_term("(\\x. y) w")
    assert reduced.nodes == nodes
    assert sequent(reduced) == sequent(checked)


def test_residual_positions_tracked_redex():
    checked = check_derivation(make_tracked_redex())
    rho = {EPS: {2: 8, 7: 5}}
    maps = residual_maps(checked, EPS, rho)
    assert maps.ax_pos[EPS] == {2: (1, 0, 4), 7: (1, 0, 1, 6)}
    # paradigm club: the argument on track 8 replaces the axiom with track 2
    assert maps.res[(8,)] == (4,)
    assert maps.res[(5,)] == (1, 6)
    # paradigm heart: judgments nested in the body lose the prefix 1.0
    assert maps.res[(1, 0, 1, 1)] == (1, 1)
    assert maps.res[(1, 0, 1)] == (1,)
    assert maps.res[(1, 0)] == EPS
    # the redex application, abstraction and variable axioms have no residual
    for dead in (EPS, (1,), (1, 0, 4), (1, 0, 1, 6)):
        assert dead not in maps.res
    assert maps.qres[EPS] == EPS
    assert maps.qres[(1, 0, 4)] == (4,)
    assert maps.qres[(1, 0, 1, 6)] == (1, 6)


def test_reduce_Sh_tracked_redex():
    checked = check_derivation(make_tracked_redex())
    before = sequent(checked)
    choice = ReductionChoice(EPS, {EPS: {2: 8, 7: 5}})
    reduced = reduce_Sh(checked, EPS, choice)
    assert reduced.term == parse_term("(f y) y")
    assert sequent(reduced)[0] == before[0]
    assert equiv(reduced.conclusion().stype, checked.conclusion().stype)


def test_reduce_Sh_brothers():
    checked = check_derivation(make_brothers())
    b = (1, 1)
    for rho in root_interfaces_at(checked, (1, 1)):
        choice = ReductionChoice(b, {(1, 1): rho})
        reduced = reduce_Sh(checked, b, choice)
        assert equiv(reduced.conclusion().stype, checked.conclusion().stype)
        assert reduced.conclusion().context == checked.conclusion().context


def test_interface_counts_brothers():
    checked = check_derivation(make_brothers())
    assert len(interfaces_at(checked, (1,))) == 2
    assert len(interfaces_at(checked, EPS)) == 2
    assert len(interfaces_at(checked, (1, 6))) == 1
    assert interfaces_at(checked, (1, 6))[0].mapping == {}


def test_extend_root_interface():
    checked = check_derivation(make_brothers())
    phi = extend_root_interface(checked, EPS, {8: 3, 9: 5})
    assert phi.mapping == {(8,): (3,), (9,): (5,)}
    assert check_type_iso(checked.left_seq(EPS), checked.right_seq(EPS), phi)


def test_reduce_operable_trivial_matches_reduce_S():
    checked = check_derivation(make_identity_redex())
    op = make_operable(checked)
    reduced_op, _, _ = reduce_operable(op, EPS)
    plain = reduce_S(checked, EPS)
    assert reduced_op.checked.derivation.nodes == plain.derivation.nodes
    assert reduced_op.checked.term == plain.term


def test_residual_interface_is_bijection_onto_reduct_interfaces():
    checked = check_derivation(make_two_choice_redex())
    for phi_eps in interfaces_at(checked, EPS):
        op = make_operable(checked, {EPS: phi_eps})
        reduced_op, maps, types = reduce_operable(op, EPS)
        for alpha in checked.app_positions():
            if alpha == EPS:
                continue
            alpha2 = maps.res[alpha]
            res_l, res_r = types.res_left(alpha), types.res_right(alpha)
            image = {
                res_r.compose(phi).compose(res_l.inverse()).key()
                for phi in interfaces_at(checked, alpha)
            }
            target = {phi.key() for phi in interfaces_at(reduced_op.checked, alpha2)}
            assert image == target


def test_commutation_on_two_choice_redex():
    checked = check_derivation(make_two_choice_redex())
    collapsed = collapse_derivation(checked)
    reducts = set()
    for rho in root_interfaces_at(checked, EPS):
        reduced = reduce_Sh(checked, EPS, ReductionChoice(EPS, {EPS: rho}))
        rchoice = collapse_choice(checked, EPS, {EPS: rho})
        expected = reduce_R(collapsed, EPS, rchoice)
        assert collapse_derivation(reduced) == expected
        reducts.add(expected)
    assert len(reducts) == 2  # the two reduction choices give distinct collapses


def test_enumerate_r_choices_and_six_reducts():
    # three axiom occurrences of x, all typed o, facing three distinct premises
    term = parse_term("(\\x. ((f x) x) x) (g w)")
    d1 = {
        (2,): AppNode(frozenset({4})),
        (2, 1): AxNode(12, SArrow(seq({4: O}), O)),
        (2, 4): AxNode(13, O),
    }
    d2 = {
        (3,): AppNode(frozenset()),
        (3, 1): AxNode(14, SArrow(seq({}), O)),
    }
    d3 = {
        (4,): AppNode(frozenset({4, 5})),
        (4, 1): AxNode(15, SArrow(seq({4: O, 5: O}), O)),
        (4, 4): AxNode(16, O),
        (4, 5): AxNode(17, O),
    }
    nodes = {
        EPS: AppNode(frozenset({2, 3, 4})),
        (1,): AbsNode(),
        (1, 0): AppNode(frozenset({6})),
        (1, 0, 6): AxNode(2, O),
        (1, 0, 1): AppNode(frozenset({7})),
        (1, 0, 1, 7): AxNode(3, O),
        (1, 0, 1, 1): AppNode(frozenset({8})),
        (1, 0, 1, 1, 8): AxNode(4, O),
        (1, 0, 1, 1, 1): AxNode(
            5, SArrow(seq({8: O}), SArrow(seq({7: O}), SArrow(seq({6: O}), A)))
        ),
        **d1,
        **d2,
        **d3,
    }
    checked = check_derivation(Derivation(term, "Sh", nodes))
    collapsed = collapse_derivation(checked)
    choices = enumerate_r_choices(collapsed, EPS)
    assert len(choices) == 6
    reducts = {reduce_R(collapsed, EPS, ch) for ch in choices}
    assert len(reducts) == 6
    for rd in reducts:
        check_R(rd)


def test_reduce_R_rejects_bad_choice():
    checked = check_derivation(make_two_choice_redex())
    collapsed = collapse_derivation(checked)
    good = enumerate_r_choices(collapsed, EPS)[0]
    (path, assignment), = good.assignments.items()
    swapped = {p: (1 - j) for p, j in assignment.items()}
    bad_keys = {p + ((0, 0),): j for p, j in assignment.items()}
    with pytest.raises(ChoiceError):
        reduce_R(collapsed, EPS, type(good)(EPS, {path: bad_keys}))
    # swapping is fine here (types agree); a non-bijection is not
    reduce_R(collapsed, EPS, type(good)(EPS, {path: swapped}))
    not_bijective = dict(assignment)
    not_bijective[next(iter(assignment))] = 5
    with pytest.raises(ChoiceError):
        reduce_R(collapsed, EPS, type(good)(EPS, {path: not_bijective}))


def test_hybridize_round_trip():
    for deriv in (make_self_app(), make_two_choice_redex(), make_brothers()):
        checked = check_derivation(deriv)
        collapsed = collapse_derivation(checked)
        hybrid = hybridize(collapsed)
        rechecked = check_derivation(hybrid)
        assert collapse_derivation(rechecked) == collapsed


def test_hybridize_axiom():
    deriv = Derivation(parse_term("x"), "S", {EPS: AxNode(5, O)})
    collapsed = collapse_derivation(check_derivation(deriv))
    hybrid = hybridize(collapsed)
    node = hybrid.nodes[EPS]
    assert isinstance(node, AxNode) and node.track == 2


def test_build_operable_from_choices_length_zero():
    checked = check_derivation(make_two_choice_redex())
    collapsed = collapse_derivation(checked)
    op = build_operable_from_choices(collapsed, checked, [])
    for a in checked.app_positions():
        assert op.interface[a].key() == default_interface(checked, a).key()


def test_build_operable_from_choices_reproduces_each_choice():
    checked = check_derivation(make_two_choice_redex())
    collapsed = collapse_derivation(checked)
    for rchoice in enumerate_r_choices(collapsed, EPS):
        expected = reduce_R(collapsed, EPS, rchoice)
        op = build_operable_from_choices(collapsed, checked, [(EPS, rchoice)])
        reduced_op, _, _ = reduce_operable(op, EPS)
        assert collapse_derivation(reduced_op.checked) == expected


def test_build_operable_rejects_wrong_collapse():
    checked = check_derivation(make_two_choice_redex())
    other = collapse_derivation(check_derivation(make_self_app()))
    with pytest.raises(ChoiceError):
        build_operable_from_choices(other, checked, [])


def test_realize_round_trip():
    checked = check_derivation(make_two_choice_redex())
    for rho in root_interfaces_at(checked, EPS):
        rchoice = collapse_choice(checked, EPS, {EPS: rho})
        back = realize_r_choice(checked, EPS, rchoice)
        assert back == {EPS: rho}


def test_reduce_operable_is_deterministic():
    from seqtypes.derivations import dumps_derivation

    checked = check_derivation(make_two_choice_redex())
    phi = interfaces_at(checked, EPS)[1]
    runs = []
    for _ in range(2):
        op = make_operable(checked, {EPS: phi})
        new_op, _, _ = reduce_operable(op, EPS)
        interface_dump = sorted(
            (a, iso.key()) for a, iso in new_op.interface.items()
        )
        runs.append((dumps_derivation(new_op.checked.derivation), interface_dump))
    assert runs[0] == runs[1]


def test_reduce_S_respects_shadowing():
    # (\x. x (\x. x)) v: only the head axiom belongs to the redex variable;
    # the inner axiom is bound by the inner abstraction and must survive
    from seqtypes.stypes import parse_type

    term = parse_term("(\\x. x (\\x. x)) v")
    inner_arrow = parse_type("(3:B) -> B")
    head_type = parse_type("(2:(3:B) -> B) -> A")
    nodes = {
        EPS: AppNode(frozenset({5})),
        (1,): AbsNode(),
        (1, 0): AppNode(frozenset({2})),
        (1, 0, 1): AxNode(5, head_type),
        (1, 0, 2): AbsNode(),
        (1, 0, 2, 0): AxNode(3, SAtom("B")),
        (5,): AxNode(7, head_type),
    }
    checked = check_derivation(Derivation(term, "S", nodes))
    assert checked.axioms_above((1, 0), "x") == {(1, 0, 1)}
    reduced = reduce_S(checked, EPS)
    assert reduced.term == parse_term("v (\\x. x)")
    assert sequent(reduced) == sequent(checked)
    assert isinstance(reduced.node((2, 0)), AxNode)
    assert reduced.node((1,)) == AxNode(7, head_type)

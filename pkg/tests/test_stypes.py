from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqtypes.positions import EPS, ZeroOneIso, check_01_iso
from seqtypes.stypes import (
    EMPTY_SEQ,
    RAtom,
    SArrow,
    SAtom,
    TrackConflictError,
    TypeSyntaxError,
    check_type_iso,
    collapse_seq,
    collapse_type,
    enumerate_type_isos,
    equiv,
    label_at,
    parse_seq_type,
    parse_type,
    print_type,
    rarrow,
    rmultiset,
    seq,
    seq_union,
    type_support,
)

O = SAtom("o")
O1 = SAtom("o1")
O2 = SAtom("o2")
O3 = SAtom("o3")
OP = SAtom("o'")

# Two 01-isomorphic labelled trees:
T1 = SArrow(seq({8: O2, 4: SArrow(seq({8: O3, 3: O1}), O2)}), O1)
T2 = SArrow(seq({5: SArrow(seq({7: O1, 2: O3}), O2), 3: O2}), O1)


def test_type_support_example():
    arrow = SArrow(seq({8: O, 3: OP, 2: O}), OP)
    sup, labels = type_support(arrow)
    assert {EPS, (1,), (2,), (3,), (8,)} <= sup.positions
    assert labels[EPS] == "->"
    assert labels[(1,)] == "o'"
    assert labels[(2,)] == "o"


def test_type_support_atom_and_sample_tree():
    sup, labels = type_support(O)
    assert sup.positions == frozenset({EPS})
    assert labels[EPS] == "o"
    sup1, _ = type_support(T1)
    assert sup1.positions == frozenset(
        {EPS, (1,), (4,), (8,), (4, 1), (4, 3), (4, 8)}
    )


def test_seq_union_conflict():
    f1 = seq({2: O, 3: OP})
    f2 = seq({3: OP, 8: O})
    with pytest.raises(TrackConflictError) as exc:
        seq_union(f1, f2)
    assert exc.value.tracks == frozenset({3})


def test_seq_union_unit_and_example():
    f = seq({2: O, 3: OP})
    assert seq_union(f, EMPTY_SEQ) == f
    s, t = SAtom("S"), SAtom("T")
    assert seq_union(seq({2: s, 3: t}), seq({8: s})) == seq({2: s, 3: t, 8: s})


def test_seq_union_commutative_associative():
    f1, f2, f3 = seq({2: O}), seq({3: OP}), seq({8: O2})
    assert seq_union(f1, f2) == seq_union(f2, f1)
    assert seq_union(seq_union(f1, f2), f3) == seq_union(f1, seq_union(f2, f3))


def test_collapse_type():
    t = SArrow(seq({7: O1, 3: O2, 2: O1}), O)
    assert collapse_type(t) == rarrow([RAtom("o1"), RAtom("o2"), RAtom("o1")], RAtom("o"))
    assert collapse_type(O) == RAtom("o")
    expected = rarrow(
        [RAtom("o2"), rarrow([RAtom("o1"), RAtom("o3")], RAtom("o2"))], RAtom("o1")
    )
    assert collapse_type(T1) == expected
    assert collapse_type(T2) == expected


def test_collapse_invariant_under_permutation():
    t1 = SArrow(seq({7: O1, 3: O2, 2: O1}), O)
    t2 = SArrow(seq({9: O2, 7: O1, 6: O1}), O)
    t3 = SArrow(seq({7: O2, 3: O1, 2: O1}), O)
    assert collapse_type(t1) == collapse_type(t2) == collapse_type(t3)


def test_equiv_and_listed_iso():
    assert equiv(T1, T2)
    isos = enumerate_type_isos(T1, T2)
    listed = {
        EPS: EPS,
        (1,): (1,),
        (4,): (5,),
        (4, 1): (5, 1),
        (4, 3): (5, 7),
        (4, 8): (5, 2),
        (8,): (3,),
    }
    assert any(iso.mapping == listed for iso in isos)
    assert equiv(T1, T1)


def test_enumerate_type_isos_two_entries():
    f1 = seq({2: O, 3: O})
    f2 = seq({5: O, 7: O})
    isos = enumerate_type_isos(f1, f2)
    assert len(isos) == 2
    for iso in isos:
        assert check_type_iso(f1, f2, iso)


def brute_type_isos(t1, t2):
    sup1, lab1 = type_support(t1)
    sup2, lab2 = type_support(t2)
    xs, ys = sorted(sup1.positions), sorted(sup2.positions)
    if len(xs) != len(ys):
        return []
    out = []
    for perm in itertools.permutations(ys):
        phi = ZeroOneIso(dict(zip(xs, perm)))
        if check_01_iso(sup1.positions, sup2.positions, phi, lab1, lab2):
            out.append(tuple(sorted(phi.mapping.items())))
    return sorted(out)


def test_enumeration_complete_against_brute_force():
    got = sorted(iso.key() for iso in enumerate_type_isos(T1, T2))
    assert got == brute_type_isos(T1, T2)


def test_parse_print_round_trip():
    assert parse_type("(2:o, 7:o) -> o'") == SArrow(seq({2: O, 7: O}), OP)
    assert parse_type("o") == O
    for text in [
        "o",
        "(2:o, 7:o) -> o'",
        "() -> o",
        "(2:(3:o) -> o') -> (2:o) -> o",
    ]:
        t = parse_type(text)
        assert parse_type(print_type(t)) == t
        assert print_type(parse_type(print_type(t))) == print_type(t)
    assert parse_seq_type("(2:o, 3:o')") == seq({2: O, 3: OP})
    assert parse_seq_type("()") == EMPTY_SEQ
    with pytest.raises(TypeSyntaxError):
        parse_type("(1:o) -> o")
    with pytest.raises(TypeSyntaxError):
        parse_type("o ->")


def test_label_at():
    assert label_at(T1, (4, 8)) == "o3"
    assert label_at(T1, EPS) == "->"


atoms = st.sampled_from([O, OP, O1, O2])


def stypes_strategy():
    return st.recursive(
        atoms,
        lambda sub: st.builds(
            SArrow,
            st.lists(st.tuples(st.integers(2, 5), sub), max_size=3).map(
                lambda entries: seq(dict(entries))
            ),
            sub,
        ),
        max_leaves=5,
    )


@settings(max_examples=60, deadline=None)
@given(stypes_strategy(), stypes_strategy())
def test_three_way_agreement(t1, t2):
    """equiv <=> non-empty iso set <=> equal collapses."""
    same_collapse = collapse_type(t1) == collapse_type(t2)
    assert equiv(t1, t2) == same_collapse
    isos = enumerate_type_isos(t1, t2)
    assert bool(isos) == same_collapse
    for iso in isos[:4]:
        assert check_type_iso(t1, t2, iso)


@settings(max_examples=40, deadline=None)
@given(stypes_strategy(), stypes_strategy())
def test_collapse_of_union_is_multiset_sum(s1, s2):
    f1, f2 = seq({2: s1, 5: s2}), seq({3: s2})
    union = seq_union(f1, f2)
    assert collapse_seq(union) == rmultiset(
        list(collapse_seq(f1)) + list(collapse_seq(f2))
    )

"""Iterated-reduction properties tying the systems together."""

from __future__ import annotations

import random

from seqtypes.corpus import sr_corpus, tower_instances
from seqtypes.derivations import collapse_derivation
from seqtypes.positions import collapse_position
from seqtypes.reduction import (
    OperableDerivation,
    interfaces_at,
    make_operable,
    reduce_S,
    reduce_operable,
)
from seqtypes.stypes import equiv, print_type
from seqtypes.terms import redexes
from seqtypes.threads import ThreadAnalysis
from seqtypes.trivialize import random_relabelling, reset_derivation, trivialize

from samples import brothers_operable


def typed_redexes(checked):
    apps = checked.app_positions()
    return [
        b
        for b in redexes(checked.term)
        if any(collapse_position(a) == b for a in apps)
    ]


def sequent(checked):
    j = checked.conclusion()
    ctx = ", ".join(f"{x}:{print_type(f)}" for x, f in j.context.entries)
    return (ctx, print_type(j.stype))


def test_iterated_reduction_terminates_with_fixed_sequent():
    # non-idempotency: every typed step strictly shrinks the derivation
    for checked in sr_corpus(23, 40):
        before = sequent(checked)
        current = checked
        steps = 0
        while True:
            pending = typed_redexes(current)
            if not pending:
                break
            reduced = reduce_S(current, pending[0])
            assert len(reduced.support()) < len(current.support())
            assert sequent(reduced) == before
            current = reduced
            steps += 1
            assert steps <= len(checked.support())


def test_iterated_operable_reduction_preserves_type_up_to_iso():
    rng = random.Random(31)
    corpus = sr_corpus(29, 25)
    for checked in corpus:
        hybrid = make_operable(checked)
        start_type = hybrid.checked.conclusion().stype
        start_ctx = hybrid.checked.conclusion().context
        current = hybrid
        while True:
            pending = typed_redexes(current.checked)
            if not pending:
                break
            current, _, _ = reduce_operable(current, rng.choice(pending))
            assert equiv(current.checked.conclusion().stype, start_type)
            assert current.checked.conclusion().context == start_ctx
            analysis = ThreadAnalysis(current)
            assert analysis.check_uniqueness_of_consumption()
            assert analysis.check_monotonicity()
            assert analysis.find_brother_chain() is None


def test_trivial_representative_replays_every_redex():
    # reducing the trivial representative deterministically agrees, at every
    # typed redex, with the interface-driven reduction of the original
    instances = tower_instances(37, 6)
    instances.append(brothers_operable())
    rng = random.Random(41)
    for checked in sr_corpus(43, 15):
        perturbed = reset_derivation(
            checked, random_relabelling(checked, rng), flavor="Sh"
        ).checked
        interface = {}
        for a in perturbed.app_positions():
            options = interfaces_at(perturbed, a)
            interface[a] = options[rng.randrange(len(options))]
        instances.append(OperableDerivation(perturbed, interface))
    for op in instances:
        result = trivialize(op)
        for b in typed_redexes(op.checked):
            reduced_op, _, _ = reduce_operable(op, b)
            replayed = reduce_S(result.trivial, b)
            assert collapse_derivation(replayed) == collapse_derivation(
                reduced_op.checked
            )


def test_residual_of_identity_interface_is_identity():
    # deterministic reduction of a trivial derivation stays trivial, with
    # the residual interface again the identity
    from seqtypes.stypes import identity_iso

    for checked in sr_corpus(51, 15):
        for b in typed_redexes(checked):
            op = make_operable(
                checked,
                {a: identity_iso(checked.left_seq(a)) for a in checked.app_positions()},
            )
            new_op, _, _ = reduce_operable(op, b)
            for a, phi in new_op.interface.items():
                assert phi.mapping == identity_iso(new_op.checked.left_seq(a)).mapping


def test_multi_step_replay_of_built_choices():
    # build a whole choice chain into one interface, trivialize, and replay
    # it by plain deterministic reduction: the collapses agree at each step
    from seqtypes.reduction import (
        build_operable_from_choices,
        enumerate_r_choices,
        reduce_R,
    )

    rng = random.Random(67)
    replayed_chains = 0
    for op in tower_instances(61, 8):
        checked = op.checked
        collapsed = collapse_derivation(checked)
        chain = []
        current = collapsed
        for _ in range(3):
            pending = redexes(current.term)
            if not pending:
                break
            b = pending[0]
            choices = enumerate_r_choices(current, b)
            choice = choices[rng.randrange(len(choices))]
            chain.append((b, choice))
            current = reduce_R(current, b, choice)
        if len(chain) < 2:
            continue
        built = build_operable_from_choices(collapsed, checked, chain)
        trivial = trivialize(built).trivial
        expected = collapsed
        for b_i, ch_i in chain:
            expected = reduce_R(expected, b_i, ch_i)
            trivial = reduce_S(trivial, b_i)
            assert collapse_derivation(trivial) == expected
        replayed_chains += 1
    assert replayed_chains >= 3

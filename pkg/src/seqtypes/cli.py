"""Command-line front end: check, collapse, isos, reduce, threads,
trivialize, gen, export-dot."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .positions import Position, format_position, parse_position
from .stypes import TypeIso, print_rtype
from .derivations import (
    CheckedDerivation,
    DerivationCheckError,
    check_derivation,
    check_R,
    collapse_derivation,
    dumps_derivation,
    format_judgment,
    load_derivation,
    save_derivation,
)
from .reduction import (
    ChoiceError,
    OperableDerivation,
    ReductionChoice,
    ReductionError,
    interfaces_at,
    make_operable,
    reduce_operable,
    reduce_S,
    reduce_Sh,
)
from .threads import ThreadAnalysis, dot_export, text_report
from .trivialize import BrotherChainError, trivialize
from .corpus import sr_corpus


class CliError(Exception):
    def __init__(self, kind: str, detail: str, position: str | None = None) -> None:
        super().__init__(detail)
        self.kind = kind
        self.detail = detail
        self.position = position


def _load_checked(path: str, flavor: str | None) -> CheckedDerivation:
    deriv = load_derivation(path)
    if flavor is not None and flavor != deriv.flavor:
        from .derivations import Derivation

        deriv = Derivation(deriv.term, flavor, deriv.nodes)
    try:
        return check_derivation(deriv)
    except DerivationCheckError as exc:
        raise CliError("check-failed", str(exc), format_position(exc.position)) from exc


def _interface_to_json(interface: dict[Position, TypeIso]) -> dict:
    return {
        "interfaces": [
            {
                "pos": format_position(a),
                "phi": [
                    [format_position(c), format_position(c2)]
                    for c, c2 in sorted(iso.mapping.items())
                ],
            }
            for a, iso in sorted(interface.items())
        ]
    }


def _interface_from_json(data: dict) -> dict[Position, TypeIso]:
    out: dict[Position, TypeIso] = {}
    for entry in data["interfaces"]:
        mapping = {
            parse_position(c): parse_position(c2) for c, c2 in entry["phi"]
        }
        out[parse_position(entry["pos"])] = TypeIso(mapping)
    return out


def _load_operable(path: str, interface_path: str | None) -> OperableDerivation:
    checked = _load_checked(path, None)
    partial = None
    if interface_path:
        with open(interface_path) as handle:
            partial = _interface_from_json(json.load(handle))
    try:
        return make_operable(checked, partial)
    except ValueError as exc:
        raise CliError("bad-interface", str(exc)) from exc


def _choice_from_json(data: dict) -> ReductionChoice:
    per_node = {
        parse_position(entry["pos"]): {int(k): int(k2) for k, k2 in entry["rho"]}
        for entry in data["per_node"]
    }
    return ReductionChoice(parse_position(data["redex"]), per_node)


def cmd_check(args) -> int:
    checked = _load_checked(args.file, args.flavor)
    if args.json:
        print(json.dumps({"judgment": format_judgment(checked.conclusion())}))
    else:
        print(format_judgment(checked.conclusion()))
    return 0


def cmd_collapse(args) -> int:
    checked = _load_checked(args.file, args.flavor)
    rd = collapse_derivation(checked)
    judgment = check_R(rd)
    ctx = ", ".join(
        f"{x}:[{','.join(print_rtype(t) for t in ts)}]" for x, ts in judgment.context
    )
    sep = " " if ctx else ""
    line = f"{ctx}{sep}|- {print_rtype(judgment.rtype)}"
    if args.json:
        print(json.dumps({"judgment": line}))
    else:
        print(line)
    return 0


def cmd_isos(args) -> int:
    checked = _load_checked(args.file, args.flavor)
    pos = parse_position(args.pos)
    try:
        isos = interfaces_at(checked, pos)
    except Exception as exc:
        raise CliError("not-an-application", str(exc), args.pos) from exc
    if args.json:
        payload = {
            "pos": args.pos,
            "count": len(isos),
            "interfaces": [
                [[format_position(c), format_position(c2)] for c, c2 in sorted(iso.mapping.items())]
                for iso in isos
            ],
        }
        print(json.dumps(payload))
    else:
        print(f"{len(isos)} interface(s) at {args.pos}")
        for i, iso in enumerate(isos):
            pairs = ", ".join(
                f"{format_position(c)} -> {format_position(c2)}"
                for c, c2 in sorted(iso.mapping.items())
            )
            print(f"  [{i}] {pairs if pairs else '(empty)'}")
    return 0


def cmd_reduce(args) -> int:
    pos = parse_position(args.pos)
    try:
        if args.choice:
            checked = _load_checked(args.file, args.flavor)
            with open(args.choice) as handle:
                choice = _choice_from_json(json.load(handle))
            reduced = reduce_Sh(checked, pos, choice)
            out_deriv = reduced
        elif args.interface:
            op = _load_operable(args.file, args.interface)
            new_op, _, _ = reduce_operable(op, pos)
            reduced = new_op.checked
            out_deriv = reduced
            if args.interface_out:
                Path(args.interface_out).write_text(
                    json.dumps(_interface_to_json(new_op.interface), indent=2) + "\n"
                )
        else:
            checked = _load_checked(args.file, args.flavor)
            if checked.flavor == "S":
                reduced = reduce_S(checked, pos)
            else:
                op = make_operable(checked)
                new_op, _, _ = reduce_operable(op, pos)
                reduced = new_op.checked
            out_deriv = reduced
    except (ReductionError, ChoiceError, DerivationCheckError) as exc:
        raise CliError("reduction-failed", str(exc), args.pos) from exc
    if args.out:
        save_derivation(out_deriv.derivation, args.out)
    if args.json:
        print(json.dumps({"judgment": format_judgment(reduced.conclusion())}))
    else:
        print(format_judgment(reduced.conclusion()))
    return 0


def cmd_threads(args) -> int:
    if args.interface:
        op = _load_operable(args.file, args.interface)
        analysis = ThreadAnalysis(op)
    else:
        checked = _load_checked(args.file, args.flavor)
        analysis = (
            ThreadAnalysis(make_operable(checked))
            if checked.flavor == "Sh"
            else ThreadAnalysis(checked)
        )
    if args.dot:
        Path(args.dot).write_text(dot_export(analysis))
    if args.json:
        payload = {
            "threads": [
                {"id": t.id, "label": t.label, "kind": t.kind, "edges": len(t.edges)}
                for t in analysis.threads
            ],
            "arcs": [
                {
                    "left": arc.left,
                    "right": arc.right,
                    "pos": format_position(arc.pos),
                    "left_polarity": arc.left_polarity,
                    "right_polarity": arc.right_polarity,
                }
                for arc in analysis.consumption()
            ],
        }
        print(json.dumps(payload))
    else:
        print(text_report(analysis), end="")
    return 0


def cmd_trivialize(args) -> int:
    op = _load_operable(args.file, args.interface)
    try:
        result = trivialize(op)
    except BrotherChainError as exc:
        raise CliError("brother-chain", str(exc)) from exc
    if args.out:
        save_derivation(result.trivial.derivation, args.out)
    report = {
        "judgment": format_judgment(result.trivial.conclusion()),
        "classes": [
            {"class": i, "threads": list(tids), "track": result.values[i]}
            for i, tids in enumerate(result.classes.classes)
        ],
        "iso": [
            [format_position(a), format_position(b)]
            for a, b in sorted(result.iso.supp_map.items())
        ],
        "axiom_isos": {
            format_position(a): [
                [format_position(c), format_position(c2)]
                for c, c2 in sorted(iso.mapping.items())
            ]
            for a, iso in sorted(result.iso.axiom_isos.items())
        },
    }
    if args.json:
        print(json.dumps(report))
    else:
        print(report["judgment"])
        for entry in report["classes"]:
            print(f"class {entry['class']} -> track {entry['track']}: threads {entry['threads']}")
    return 0


def cmd_gen(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    corpus = sr_corpus(args.seed, args.count, size=args.size, width=args.width)
    for i, checked in enumerate(corpus):
        path = outdir / f"d{i:04d}.deriv"
        path.write_text(dumps_derivation(checked.derivation))
    print(f"wrote {len(corpus)} derivations to {outdir}")
    return 0


def cmd_export_dot(args) -> int:
    return cmd_threads(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqtypes", description="Rigid sequence-type derivation toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, flavor=True):
        p.add_argument("--file", required=True, help="derivation file")
        if flavor:
            p.add_argument("--flavor", choices=["S", "Sh"], default=None)
        p.add_argument("--json", action="store_true")

    p = sub.add_parser("check", help="check a derivation and print its judgment")
    add_common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("collapse", help="collapse onto the multiset system")
    add_common(p)
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("isos", help="list the interfaces at an application node")
    add_common(p)
    p.add_argument("--pos", required=True)
    p.set_defaults(func=cmd_isos)

    p = sub.add_parser("reduce", help="fire a redex inside the derivation")
    add_common(p)
    p.add_argument("--pos", required=True)
    p.add_argument("--choice", help="reduction-choice file (root interfaces)")
    p.add_argument("--interface", help="total interface file (operable reduction)")
    p.add_argument("--interface-out", help="write the residual interface here")
    p.add_argument("--out", help="write the reduct derivation here")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("threads", help="thread and consumption report")
    add_common(p)
    p.add_argument("--interface")
    p.add_argument("--dot", help="write a DOT graph here")
    p.set_defaults(func=cmd_threads)

    p = sub.add_parser("trivialize", help="build an isomorphic trivial derivation")
    add_common(p, flavor=False)
    p.add_argument("--interface")
    p.add_argument("--out", help="write the trivial derivation here")
    p.set_defaults(func=cmd_trivialize)

    p = sub.add_parser("gen", help="generate a reproducible corpus")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--size", type=int, default=5)
    p.add_argument("--width", type=int, default=2)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("export-dot", help="export the derivation tree as DOT")
    add_common(p)
    p.add_argument("--interface")
    p.add_argument("--dot", required=True)
    p.set_defaults(func=cmd_export_dot)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        payload = {"error": exc.kind, "detail": exc.detail}
        if exc.position is not None:
            payload["position"] = exc.position
        print(json.dumps(payload), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(json.dumps({"error": "file-not-found", "detail": str(exc)}), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Finite lambda terms, their position supports, and beta reduction.

Supports use track 0 under an abstraction and tracks 1/2 under an
application, so every term position is a word over {0, 1, 2}.
"""

from __future__ import annotations

from dataclasses import dataclass

from .positions import EPS, Position, PosTree, collapse_position, format_position


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Abs:
    binder: str
    body: "Term"


@dataclass(frozen=True)
class App:
    left: "Term"
    right: "Term"


Term = Var | Abs | App


class TermSyntaxError(ValueError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class PositionError(KeyError):
    """The position does not address a node of the term."""


class NotARedexError(ValueError):
    """The addressed subterm is not of the shape (\\x. r) s."""


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in "\\.()":
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isalpha():
            j = i + 1
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], i))
            i = j
            continue
        raise TermSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(("eof", "", len(text)))
    return tokens


def parse_term(text: str) -> Term:
    """Parse `\\x y. body`, left-associative application, parentheses."""
    tokens = _tokenize(text)
    pos = 0

    def peek() -> tuple[str, str, int]:
        return tokens[pos]

    def advance() -> tuple[str, str, int]:
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        return tok

    def parse_expr() -> Term:
        kind, _, off = peek()
        if kind == "\\":
            advance()
            binders = []
            while peek()[0] == "ident":
                binders.append(advance()[1])
            if not binders:
                raise TermSyntaxError("expected binder after '\\'", peek()[2])
            if peek()[0] != ".":
                raise TermSyntaxError("expected '.' after binders", peek()[2])
            advance()
            body = parse_expr()
            for name in reversed(binders):
                body = Abs(name, body)
            return body
        return parse_app()

    def parse_app() -> Term:
        atom = parse_atom()
        while peek()[0] in ("ident", "("):
            atom = App(atom, parse_atom())
        return atom

    def parse_atom() -> Term:
        kind, value, off = advance()
        if kind == "ident":
            return Var(value)
        if kind == "(":
            inner = parse_expr()
            kind2, _, off2 = advance()
            if kind2 != ")":
                raise TermSyntaxError("expected ')'", off2)
            return inner
        raise TermSyntaxError(f"unexpected token {value!r}", off)

    term = parse_expr()
    kind, value, off = peek()
    if kind != "eof":
        raise TermSyntaxError(f"trailing input {value!r}", off)
    return term


def print_term(t: Term) -> str:
    def atom(u: Term) -> str:
        if isinstance(u, Var):
            return u.name
        return f"({print_term(u)})"

    if isinstance(t, Var):
        return t.name
    if isinstance(t, Abs):
        binders = []
        body = t
        while isinstance(body, Abs):
            binders.append(body.binder)
            body = body.body
        return f"\\{' '.join(binders)}. {print_term(body)}"
    parts = []
    u = t
    while isinstance(u, App):
        parts.append(u.right)
        u = u.left
    parts.append(u)
    parts.reverse()
    return " ".join(atom(p) if not isinstance(p, Var) else p.name for p in parts)


def support(t: Term) -> PosTree:
    out: set[Position] = set()

    def walk(u: Term, prefix: Position) -> None:
        out.add(prefix)
        if isinstance(u, Abs):
            walk(u.body, prefix + (0,))
        elif isinstance(u, App):
            walk(u.left, prefix + (1,))
            walk(u.right, prefix + (2,))

    walk(t, EPS)
    return PosTree(frozenset(out))


def subterm_at(t: Term, a: Position) -> Term:
    u = t
    for k in collapse_position(a):
        if isinstance(u, Abs) and k == 0:
            u = u.body
        elif isinstance(u, App) and k == 1:
            u = u.left
        elif isinstance(u, App) and k == 2:
            u = u.right
        else:
            raise PositionError(f"position {format_position(a)} outside the support")
    return u


def constructor_at(t: Term, a: Position) -> str:
    u = subterm_at(t, a)
    if isinstance(u, Var):
        return u.name
    if isinstance(u, Abs):
        return f"\\{u.binder}"
    return "@"


def free_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset({t.name})
    if isinstance(t, Abs):
        return free_vars(t.body) - {t.binder}
    return free_vars(t.left) | free_vars(t.right)


def _all_names(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Abs):
        return {t.binder} | _all_names(t.body)
    return _all_names(t.left) | _all_names(t.right)


def fresh_name(base: str, used: set[str]) -> str:
    if base not in used:
        return base
    i = 1
    while f"{base}{i}" in used:
        i += 1
    return f"{base}{i}"


def substitute(t: Term, x: str, s: Term) -> Term:
    """Capture-avoiding t[s/x]; renames binders of t when needed."""
    fv_s = free_vars(s)

    def go(u: Term) -> Term:
        if isinstance(u, Var):
            return s if u.name == x else u
        if isinstance(u, App):
            return App(go(u.left), go(u.right))
        if u.binder == x:
            return u
        if u.binder in fv_s and x in free_vars(u.body):
            fresh = fresh_name(u.binder, fv_s | free_vars(u.body) | {x})
            body = substitute(u.body, u.binder, Var(fresh))
            return Abs(fresh, go(body))
        return Abs(u.binder, go(u.body))

    return go(t)


def beta_reduce_at(t: Term, b: Position) -> Term:
    def go(u: Term, rest: Position) -> Term:
        if not rest:
            if isinstance(u, App) and isinstance(u.left, Abs):
                return substitute(u.left.body, u.left.binder, u.right)
            raise NotARedexError(f"no redex at {format_position(b)}")
        k, tail = rest[0], rest[1:]
        if isinstance(u, Abs) and k == 0:
            return Abs(u.binder, go(u.body, tail))
        if isinstance(u, App) and k == 1:
            return App(go(u.left, tail), u.right)
        if isinstance(u, App) and k == 2:
            return App(u.left, go(u.right, tail))
        raise PositionError(f"position {format_position(b)} outside the support")

    return go(t, collapse_position(b))


def redexes(t: Term) -> list[Position]:
    """Redex positions, leftmost-outermost first (lexicographic order)."""
    out = []
    for a in support(t):
        u = subterm_at(t, a)
        if isinstance(u, App) and isinstance(u.left, Abs):
            out.append(a)
    return sorted(out)


def is_normal(t: Term) -> bool:
    return not redexes(t)


def barendregt_rename(t: Term) -> Term:
    """Alpha-rename so binders are pairwise distinct and disjoint from free vars."""
    used = set(free_vars(t))

    def go(u: Term) -> Term:
        if isinstance(u, Var):
            return u
        if isinstance(u, App):
            return App(go(u.left), go(u.right))
        name = fresh_name(u.binder, used)
        used.add(name)
        body = u.body if name == u.binder else substitute(u.body, u.binder, Var(name))
        return Abs(name, go(body))

    return go(t)


def alpha_key(t: Term) -> tuple:
    """De Bruijn shape of the term; equal keys mean alpha-equivalent terms."""

    def go(u: Term, env: tuple[str, ...]) -> tuple:
        if isinstance(u, Var):
            for i, name in enumerate(reversed(env)):
                if name == u.name:
                    return ("b", i)
            return ("f", u.name)
        if isinstance(u, Abs):
            return ("l", go(u.body, env + (u.binder,)))
        return ("a", go(u.left, env), go(u.right, env))

    return go(t, ())


def alpha_eq(t: Term, u: Term) -> bool:
    return alpha_key(t) == alpha_key(u)


def binders_above(t: Term, a: Position) -> set[str]:
    """Names bound by abstractions on the path strictly above position a."""
    out: set[str] = set()
    u = t
    for k in collapse_position(a):
        if isinstance(u, Abs) and k == 0:
            out.add(u.binder)
            u = u.body
        elif isinstance(u, App) and k in (1, 2):
            u = u.left if k == 1 else u.right
        else:
            raise PositionError(f"position {format_position(a)} outside the support")
    return out

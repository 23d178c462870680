"""Words of tracks, position trees/forests, 01-isomorphisms and relabellings.

Positions are finite words over the naturals.  Letters 0 and 1 are fixed
(structural) tracks; letters >= 2 are mutable argument tracks.  Position
trees and forests are the supports that terms, types and derivations live
on; 01-isomorphisms are the track-renaming bijections that leave the fixed
tracks alone.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Optional

Position = tuple[int, ...]
Track = int

EPS: Position = ()


class DomainMismatchError(ValueError):
    """The candidate mapping is not even defined on the right support."""


class RelabellingError(ValueError):
    """A 01-relabelling violates sibling-injectivity or misses positions."""


def collapse_track(k: Track) -> Track:
    return min(k, 2)


def collapse_position(a: Position) -> Position:
    return tuple(min(k, 2) for k in a)


def applicative_depth(a: Position) -> int:
    """Number of argument tracks (letters >= 2) in the word."""
    return sum(1 for k in a if k >= 2)


def is_prefix(a: Position, b: Position) -> bool:
    return len(a) <= len(b) and b[: len(a)] == a


def parse_position(text: str) -> Position:
    text = text.strip()
    if text in ("eps", ""):
        return EPS
    try:
        letters = tuple(int(part) for part in text.split("."))
    except ValueError:
        raise ValueError(f"bad position syntax: {text!r}") from None
    if any(k < 0 for k in letters):
        raise ValueError(f"negative track in position: {text!r}")
    return letters


def format_position(a: Position) -> str:
    return "eps" if not a else ".".join(str(k) for k in a)


def _downward_closed(positions: frozenset[Position]) -> bool:
    return all(a[:-1] in positions for a in positions if a)


@dataclass(frozen=True)
class PosTree:
    """Non-empty, prefix-closed set of positions."""

    positions: frozenset[Position]

    def __post_init__(self) -> None:
        if not self.positions:
            raise ValueError("a position tree is non-empty")
        if EPS not in self.positions or not _downward_closed(self.positions):
            raise ValueError("a position tree is downward-closed and contains eps")

    def __contains__(self, a: Position) -> bool:
        return a in self.positions

    def __iter__(self):
        return iter(sorted(self.positions))

    def children(self, a: Position) -> list[Track]:
        n = len(a)
        return sorted(p[n] for p in self.positions if len(p) == n + 1 and p[:n] == a)

    def mutable_support(self) -> frozenset[Position]:
        return frozenset(a for a in self.positions if a and a[-1] >= 2)


@dataclass(frozen=True)
class PosForest:
    """A tree minus its root; root tracks are argument tracks (>= 2)."""

    positions: frozenset[Position]

    def __post_init__(self) -> None:
        if EPS in self.positions:
            raise ValueError("a forest does not contain eps")
        if any(len(a) == 1 and a[0] < 2 for a in self.positions):
            raise ValueError("forest roots use tracks >= 2")
        if not _downward_closed(frozenset(self.positions | {EPS})):
            raise ValueError("a forest plus eps is downward-closed")

    def __contains__(self, a: Position) -> bool:
        return a in self.positions

    def __iter__(self):
        return iter(sorted(self.positions))

    def roots(self) -> list[Track]:
        return sorted(a[0] for a in self.positions if len(a) == 1)

    def children(self, a: Position) -> list[Track]:
        n = len(a)
        return sorted(p[n] for p in self.positions if len(p) == n + 1 and p[:n] == a)

    def mutable_support(self) -> frozenset[Position]:
        return frozenset(a for a in self.positions if a[-1] >= 2)


Support = PosTree | PosForest | frozenset | set


def support_set(u: Support) -> frozenset[Position]:
    if isinstance(u, (PosTree, PosForest)):
        return u.positions
    return frozenset(u)


@dataclass(frozen=True)
class ZeroOneIso:
    """A prefix-monotone, length-preserving bijection fixing tracks 0 and 1."""

    mapping: dict[Position, Position]

    def __call__(self, a: Position) -> Position:
        return self.mapping[a]

    def inverse(self) -> "ZeroOneIso":
        return ZeroOneIso({v: k for k, v in self.mapping.items()})

    def compose(self, inner: "ZeroOneIso") -> "ZeroOneIso":
        """self o inner."""
        return ZeroOneIso({a: self.mapping[b] for a, b in inner.mapping.items()})

    def key(self) -> tuple:
        return tuple(sorted(self.mapping.items()))


@dataclass(frozen=True)
class RootIso:
    """Bijection between the root tracks of two forests, extendable to a 01-iso."""

    mapping: dict[Track, Track]

    def __call__(self, k: Track) -> Track:
        return self.mapping[k]

    def inverse_track(self, k: Track) -> Track:
        for src, dst in self.mapping.items():
            if dst == k:
                return src
        raise KeyError(k)


@dataclass(frozen=True)
class Relabelling01:
    """New tracks for the mutable positions of one support (sibling-injective)."""

    assignment: dict[Position, Track]

    def __post_init__(self) -> None:
        for a, k in self.assignment.items():
            if not a or a[-1] < 2:
                raise RelabellingError(f"{format_position(a)} is not a mutable position")
            if k < 2:
                raise RelabellingError(f"new track {k} is not mutable")
        seen: dict[tuple[Position, Track], Position] = {}
        for a, k in self.assignment.items():
            key = (a[:-1], k)
            if key in seen and seen[key] != a:
                raise RelabellingError(
                    f"siblings {format_position(seen[key])} and {format_position(a)} "
                    f"both relabelled to {k}"
                )
            seen[key] = a

    def __call__(self, a: Position) -> Track:
        return self.assignment[a]


def _child_map(positions: frozenset[Position]) -> dict[Position, list[Track]]:
    children: dict[Position, list[Track]] = {a: [] for a in positions}
    children.setdefault(EPS, [])
    for a in positions:
        if a:
            children.setdefault(a[:-1], []).append(a[-1])
    for tracks in children.values():
        tracks.sort()
    return children


def check_01_iso(
    u1: Support,
    u2: Support,
    phi: ZeroOneIso,
    labels1: Optional[Mapping[Position, str]] = None,
    labels2: Optional[Mapping[Position, str]] = None,
) -> bool:
    """Check the 01-isomorphism clauses; raise on a domain mismatch.

    The labelled clause is checked only when both label maps are supplied.
    """
    s1, s2 = support_set(u1), support_set(u2)
    mapping = phi.mapping
    if set(mapping) != s1:
        raise DomainMismatchError("mapping domain differs from the first support")
    image = set(mapping.values())
    if len(image) != len(mapping) or image != s2:
        return False
    for a, b in mapping.items():
        if len(a) != len(b):
            return False
        if a:
            parent_image = mapping.get(a[:-1], EPS if len(a) == 1 else None)
            if parent_image is None or b[:-1] != parent_image:
                return False
            if a[-1] in (0, 1) and b[-1] != a[-1]:
                return False
    if labels1 is not None and labels2 is not None:
        for a, b in mapping.items():
            if labels1.get(a) != labels2.get(b):
                return False
    return True


def _canon(
    pos: Position,
    children: dict[Position, list[Track]],
    labels: Optional[Mapping[Position, str]],
) -> tuple:
    label = labels.get(pos) if labels is not None else None
    fixed = tuple(
        (k, _canon(pos + (k,), children, labels))
        for k in children.get(pos, [])
        if k in (0, 1)
    )
    mutable = tuple(
        sorted(_canon(pos + (k,), children, labels) for k in children.get(pos, []) if k >= 2)
    )
    return (label, fixed, mutable)


def enumerate_01_isos(
    u1: Support,
    u2: Support,
    labels1: Optional[Mapping[Position, str]] = None,
    labels2: Optional[Mapping[Position, str]] = None,
) -> list[ZeroOneIso]:
    """All 01-isomorphisms from u1 onto u2, in a deterministic order.

    Children are grouped by (label, subtree-canonical-form); within a group
    the source tracks are taken in ascending order and the target tracks in
    lexicographic permutation order.
    """
    s1, s2 = support_set(u1), support_set(u2)
    is_forest = EPS not in s1
    t1 = s1 | {EPS}
    t2 = s2 | {EPS}
    ch1, ch2 = _child_map(t1), _child_map(t2)

    def go(p1: Position, p2: Position) -> list[dict[Position, Position]]:
        if _canon(p1, ch1, labels1) != _canon(p2, ch2, labels2):
            return []
        kids1, kids2 = ch1.get(p1, []), ch2.get(p2, [])
        parts: list[list[dict[Position, Position]]] = []
        for k in (0, 1):
            if (k in kids1) != (k in kids2):
                return []
            if k in kids1:
                parts.append(go(p1 + (k,), p2 + (k,)))
        groups1: dict[tuple, list[Track]] = {}
        groups2: dict[tuple, list[Track]] = {}
        for k in kids1:
            if k >= 2:
                groups1.setdefault(_canon(p1 + (k,), ch1, labels1), []).append(k)
        for k in kids2:
            if k >= 2:
                groups2.setdefault(_canon(p2 + (k,), ch2, labels2), []).append(k)
        if set(groups1) != set(groups2):
            return []
        for canon in sorted(groups1):
            xs, ys = groups1[canon], groups2[canon]
            if len(xs) != len(ys):
                return []
            group_alts: list[dict[Position, Position]] = []
            for perm in itertools.permutations(sorted(ys)):
                sub_parts = [go(p1 + (x,), p2 + (y,)) for x, y in zip(sorted(xs), perm)]
                for combo in itertools.product(*sub_parts):
                    merged: dict[Position, Position] = {}
                    for x, y in zip(sorted(xs), perm):
                        merged[p1 + (x,)] = p2 + (y,)
                    for sub in combo:
                        merged.update(sub)
                    group_alts.append(merged)
            parts.append(group_alts)
        results: list[dict[Position, Position]] = []
        for combo in itertools.product(*parts):
            merged = {p1: p2}
            for sub in combo:
                merged.update(sub)
            results.append(merged)
        return results

    raw = go(EPS, EPS)
    isos = []
    for mapping in raw:
        if is_forest:
            mapping = {a: b for a, b in mapping.items() if a != EPS}
        isos.append(ZeroOneIso(mapping))
    isos.sort(key=ZeroOneIso.key)
    return isos


def make_root_iso(f1: PosForest, f2: PosForest, mapping: dict[Track, Track],
                  labels1: Optional[Mapping[Position, str]] = None,
                  labels2: Optional[Mapping[Position, str]] = None) -> RootIso:
    """Validate that the root mapping extends to a 01-isomorphism of the forests."""
    if sorted(mapping) != f1.roots() or sorted(mapping.values()) != f2.roots():
        raise DomainMismatchError("root mapping does not match the forests' roots")
    s1, s2 = f1.positions, f2.positions
    for k, k2 in mapping.items():
        sub1 = frozenset(a[1:] for a in s1 if a[0] == k) | {EPS}
        sub2 = frozenset(a[1:] for a in s2 if a[0] == k2) | {EPS}
        lab1 = {a[1:]: v for a, v in labels1.items() if a and a[0] == k} if labels1 else None
        lab2 = {a[1:]: v for a, v in labels2.items() if a and a[0] == k2} if labels2 else None
        if not enumerate_01_isos(sub1, sub2, lab1, lab2):
            raise ValueError(f"root mapping {k} -> {k2} is not extendable to a 01-iso")
    return RootIso(dict(mapping))


def root_of_iso(phi: ZeroOneIso) -> RootIso:
    """Rt(phi): the root bijection induced by a forest 01-isomorphism."""
    return RootIso({a[0]: b[0] for a, b in phi.mapping.items() if len(a) == 1})


def apply_relabelling(u: Support, relab: Relabelling01) -> tuple[frozenset[Position], ZeroOneIso]:
    """Reset the support, replacing mutable tracks top-down per the relabelling."""
    positions = support_set(u)
    mutable = {a for a in positions if a and a[-1] >= 2}
    missing = mutable - set(relab.assignment)
    if missing:
        raise RelabellingError(
            f"relabelling undefined on {format_position(sorted(missing)[0])}"
        )
    mapping: dict[Position, Position] = {}

    def image(a: Position) -> Position:
        if a in mapping:
            return mapping[a]
        if not a:
            mapping[a] = EPS
            return EPS
        parent = image(a[:-1])
        k = a[-1]
        b = parent + (k if k < 2 else relab(a),)
        mapping[a] = b
        return b

    for a in sorted(positions):
        image(a)
    out = frozenset(mapping[a] for a in positions)
    return out, ZeroOneIso({a: mapping[a] for a in positions})

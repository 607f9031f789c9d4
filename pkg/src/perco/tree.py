"""Vertices and edges of the oriented multi-range tree T_{d,k}.

A vertex is a tuple of 1-based labels; the root is the empty tuple.  Short
edges descend one level, long edges descend exactly ``k`` levels.  Edges
carry their kind explicitly because for ``k == 1`` a short and a long edge
share both endpoints.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional, Tuple

Vertex = Tuple[int, ...]

ROOT: Vertex = ()


class Kind(enum.IntEnum):
    SHORT = 0
    LONG = 1


class Edge(NamedTuple):
    """Directed edge ``<tail, tail . suffix>``."""

    tail: Vertex
    suffix: Tuple[int, ...]
    kind: Kind

    @property
    def head(self) -> Vertex:
        return self.tail + self.suffix

    def __str__(self) -> str:
        tag = "s" if self.kind == Kind.SHORT else "l"
        return f"<{format_vertex(self.tail)},{format_vertex(self.head)}>{tag}"


@dataclass(frozen=True)
class ModelParams:
    d: int
    k: int
    p: float
    q: float

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 2:
            raise ValueError(f"d must be an integer >= 2, got {self.d!r}")
        if self.d > 255:
            raise ValueError("d > 255 is not representable in the edge byte layout")
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k!r}")
        for name in ("p", "q"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


def check_vertex(u: Iterable[int], d: int) -> Vertex:
    """Return ``u`` as a vertex tuple, raising ValueError on a bad label."""
    u = tuple(u)
    for a in u:
        if not isinstance(a, int) or not 1 <= a <= d:
            raise ValueError(f"label {a!r} outside [1, {d}]")
    return u


def format_vertex(u: Vertex) -> str:
    return "o" if not u else ".".join(map(str, u))


def parse_vertex(text: str) -> Vertex:
    text = text.strip()
    if text in ("o", ""):
        return ROOT
    return tuple(int(part) for part in text.split("."))


def vertex_key(u: Vertex):
    """Total order by (depth, labels)."""
    return (len(u), u)


def concat(u: Vertex, v: Vertex) -> Vertex:
    return u + v


def ancestry(u: Vertex, w: Vertex) -> Optional[int]:
    """Distance from ``u`` down to ``w``, or None if ``w`` is not below ``u``."""
    n = len(u)
    if len(w) < n or w[:n] != u:
        return None
    return len(w) - n


def in_progeny(u: Vertex, w: Vertex) -> bool:
    return len(w) >= len(u) and w[: len(u)] == u


def shift(u: Vertex, w: Vertex) -> Vertex:
    """Strip the prefix ``u`` from ``w``."""
    if not in_progeny(u, w):
        raise ValueError(f"{format_vertex(w)} is not in the progeny of {format_vertex(u)}")
    return w[len(u):]


def ancestors(u: Vertex) -> Iterable[Vertex]:
    """All prefixes of ``u``, root first, ``u`` included."""
    return (u[:i] for i in range(len(u) + 1))


def short_edge(u: Vertex, a: int) -> Edge:
    return Edge(u, (a,), Kind.SHORT)


def long_edge(u: Vertex, r: Tuple[int, ...]) -> Edge:
    return Edge(u, tuple(r), Kind.LONG)


def check_edge(e: Edge, d: int, k: int) -> Edge:
    if not isinstance(e, Edge):
        raise TypeError(f"expected Edge, got {type(e).__name__}")
    check_vertex(e.tail, d)
    check_vertex(e.suffix, d)
    want = 1 if e.kind == Kind.SHORT else k
    if len(e.suffix) != want:
        raise ValueError(f"{e.kind.name.lower()} edge needs a suffix of length {want}, got {len(e.suffix)}")
    return e


def trace(e: Edge) -> list:
    """The chain of short edges running alongside the long edge ``e``."""
    if e.kind != Kind.LONG:
        raise ValueError("trace is defined for long edges only")
    u, r = e.tail, e.suffix
    return [Edge(u + r[:j], (r[j],), Kind.SHORT) for j in range(len(r))]


@lru_cache(maxsize=None)
def words(d: int, n: int) -> Tuple[Vertex, ...]:
    """All of [d]^n in lexicographic order."""
    return tuple(itertools.product(range(1, d + 1), repeat=n))


def words_up_to(d: int, n: int) -> Tuple[Vertex, ...]:
    """All words of length 0..n, ordered by (length, labels)."""
    return tuple(w for m in range(n + 1) for w in words(d, m))


def anchor(members: Iterable[Vertex]) -> Vertex:
    """Longest common prefix of ``members`` (root for an empty set)."""
    members = list(members)
    if not members:
        return ROOT
    lo, hi = min(members), max(members)
    i = 0
    while i < len(lo) and i < len(hi) and lo[i] == hi[i]:
        i += 1
    return lo[:i]


@dataclass(frozen=True)
class SeedSet:
    """A finite vertex set lying within ``k`` levels below a common anchor."""

    members: frozenset
    anchor: Vertex

    @classmethod
    def of(cls, members: Iterable[Iterable[int]], k: int, d: Optional[int] = None) -> "SeedSet":
        ms = frozenset(tuple(m) if d is None else check_vertex(m, d) for m in members)
        w = anchor(ms)
        depth = max((len(m) for m in ms), default=len(w))
        if depth - len(w) > k:
            raise ValueError(
                f"seed set spans {depth - len(w)} levels below its anchor "
                f"{format_vertex(w)}, more than k={k}"
            )
        return cls(ms, w)

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

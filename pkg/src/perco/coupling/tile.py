"""Finite-tile couplings that trade one parameter against the other.

A tile is the set of short and long edges whose tail lies at depth < 2k.
``tile_J(A, tile)`` is the set of vertices at depth >= 2k reached from A by
open tile edges.

Two variants are built on ``ProductCoupling``:

``q-compensates-p``
    layers (short, long1, long2) with probabilities (p, q, (q'-q)/(1-q))
    for X and (p', q, (q'-q)/(1-q)) for Y, where p' < p0 < p.  The tiles
    are omega = (X_short, X_long1) and omega' = (Y_short, Y_long1 or Y_long2).
``p-compensates-q``
    layers (long, short1, short2) with probabilities (q, p, (p'-p)/(1-p))
    for X and (q', p, (p'-p)/(1-p)) for Y, where q' < q0 < q.  The tiles are
    omega = (X_short1, X_long) and omega' = (Y_short1 or Y_short2, Y_long).

The distinguished point makes J empty when X takes it and makes J as large
as possible when Y takes it, so J(omega) is contained in J(omega') whatever
the coupling outputs.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Tuple

from ..tree import Edge, Kind, Vertex, words, words_up_to
from .laws import LawsTooFarApart, ProductCoupling, classify

VARIANTS = ("q-compensates-p", "p-compensates-q")


@lru_cache(maxsize=None)
def tile_edges(d: int, k: int) -> Tuple[Tuple[Edge, ...], Tuple[Edge, ...]]:
    """(short, long) tile edges, ordered by (tail depth, tail, suffix)."""
    tails = words_up_to(d, 2 * k - 1)
    short = tuple(Edge(u, (a,), Kind.SHORT) for u in tails for a in range(1, d + 1))
    long_ = tuple(Edge(u, r, Kind.LONG) for u in tails for r in words(d, k))
    return short, long_


def admissible_sets(d: int, k: int) -> List[FrozenSet[Vertex]]:
    """Every subset of the vertices at depth < k."""
    pts = words_up_to(d, k - 1)
    return [frozenset(c) for m in range(len(pts) + 1) for c in itertools.combinations(pts, m)]


@dataclass(frozen=True)
class TileConfig:
    d: int
    k: int
    short: Tuple[int, ...]
    long: Tuple[int, ...]

    def __post_init__(self):
        s, l = tile_edges(self.d, self.k)
        if len(self.short) != len(s) or len(self.long) != len(l):
            raise ValueError("state vectors do not match the tile edge sets")

    def states(self) -> Dict[Edge, int]:
        s, l = tile_edges(self.d, self.k)
        return {**dict(zip(s, self.short)), **dict(zip(l, self.long))}

    def __ge__(self, other: "TileConfig") -> bool:
        return all(a >= b for a, b in zip(self.short + self.long, other.short + other.long))

    def adjacency(self) -> Dict[Vertex, List[Vertex]]:
        adj: Dict[Vertex, List[Vertex]] = {}
        s, l = tile_edges(self.d, self.k)
        for e, st in itertools.chain(zip(s, self.short), zip(l, self.long)):
            if st:
                adj.setdefault(e.tail, []).append(e.head)
        return adj


def tile_J(A, tile: TileConfig, adj=None) -> FrozenSet[Vertex]:
    k = tile.k
    A = [tuple(a) for a in A]
    for a in A:
        if len(a) >= k or any(not 1 <= x <= tile.d for x in a):
            raise ValueError(f"seed {a} is not a vertex at depth < k")
    adj = tile.adjacency() if adj is None else adj
    seen = set(A)
    stack = list(A)
    out = set()
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if len(v) >= 2 * k:
                out.add(v)
            elif v not in seen:
                seen.add(v)
                stack.append(v)
    return frozenset(out)


def special_point(variant: str, d: int, k: int):
    """The distinguished outcome, layers ordered as in the product coupling."""
    s, l = tile_edges(d, k)
    if variant == VARIANTS[0]:
        shorts = tuple(0 if len(e.tail) == 2 * k - 1 else 1 for e in s)
        return (shorts, (0,) * len(l), (1,) * len(l))
    if variant == VARIANTS[1]:
        longs = tuple(1 if k <= len(e.tail) <= 2 * k - 1 else 0 for e in l)
        return (longs, (0,) * len(s), (1,) * len(s))
    raise ValueError(f"unknown variant {variant!r}")


def _or(x, y):
    return tuple(a | b for a, b in zip(x, y))


@dataclass(frozen=True)
class TileSample:
    X: tuple
    Y: tuple
    event: str
    omega: TileConfig
    omega_prime: TileConfig


class TileCoupling:
    """Coupled tiles for one variant.

    ``center`` is p0 (first variant) or q0 (second); ``lo`` < ``hi`` is the
    pair (q, q') or (p, p') of the compensating parameter; ``delta`` is the
    symmetric perturbation of the centre.
    """

    def __init__(self, variant: str, center: float, lo: float, hi: float, d: int, k: int,
                 delta: Optional[float] = None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if not (0 < center < 1 and 0 < lo < hi < 1):
            raise ValueError("need 0 < center < 1 and 0 < lo < hi < 1")
        self.variant, self.center, self.lo, self.hi, self.d, self.k = variant, center, lo, hi, d, k
        self.max_delta = feasibility_window(variant, center, lo, hi, d, k)
        if delta is None:
            delta = self.max_delta / 2
        if not 0 < delta <= self.max_delta:
            raise LawsTooFarApart(
                f"validity window empty at perturbation {delta!r}; "
                f"maximal feasible perturbation is {self.max_delta!r}"
            )
        self.delta = delta
        self.coupling = _build(variant, center, lo, hi, d, k, delta)
        self.coupling.check()

    @property
    def parameters(self) -> dict:
        c, dl = self.center, self.delta
        if self.variant == VARIANTS[0]:
            return dict(p=c + dl, q=self.lo, p_prime=c - dl, q_prime=self.hi)
        return dict(p=self.lo, q=c + dl, p_prime=self.hi, q_prime=c - dl)

    def tiles(self, X, Y) -> Tuple[TileConfig, TileConfig]:
        d, k = self.d, self.k
        if self.variant == VARIANTS[0]:
            return TileConfig(d, k, X[0], X[1]), TileConfig(d, k, Y[0], _or(Y[1], Y[2]))
        return TileConfig(d, k, X[1], X[0]), TileConfig(d, k, _or(Y[1], Y[2]), Y[0])

    def sample(self, rng: random.Random) -> TileSample:
        X, Y = self.coupling.sample(rng)
        w, w2 = self.tiles(X, Y)
        return TileSample(X, Y, classify(X, Y, self.coupling.y), w, w2)


def _build(variant, center, lo, hi, d, k, delta) -> ProductCoupling:
    s, l = tile_edges(d, k)
    ns, nl = len(s), len(l)
    y = special_point(variant, d, k)
    extra = (hi - lo) / (1 - lo)
    if variant == VARIANTS[0]:
        return ProductCoupling(ns, center + delta, center - delta, [(nl, lo), (nl, extra)], y)
    return ProductCoupling(nl, center + delta, center - delta, [(ns, lo), (ns, extra)], y)


def feasibility_window(variant, center, lo, hi, d, k, iters: int = 200) -> float:
    """Largest symmetric perturbation delta with a nonnegative residual."""
    top = min(center, 1 - center)
    lo_d, hi_d = 0.0, top
    if _build(variant, center, lo, hi, d, k, top * (1 - 1e-12)).feasible:
        return top * (1 - 1e-12)
    for _ in range(iters):
        mid = 0.5 * (lo_d + hi_d)
        if _build(variant, center, lo, hi, d, k, mid).feasible:
            lo_d = mid
        else:
            hi_d = mid
    if center + lo_d == center or center - lo_d == center:
        raise LawsTooFarApart(
            f"validity window below double resolution at centre {center} "
            f"(maximal feasible perturbation {lo_d!r})"
        )
    return lo_d


def tile_coupling_sample(variant, center, lo, hi, d, k, seed, delta=None):
    """One coupled pair (omega, omega') from a seeded generator."""
    tc = TileCoupling(variant, center, lo, hi, d, k, delta)
    smp = tc.sample(random.Random(seed))
    return smp.omega, smp.omega_prime


def tile_violations(smp: TileSample, sets=None) -> List[tuple]:
    """Samples outside the three events, or seeds A with J(omega) not in J(omega')."""
    d, k = smp.omega.d, smp.omega.k
    bad = []
    if smp.event == "NONE":
        bad.append(("event", None))
    adj, adj2 = smp.omega.adjacency(), smp.omega_prime.adjacency()
    for A in admissible_sets(d, k) if sets is None else sets:
        if not tile_J(A, smp.omega, adj) <= tile_J(A, smp.omega_prime, adj2):
            bad.append(("J", A))
    return bad

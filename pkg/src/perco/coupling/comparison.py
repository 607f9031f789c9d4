"""Coupling of exit sets for ranges k and k + 1.

For ``b`` a subset of {1..k}, a draw from A_{q,k}(b) keeps each word of
U = union_{i in b} [d]^{k-i} independently with probability q.  A draw from
A_{q',k+1}(b) splits by first letter into d independent draws from
A_{q',k}(b).  Coupling X_1..X_d (at q) with Y_1..Y_d (at q') through the
three-outcome construction, with distinguished point (empty, U, ..., U), and
setting A = X_1 and B = union_a a.Y_a gives A below B up to shifts:

    X = Y       A equals the shift of B under (1)
    X = y       A is empty
    Y = y       the section of B under (2) is all of U

When k + 1 is in b' the root is added to B with probability q' on its own.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Optional, Tuple

from ..tree import ROOT, Vertex, in_progeny, shift, words
from .laws import FiniteLaw, LawsTooFarApart, ProductCoupling, classify

GRANULARITY = 1e-4
MIN_RESIDUAL = 1e-9
EXACT_MAX_WORDS = 20
ENUM_MAX_BITS = 20


def support_words(d: int, k: int, b: Iterable[int]) -> Tuple[Vertex, ...]:
    """union_{i in b} [d]^{k-i}, by (length, labels)."""
    b = sorted(set(b), reverse=True)
    return tuple(w for i in b for w in words(d, k - i))


def _check_b(b, top):
    b = frozenset(b)
    if any(not 1 <= i <= top for i in b):
        raise ValueError(f"b must be a subset of 1..{top}")
    return b


def precedes(A, B, u: Vertex, v: Vertex) -> bool:
    """Whether (u, v) witnesses A below B: A in prog(u), shift_u(A) in shift_v(B & prog(v))."""
    if not all(in_progeny(u, a) for a in A):
        return False
    right = {shift(v, x) for x in B if in_progeny(v, x)}
    return {shift(u, a) for a in A} <= right


def law_of_sets(q: float, points: Tuple[Vertex, ...]) -> FiniteLaw:
    """Each point kept independently with probability q (enumerated)."""
    if len(points) > ENUM_MAX_BITS:
        raise ValueError("too many points to enumerate")
    out, probs = [], []
    for bits in itertools.product((0, 1), repeat=len(points)):
        out.append(frozenset(p for p, keep in zip(points, bits) if keep))
        j = sum(bits)
        probs.append(q**j * (1 - q) ** (len(points) - j))
    return FiniteLaw(tuple(out), tuple(probs))


def _product(q: float, q2: float, d: int, m: int) -> ProductCoupling:
    y = ((0,) * m + (1,) * ((d - 1) * m),)
    return ProductCoupling(d * m, q, q2, [], y)


def residual_at(q: float, q2: float, d: int, k: int, b) -> float:
    return _product(q, q2, d, len(support_words(d, k, b))).residual


def select_q_prime(q: float, k: int, d: int, b, granularity: float = GRANULARITY,
                   floor: float = MIN_RESIDUAL) -> float:
    """Smallest grid value q' < q whose coupling residual is at least ``floor``.

    The feasible q' form an interval ending at q, so this is the edge of the
    window, rounded towards q onto multiples of ``granularity``.  If the
    window is narrower than one grid step the grid is refined tenfold until
    a point fits (down to 1e-12).
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    m = len(support_words(d, k, b))
    g = granularity
    while g >= 1e-12:
        top = math.ceil(q / g) - 1  # largest i with i * g < q
        if m == 0 and top >= 1:
            return g
        if top >= 1 and _product(q, top * g, d, m).residual >= floor:
            return _grid_edge(q, d, m, g, top, floor)
        g /= 10
    raise LawsTooFarApart(f"no feasible q' below q={q} on any grid down to 1e-12")


def _grid_edge(q, d, m, g, top, floor):
    def ok(i):
        return _product(q, i * g, d, m).residual >= floor

    if ok(1):
        return g
    lo, hi = 1, top  # lo infeasible, hi feasible
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return round(hi * g, 15)


def joint_q_prime(q: float, k: int, d: int, granularity: float = GRANULARITY) -> float:
    """One q' valid for every nonempty b in {1..k}."""
    best = granularity
    for r in range(1, k + 1):
        for b in itertools.combinations(range(1, k + 1), r):
            best = max(best, select_q_prime(q, k, d, b, granularity))
    return best


@dataclass(frozen=True)
class ComparisonSample:
    A: FrozenSet[Vertex]
    B: FrozenSet[Vertex]
    event: str
    u: Vertex
    v: Vertex
    witness_ok: bool


WITNESS = {"EQ": (ROOT, (1,)), "XSTAR": (ROOT, ROOT), "YSTAR": (ROOT, (2,))}


class ComparisonCoupling:
    def __init__(self, q: float, k: int, d: int, b_prime, q_prime: Optional[float] = None,
                 mode: str = "exact"):
        if mode not in ("exact", "sampled"):
            raise ValueError("mode must be 'exact' or 'sampled'")
        self.b_prime = _check_b(b_prime, k + 1)
        self.b = self.b_prime & frozenset(range(1, k + 1))
        self.q, self.k, self.d = q, k, d
        self.U = support_words(d, k, self.b)
        if mode == "exact" and len(self.U) > EXACT_MAX_WORDS:
            raise ValueError(
                f"per-child outcome space has {len(self.U)} words (> {EXACT_MAX_WORDS}); "
                "use mode='sampled'"
            )
        self.q_prime = select_q_prime(q, k, d, self.b) if q_prime is None else q_prime
        if not (0 <= self.q_prime < q or q == self.q_prime == 0):
            raise ValueError("need 0 <= q' < q")
        self.extra = (k + 1) in self.b_prime
        self.product = _product(q, self.q_prime, d, len(self.U))
        self.product.check()

    def _sets(self, X, Y):
        m, U = len(self.U), self.U
        A = frozenset(U[i] for i in range(m) if X[0][i])
        B = frozenset((a + 1,) + U[i] for a in range(self.d) for i in range(m) if Y[0][a * m + i])
        return A, B

    def sample(self, rng: random.Random) -> ComparisonSample:
        X, Y = self.product.sample(rng)
        A, B = self._sets(X, Y)
        if self.extra and rng.random() < self.q_prime:
            B = B | {ROOT}
        event = classify(X, Y, self.product.y)
        u, v = WITNESS.get(event, (ROOT, ROOT))
        return ComparisonSample(A, B, event, u, v, event != "NONE" and precedes(A, B, u, v))

    def joint_law(self) -> Dict[Tuple[FrozenSet, FrozenSet], float]:
        """Exact law of (A, B) by enumerating the product space."""
        bits = self.product.n + (1 if self.extra else 0)
        if bits > ENUM_MAX_BITS:
            raise ValueError(f"2^{bits} outcomes is too many to enumerate")
        pts = list(self.product.space())
        out: Dict[Tuple[FrozenSet, FrozenSet], float] = {}
        for x in pts:
            for z in pts:
                w = self.product.joint_prob(x, z)
                if w <= 0:
                    continue
                A, B = self._sets(x, z)
                branches = [(B | {ROOT}, self.q_prime), (B, 1 - self.q_prime)] if self.extra else [(B, 1.0)]
                for BB, f in branches:
                    if w * f > 0:
                        out[(A, BB)] = out.get((A, BB), 0.0) + w * f
        return out

    def target_laws(self) -> Tuple[FiniteLaw, FiniteLaw]:
        """A_{q,k}(b) and A_{q',k+1}(b') enumerated from their definitions."""
        return (law_of_sets(self.q, self.U),
                law_of_sets(self.q_prime, support_words(self.d, self.k + 1, self.b_prime)))


def comparison_coupling(q: float, k: int, d: int, b_prime, q_prime=None, mode="exact"):
    """q' and a coupling whose samples carry a checked witness."""
    c = ComparisonCoupling(q, k, d, b_prime, q_prime, mode)
    return c.q_prime, c

"""Finite laws and the three-outcome coupling.

Given laws P_a, P_b on one finite space and a distinguished point y, the
coupling puts mass

    min(P_a(z), P_b(z))    on (z, z),  z != y
    (P_b(z) - P_a(z))+     on (y, z),  z != y
    (P_a(z) - P_b(z))+     on (z, y),  z != y
    1 - sum_{z != y} max(P_a(z), P_b(z))   on (y, y)

so X = Y unless one of them equals y.  The last weight is the residual; it
must be nonnegative, which holds when both laws are close to a common law
giving y positive mass.

``ProductCoupling`` does the same on a product of Bernoulli layers where
only one layer differs between the two laws, without enumerating the space.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, List, Sequence, Tuple

TOL = 1e-12


class LawsTooFarApart(ValueError):
    """The residual mass of the coupling is negative."""


@dataclass(frozen=True)
class FiniteLaw:
    outcomes: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.outcomes) != len(self.probs):
            raise ValueError("outcomes and probs differ in length")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise ValueError("duplicate outcomes")
        if any(p < 0 for p in self.probs):
            raise ValueError("negative probability")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", tuple(p / total for p in self.probs))

    @classmethod
    def from_dict(cls, d: Dict[Hashable, float]) -> "FiniteLaw":
        keys = list(d)
        return cls(tuple(keys), tuple(d[x] for x in keys))

    def prob(self, z) -> float:
        try:
            return self.probs[self.outcomes.index(z)]
        except ValueError:
            return 0.0

    def as_dict(self) -> Dict[Hashable, float]:
        return dict(zip(self.outcomes, self.probs))


def residual(Pa: FiniteLaw, Pb: FiniteLaw, y) -> float:
    a, b = Pa.as_dict(), Pb.as_dict()
    space = set(a) | set(b)
    return 1.0 - math.fsum(max(a.get(z, 0.0), b.get(z, 0.0)) for z in space if z != y)


def enhance_coupling(Pa: FiniteLaw, Pb: FiniteLaw, y) -> Dict[Tuple, float]:
    """Joint law of (X, Y) as a dict {(x, y): mass}; zero masses are dropped."""
    a, b = Pa.as_dict(), Pb.as_dict()
    space = list(dict.fromkeys(list(Pa.outcomes) + list(Pb.outcomes)))
    if y not in space:
        raise ValueError(f"distinguished point {y!r} is not an outcome")
    r = residual(Pa, Pb, y)
    if r < -TOL:
        raise LawsTooFarApart(f"laws too far apart: residual mass {r:.3e} < 0")
    joint: Dict[Tuple, float] = {}

    def put(key, w):
        if w > 0:
            joint[key] = joint.get(key, 0.0) + w

    for z in space:
        if z == y:
            continue
        pa, pb = a.get(z, 0.0), b.get(z, 0.0)
        put((z, z), min(pa, pb))
        put((y, z), max(pb - pa, 0.0))
        put((z, y), max(pa - pb, 0.0))
    put((y, y), max(r, 0.0))
    return joint


def marginals(joint: Dict[Tuple, float]):
    mx: Dict = {}
    my: Dict = {}
    for (x, z), w in joint.items():
        mx[x] = mx.get(x, 0.0) + w
        my[z] = my.get(z, 0.0) + w
    return mx, my


def max_marginal_error(joint, Pa: FiniteLaw, Pb: FiniteLaw) -> float:
    mx, my = marginals(joint)
    err = 0.0
    for law, m in ((Pa, mx), (Pb, my)):
        for z in set(law.outcomes) | set(m):
            err = max(err, abs(law.prob(z) - m.get(z, 0.0)))
    return err


def support_violations(joint, y) -> List[Tuple]:
    """Support points with X != Y and neither equal to y."""
    return [(x, z) for (x, z), w in joint.items() if w > 0 and x != z and x != y and z != y]


# ----------------------------------------------------------- product spaces


def _pmf(a: float, n: int, j: int) -> float:
    """a^j (1-a)^(n-j), with 0^0 = 1."""
    return (a**j if j else 1.0) * ((1.0 - a) ** (n - j) if n - j else 1.0)


class ProductCoupling:
    """Three-outcome coupling on {0,1}^D x prod_i {0,1}^{C_i}.

    Under both laws the coordinates are independent; the ``D`` layer is
    Bernoulli(a) under the first law and Bernoulli(b) under the second,
    every common layer ``i`` is Bernoulli(c_i) under both.  Points are tuples
    of layers, each a tuple of 0/1, differing layer first.
    """

    def __init__(self, n: int, a: float, b: float, common: Sequence[Tuple[int, float]], y):
        self.n, self.a, self.b = n, a, b
        self.common = [(int(m), float(c)) for m, c in common]
        self.y = tuple(tuple(int(v) for v in layer) for layer in y)
        if len(self.y) != 1 + len(self.common):
            raise ValueError("y must have one layer per factor")
        sizes = [n] + [m for m, _ in self.common]
        if [len(l) for l in self.y] != sizes:
            raise ValueError("y layer sizes do not match")
        self.j_y = sum(self.y[0])
        self._ca = [math.comb(n, j) * _pmf(a, n, j) for j in range(n + 1)]
        self._cb = [math.comb(n, j) * _pmf(b, n, j) for j in range(n + 1)]
        self.pc_y = math.prod(
            _pmf(c, m, sum(l)) for (m, c), l in zip(self.common, self.y[1:])
        )
        self.pa_y = _pmf(a, n, self.j_y) * self.pc_y
        self.pb_y = _pmf(b, n, self.j_y) * self.pc_y
        # sum over z != y of (P_b - P_a)+, then the (y, y) mass
        gain = math.fsum(max(cb - ca, 0.0) for ca, cb in zip(self._ca, self._cb))
        self.gain = gain - max(self.pb_y - self.pa_y, 0.0)
        self.residual = self.pa_y - self.gain

    @property
    def feasible(self) -> bool:
        return self.residual >= 0.0

    def check(self):
        if not self.feasible:
            raise LawsTooFarApart(f"laws too far apart: residual mass {self.residual:.3e} < 0")

    # exact masses
    def prob_a(self, z) -> float:
        return _pmf(self.a, self.n, sum(z[0])) * self._pc(z)

    def prob_b(self, z) -> float:
        return _pmf(self.b, self.n, sum(z[0])) * self._pc(z)

    def _pc(self, z) -> float:
        return math.prod(_pmf(c, m, sum(l)) for (m, c), l in zip(self.common, z[1:]))

    def joint_prob(self, x, z) -> float:
        y = self.y
        if x == z:
            return max(self.residual, 0.0) if x == y else min(self.prob_a(x), self.prob_b(x))
        if x == y:
            return max(self.prob_b(z) - self.prob_a(z), 0.0)
        if z == y:
            return max(self.prob_a(x) - self.prob_b(x), 0.0)
        return 0.0

    def space(self) -> Iterable[tuple]:
        sizes = [self.n] + [m for m, _ in self.common]
        layers = [list(itertools.product((0, 1), repeat=m)) for m in sizes]
        return itertools.product(*layers)

    def finite_laws(self, max_points: int = 1 << 10):
        """Both laws as FiniteLaw objects (small spaces only)."""
        total = self.n + sum(m for m, _ in self.common)
        if 1 << total > max_points:
            raise ValueError(f"space of 2^{total} points is too large to enumerate")
        pts = list(self.space())
        return (FiniteLaw(tuple(pts), tuple(self.prob_a(z) for z in pts)),
                FiniteLaw(tuple(pts), tuple(self.prob_b(z) for z in pts)))

    # sampling
    def _bern(self, rng: random.Random, m: int, c: float) -> tuple:
        return tuple(1 if rng.random() < c else 0 for _ in range(m))

    def sample(self, rng: random.Random):
        """One draw of (X, Y)."""
        self.check()
        x = (self._bern(rng, self.n, self.a),) + tuple(self._bern(rng, m, c) for m, c in self.common)
        if x != self.y:
            j = sum(x[0])
            ratio = _pmf(self.b, self.n, j) / _pmf(self.a, self.n, j)
            return (x, x) if rng.random() < ratio else (x, self.y)
        if rng.random() * self.pa_y < self.residual:
            return x, x
        weights = [max(cb - ca, 0.0) for ca, cb in zip(self._ca, self._cb)]
        while True:
            j = rng.choices(range(self.n + 1), weights)[0]
            ones = set(rng.sample(range(self.n), j))
            z = (tuple(1 if i in ones else 0 for i in range(self.n)),) + tuple(
                self._bern(rng, m, c) for m, c in self.common
            )
            if z != self.y:
                return x, z


def classify(x, z, y) -> str:
    if x == z:
        return "EQ"
    if x == y:
        return "XSTAR"
    if z == y:
        return "YSTAR"
    return "NONE"

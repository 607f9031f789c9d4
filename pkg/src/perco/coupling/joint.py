"""Joint exploration embedding the range-k cluster into a range-(k+1) cluster.

Both explorations are run in relative frames.  A subproblem is a seed set
``A`` together with two roots; on the k side its vertices are ``root_k . x``
and on the (k+1) side ``root_k1 . x``.  In each subproblem

* the short cluster is explored on the k side and every revealed short edge
  state is copied to the matching (k+1)-side edge;
* for every hub the exit sets are drawn from the comparison coupling: the
  k-side long edges of R are set from A, the (k+1)-side ones from B;
* the witness (u, v) of A below B gives the child subproblem with roots
  ``root_k . h . u`` and ``root_k1 . h . v``.

Pinned states live in ``OverlayConfig`` objects over independent hash
configurations, so every edge never touched by the exploration is still an
independent fresh draw.  The k side is truncated at depth L; the map
``root_k . x -> root_k1 . x`` sends the explored k cluster into the (k+1)
cluster and is checked point by point.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

from ..explorer import DEFAULT_BUDGET, cluster_bfs, explore_short
from ..sampler import ConfigSample, OverlayConfig, derive_seed
from ..tree import ROOT, Edge, Kind, ModelParams, SeedSet, Vertex, shift, words
from .comparison import ComparisonCoupling, joint_q_prime


class _Relative:
    """View of a configuration from ``root``."""

    def __init__(self, cfg, root: Vertex):
        self.cfg, self.root, self.params = cfg, root, cfg.params

    def open_children(self, x):
        return self.cfg.open_children(self.root + x)

    def open_long(self, x):
        return self.cfg.open_long(self.root + x)


@dataclass(frozen=True)
class Level:
    """One coupled hub: absolute hub head on each side, the witness and event."""

    head_k: Vertex
    head_k1: Vertex
    u: Vertex
    v: Vertex
    event: str
    A: frozenset
    B: frozenset
    witness_ok: bool


@dataclass
class EmbeddingWitness:
    levels: List[Level] = field(default_factory=list)
    phi: Dict[Vertex, Vertex] = field(default_factory=dict)

    @property
    def pairs(self):
        return [(lv.u, lv.v) for lv in self.levels]

    def verify(self, cluster_k: Set[Vertex], cluster_k1: Set[Vertex]) -> List[str]:
        bad = []
        if set(self.phi) != cluster_k:
            bad.append(f"domain differs from the k cluster ({len(self.phi)} vs {len(cluster_k)})")
        if len(set(self.phi.values())) != len(self.phi):
            bad.append("map is not injective")
        missing = [x for x, y in self.phi.items() if y not in cluster_k1]
        if missing:
            bad.append(f"{len(missing)} images outside the (k+1) cluster")
        if any(len(y) < len(x) for x, y in self.phi.items()):
            bad.append("an image is shallower than its source")
        n = sum(1 for lv in self.levels if not lv.witness_ok)
        if n:
            bad.append(f"{n} comparison witnesses failed")
        return bad


@dataclass
class JointResult:
    cluster_k: Set[Vertex]
    cluster_k1: Set[Vertex]
    witness: EmbeddingWitness
    q_prime: float
    L: int
    budget_hit: bool
    violations: List[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def survives_k(self) -> bool:
        return any(len(x) >= self.L for x in self.cluster_k)

    def survives_k1(self) -> bool:
        return any(len(x) >= self.L for x in self.cluster_k1)


def joint_exploration(
    p: float,
    q: float,
    k: int,
    d: int,
    seed: int,
    L: int = 15,
    budget: int = DEFAULT_BUDGET,
    q_prime: Optional[float] = None,
) -> JointResult:
    if q_prime is None:
        q_prime = 0.0 if q == 0 else joint_q_prime(q, k, d)
    base_k = ConfigSample(ModelParams(d, k, p, q), derive_seed(seed, 0))
    base_k1 = ConfigSample(ModelParams(d, k + 1, p, q_prime), derive_seed(seed, 1))
    rng = random.Random(derive_seed(seed, 2))
    wk, wk1 = OverlayConfig(base_k), OverlayConfig(base_k1)
    couplings: Dict[frozenset, ComparisonCoupling] = {}
    witness = EmbeddingWitness()
    phi = witness.phi
    extra: List[str] = []
    explored = 0
    hit = False

    stack = [(frozenset({ROOT}), ROOT, ROOT)]
    while stack:
        seeds, rk, rk1 = stack.pop()
        limit = L - len(rk)
        sc = explore_short(_Relative(wk, rk), SeedSet.of(seeds, k), max(budget - explored, len(seeds)), limit)
        explored += len(sc.pi)
        if sc.budget_hit or explored > budget:
            hit = True
            break
        for x in sc.pi:
            if rk + x in phi:
                extra.append(f"vertex {rk + x} explored twice")
            phi[rk + x] = rk1 + x
            if len(x) < limit:
                opened = wk.open_children(rk + x)
                for a in range(1, d + 1):
                    wk1.pin(Edge(rk1 + x, (a,), Kind.SHORT), a in opened)
        for h in sc.hubs:
            v = h.head
            n = len(v)
            if len(rk) + n > L:
                continue
            b_prime = frozenset(i for i in range(1, k + 2) if n - i >= 0 and v[: n - i] in sc.pi)
            cc = couplings.get(b_prime)
            if cc is None:
                cc = couplings[b_prime] = ComparisonCoupling(q, k, d, b_prime, q_prime, mode="sampled")
            smp = cc.sample(rng)
            for i in sorted(cc.b):
                tail, stem = v[: n - i], v[n - i:]
                for w in words(d, k - i):
                    wk.pin(Edge(rk + tail, stem + w, Kind.LONG), w in smp.A)
                    for a in range(1, d + 1):
                        wk1.pin(Edge(rk1 + tail, stem + (a,) + w, Kind.LONG), (a,) + w in smp.B)
            if cc.extra:
                wk1.pin(Edge(rk1 + v[: n - k - 1], v[n - k - 1:], Kind.LONG), ROOT in smp.B)
            witness.levels.append(
                Level(rk + v, rk1 + v, smp.u, smp.v, smp.event, smp.A, smp.B, smp.witness_ok))
            child = frozenset(shift(smp.u, a) for a in smp.A if len(rk) + n + len(a) <= L)
            if child:
                stack.append((child, rk + v + smp.u, rk1 + v + smp.v))

    cluster_k = cluster_bfs(wk, [ROOT], L, budget)
    depth_k1 = max([L] + [len(y) for y in phi.values()])
    cluster_k1 = cluster_bfs(wk1, [ROOT], depth_k1, budget)
    hit = hit or cluster_k.budget_hit or cluster_k1.budget_hit
    violations = extra + witness.verify(cluster_k.vertices, cluster_k1.vertices)
    if hit:
        violations.append("budget exhausted")
    return JointResult(cluster_k.vertices, cluster_k1.vertices, witness, q_prime, L, hit, violations)

"""Cluster exploration on T_{d,k}.

``explore_short`` grows the short-edge cluster pi(A) and finds its hubs,
``explore`` adds the exit sets of every hub, and ``recursive_cluster``
applies both steps recursively to the revealed exit sets.  ``cluster_bfs``
is the plain breadth-first search the recursion is checked against.

Every function takes an optional ``depth_limit``.  Edges whose head lies
deeper than the limit are treated as closed and never queried, so a
truncated exploration is an exact exploration of the truncated
configuration.

Configurations are duck-typed: anything with ``params``, ``open_children``,
``open_long`` and ``state_unchecked`` works (see ``sampler``).
"""

from __future__ import annotations

import heapq
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Set

from .tree import (
    Edge,
    Kind,
    SeedSet,
    Vertex,
    ancestors,
    format_vertex,
    trace,
    vertex_key,
    words,
)

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10**6
DEFAULT_DEPTH = 30

TraceSink = Callable[[str], None]


class NotAHubError(ValueError):
    pass


@dataclass
class ShortCluster:
    seeds: SeedSet
    pi: Set[Vertex]
    hubs: List[Edge]
    budget_hit: bool = False


@dataclass(frozen=True)
class HubExit:
    hub: Edge
    beta: tuple
    R: tuple
    S_bar: frozenset
    S: frozenset


@dataclass
class ExplorationRecord:
    seeds: SeedSet
    pi: Set[Vertex]
    hubs: List[Edge]
    exits: Dict[Edge, HubExit]
    budget_hit: bool = False


@dataclass
class ClusterResult:
    vertices: Set[Vertex]
    budget_hit: bool = False
    parts: List[Set[Vertex]] = field(default_factory=list)
    records: List[ExplorationRecord] = field(default_factory=list)

    def max_depth(self) -> int:
        return max((len(u) for u in self.vertices), default=-1)


def _seedset(cfg, A) -> SeedSet:
    if isinstance(A, SeedSet):
        return A
    return SeedSet.of(A, cfg.params.k, cfg.params.d)


def _edge_line(e: Edge, state: bool) -> str:
    kind = "short" if e.kind == Kind.SHORT else "long"
    return f"{len(e.tail)},{kind},{format_vertex(e.tail)},{format_vertex(e.suffix)},{int(state)}"


def explore_short(
    cfg,
    A,
    budget: int = DEFAULT_BUDGET,
    depth_limit: Optional[int] = None,
    sink: Optional[TraceSink] = None,
) -> ShortCluster:
    """Step 1: reveal pi(A) edge by edge and collect the hubs sigma(A).

    Vertices are expanded in (depth, labels) order.  A short edge <u, v> is a
    hub iff u lies in the ancestral hull of pi(A) and v does not; the hull is
    pi(A) together with every ancestor of a seed, so hubs are detected as
    soon as the closed edge is seen.
    """
    A = _seedset(cfg, A)
    if budget < len(A):
        raise ValueError(f"budget {budget} smaller than the seed set ({len(A)})")
    d = cfg.params.d
    seed_hull = {w for a in A for w in ancestors(a)}
    pi = set(A.members)
    heap = [(len(u), u) for u in pi]
    heapq.heapify(heap)
    hubs: List[Edge] = []
    hit = False

    while heap and not hit:
        _, u = heapq.heappop(heap)
        if depth_limit is not None and len(u) + 1 > depth_limit:
            opened = ()
            revealed = False
        else:
            opened = cfg.open_children(u)
            revealed = True
        for a in range(1, d + 1):
            c = u + (a,)
            is_open = a in opened
            if revealed and sink is not None:
                sink(_edge_line(Edge(u, (a,), Kind.SHORT), is_open))
            if is_open:
                if c not in pi:
                    if len(pi) >= budget:
                        hit = True
                        break
                    pi.add(c)
                    heapq.heappush(heap, (len(c), c))
            elif c not in seed_hull:
                hubs.append(Edge(u, (a,), Kind.SHORT))

    # side branches hanging off ancestors of the seeds that pi never entered
    for u in seed_hull - pi:
        for a in range(1, d + 1):
            c = u + (a,)
            if c not in seed_hull and c not in pi:
                hubs.append(Edge(u, (a,), Kind.SHORT))
    hubs.sort(key=lambda e: vertex_key(e.head))
    return ShortCluster(A, pi, hubs, hit)


def is_hub(pi: Set[Vertex], e: Edge) -> bool:
    """Direct check of the hub definition against a (finite) pi."""
    if e.kind != Kind.SHORT:
        return False
    u, v = e.tail, e.head
    lu, lv = len(u), len(v)
    below_u = below_v = False
    for x in pi:
        if x[:lu] == u and len(x) >= lu:
            below_u = True
            if len(x) >= lv and x[:lv] == v:
                below_v = True
                break
    return below_u and not below_v


def _exit_sets(cfg, pi, hub: Edge, depth_limit: Optional[int], sink=None) -> HubExit:
    d, k = cfg.params.d, cfg.params.k
    v = hub.head
    n = len(v)
    beta = tuple(i for i in range(1, k + 1) if n - i >= 0 and v[: n - i] in pi)
    R = []
    S_bar = set()
    S = set()
    for i in beta:
        tail = v[: n - i]
        stem = v[n - i:]
        for w in words(d, k - i):
            e = Edge(tail, stem + w, Kind.LONG)
            head = v + w
            R.append(e)
            S_bar.add(head)
            if depth_limit is not None and len(head) > depth_limit:
                continue
            state = cfg.state_unchecked(e)
            if sink is not None:
                sink(_edge_line(e, state))
            if state:
                S.add(head)
    return HubExit(hub, beta, tuple(R), frozenset(S_bar), frozenset(S))


def exit_sets(cfg, pi: Iterable[Vertex], e: Edge, depth_limit: Optional[int] = None) -> HubExit:
    """Step 2 for one hub: (beta, R, S_bar, S)."""
    pi = pi if isinstance(pi, (set, frozenset)) else set(pi)
    if not is_hub(pi, e):
        raise NotAHubError(f"{e} is not a hub for the given pi")
    return _exit_sets(cfg, pi, e, depth_limit)


def explore(
    cfg,
    A,
    budget: int = DEFAULT_BUDGET,
    depth_limit: Optional[int] = None,
    sink: Optional[TraceSink] = None,
) -> ExplorationRecord:
    """Steps 1 and 2 for the seed set A."""
    sc = explore_short(cfg, A, budget, depth_limit, sink)
    exits = {}
    if not sc.budget_hit:
        for h in sc.hubs:
            exits[h] = _exit_sets(cfg, sc.pi, h, depth_limit, sink)
    return ExplorationRecord(sc.seeds, sc.pi, sc.hubs, exits, sc.budget_hit)


def recursive_cluster(
    cfg,
    A,
    depth_limit: Optional[int] = DEFAULT_DEPTH,
    budget: int = DEFAULT_BUDGET,
    keep_records: bool = False,
) -> ClusterResult:
    """Pi(A) as pi(A) plus the clusters of the exit sets S(A, e), recursively."""
    k = cfg.params.k
    stack = [_seedset(cfg, A)]
    parts: List[Set[Vertex]] = []
    records: List[ExplorationRecord] = []
    total = 0
    hit = False
    while stack:
        seeds = stack.pop()
        remaining = budget - total
        if remaining < len(seeds):
            hit = True
            break
        rec = explore(cfg, seeds, remaining, depth_limit)
        parts.append(rec.pi)
        total += len(rec.pi)
        if keep_records:
            records.append(rec)
        if rec.budget_hit:
            hit = True
            break
        for h in reversed(rec.hubs):
            S = rec.exits[h].S
            if S:
                stack.append(SeedSet.of(S, k))
    vertices: Set[Vertex] = set()
    for part in parts:
        vertices |= part
    return ClusterResult(vertices, hit, parts, records)


def cluster_bfs(
    cfg,
    A,
    depth_limit: Optional[int] = DEFAULT_DEPTH,
    budget: int = DEFAULT_BUDGET,
) -> ClusterResult:
    """All vertices reachable from A through open edges, up to ``depth_limit``."""
    k = cfg.params.k
    seen = set(A)
    queue = deque(sorted(seen, key=vertex_key))
    L = float("inf") if depth_limit is None else depth_limit
    hit = False
    while queue:
        u = queue.popleft()
        n = len(u)
        heads = []
        if n + 1 <= L:
            heads.extend(u + (a,) for a in cfg.open_children(u))
        if n + k <= L:
            heads.extend(u + r for r in cfg.open_long(u))
        for c in heads:
            if c not in seen:
                if len(seen) >= budget:
                    hit = True
                    break
                seen.add(c)
                queue.append(c)
        if hit:
            break
    return ClusterResult(seen, hit)


def level_counts(cfg, n_max: int, budget: int = DEFAULT_BUDGET):
    """N_1..N_{n_max} from one exploration, plus the budget flag.

    N_n counts the u in [d]^{kn} with some u.v, |v| <= k-1, reached from the
    root.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    k = cfg.params.k
    res = cluster_bfs(cfg, [()], k * n_max + k - 1, budget)
    blocks: List[set] = [set() for _ in range(n_max + 1)]
    for x in res.vertices:
        n = len(x) // k
        if 1 <= n <= n_max:
            blocks[n].add(x[: k * n])
    return [len(b) for b in blocks[1:]], res.budget_hit


def level_count(cfg, n: int, budget: int = DEFAULT_BUDGET) -> int:
    counts, hit = level_counts(cfg, n, budget)
    if hit:
        log.warning("level_count: budget of %d vertices exhausted", budget)
    return counts[-1]


@dataclass(frozen=True)
class SurvivalProbe:
    survived: bool
    budget_hit: bool
    visited: int


def probe_survival(cfg, L: int, budget: int = DEFAULT_BUDGET) -> SurvivalProbe:
    """Depth-first search for a reached vertex at depth >= L.

    Long edges are expanded first so surviving clusters are certified
    quickly.  Exhausting the budget counts as survival.
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    if L == 0:
        return SurvivalProbe(True, False, 1)
    k = cfg.params.k
    seen = {()}
    stack = [()]
    while stack:
        u = stack.pop()
        heads = [u + (a,) for a in cfg.open_children(u)]
        heads.extend(u + r for r in cfg.open_long(u))
        for c in heads:
            if len(c) >= L:
                return SurvivalProbe(True, False, len(seen) + 1)
            if c not in seen:
                if len(seen) >= budget:
                    return SurvivalProbe(True, True, len(seen))
                seen.add(c)
                stack.append(c)
    return SurvivalProbe(False, False, len(seen))


def survives(cfg, L: int, budget: int = DEFAULT_BUDGET) -> bool:
    return probe_survival(cfg, L, budget).survived


# Property checks on explored records.  Each returns a list of violations.


def hub_overlaps(hubs: Iterable[Edge]) -> List[tuple]:
    """Pairs of hubs whose progenies intersect."""
    heads = {h.head: h for h in hubs}
    bad = []
    for v, h in heads.items():
        for i in range(len(v)):
            other = heads.get(v[:i])
            if other is not None:
                bad.append((other, h))
    return bad


def trace_hub_violations(record: ExplorationRecord, k: int, d: int) -> List[tuple]:
    """Long edges leaving pi whose trace meets sigma in other than one edge."""
    hubs = set(record.hubs)
    pi = record.pi
    bad = []
    for u in pi:
        for r in words(d, k):
            if u + r in pi:
                continue
            e = Edge(u, r, Kind.LONG)
            n = sum(1 for t in trace(e) if t in hubs)
            if n != 1:
                bad.append((e, n))
    return bad


def decomposition_overlaps(parts: List[Set[Vertex]]) -> int:
    """Number of vertices claimed by more than one part."""
    total = sum(len(p) for p in parts)
    union = set().union(*parts) if parts else set()
    return total - len(union)

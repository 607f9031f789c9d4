"""Monte Carlo estimates of the survival probability and of q_c(p, k).

Trial ``i`` of a run with root seed ``s`` always uses the configuration seed
``derive_seed(s, i)``.  Because edge states threshold one uniform per edge,
estimates taken at different ``(p, q)`` with the same root seed use common
random numbers and are exactly monotone.

Two probe classifiers are available to the bisection on q:

``growth`` (default)
    Compares the number of reached vertices in the depth band
    ``[k n, k n + k - 1]`` at ``n = L // k`` with the same count at a
    shallower band n1.  n1 is the deepest band up to half depth that at least
    ``MIN_REACH`` first-stage trials reach, so far below q_c the comparison
    does not degenerate into 0 - 0.  Its mean grows like rho^n where rho is the Perron root of the
    mean type matrix, so the sign of the mean difference flips at q_c up to
    a transient that decays geometrically in L.  Trials whose cluster
    exceeds ``trial_budget`` vertices are censored at that budget and three
    of them settle the probe as supercritical.

``survival``
    Compares the Wilson interval of the depth-L survival frequency against a
    fixed threshold ``theta_min``.  At L = 30 this lands well below q_c
    (the truncated survival probability at criticality is ~0.1), so it is
    kept only for sensitivity reports.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist
from typing import Callable, List, Optional, Sequence

from .explorer import DEFAULT_BUDGET, DEFAULT_DEPTH, cluster_bfs, probe_survival
from .sampler import ConfigSample, derive_seed
from .tree import ModelParams

log = logging.getLogger(__name__)

THETA_MIN = 0.02
START_TRIALS = 2000
MAX_TRIALS = 32000
DEFAULT_TOL = 0.005
GRID_POINTS = 13
CHUNK = 100
EXPLOSIONS_TO_DECIDE = 3
MIN_REACH = 50


def z_value(conf: float) -> float:
    return NormalDist().inv_cdf(0.5 + conf / 2)


def wilson(successes: int, n: int, conf: float = 0.95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    z = z_value(conf)
    phat = successes / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # guard the rounding at the boundaries
    return min(lo, phat), max(hi, phat)


def gw_survival(m: int, theta: float, tol: float = 1e-12, max_iter: int = 10**7) -> float:
    """Survival probability of a Galton-Watson tree with Binomial(m, theta) offspring.

    Largest fixed point of s = 1 - (1 - theta s)^m, iterated down from s = 1.
    """
    if m < 1 or not 0.0 <= theta <= 1.0:
        raise ValueError("need m >= 1 and theta in [0, 1]")
    if m * theta <= 1.0:
        return 0.0
    s = 1.0
    for _ in range(max_iter):
        nxt = 1.0 - (1.0 - theta * s) ** m
        if abs(nxt - s) < tol:
            return nxt
        s = nxt
    return s


def lower_bound_qc(p: float, d: int, k: int) -> float:
    """Branching-process bound q_c(p, k) >= d^-k - d^(1-k) p."""
    return max(0.0, d ** (-k) - d ** (1 - k) * p)


def _params(p, q, k, d) -> ModelParams:
    return ModelParams(int(d), int(k), float(p), float(q))


# ---------------------------------------------------------------- trial runners
# Top-level functions so they can be shipped to worker processes.


def _survival_chunk(args):
    params, L, budget, seed, start, stop = args
    surv = hits = 0
    for i in range(start, stop):
        res = probe_survival(ConfigSample(params, derive_seed(seed, i)), L, budget)
        surv += res.survived
        hits += res.budget_hit
    return surv, hits


def band_counts(cfg, L: int, trial_budget: int):
    """(W_0..W_n, exploded): reached vertices per depth band [k m, k m + k - 1]."""
    k = cfg.params.k
    n2 = L // k
    res = cluster_bfs(cfg, [()], k * n2 + k - 1, trial_budget)
    if res.budget_hit:
        return None, True
    w = [0] * (n2 + 1)
    for x in res.vertices:
        w[len(x) // k] += 1
    return w, False


def _growth_chunk(args):
    params, L, trial_budget, seed, start, stop = args
    return [band_counts(ConfigSample(params, derive_seed(seed, i)), L, trial_budget)
            for i in range(start, stop)]


def _run(fn: Callable, params, L, budget, seed, start, stop, jobs: int):
    if jobs <= 1 or stop - start <= CHUNK:
        return [fn((params, L, budget, seed, start, stop))]
    bounds = list(range(start, stop, CHUNK)) + [stop]
    tasks = [(params, L, budget, seed, a, b) for a, b in zip(bounds, bounds[1:])]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def default_jobs() -> int:
    return max(1, min(os.cpu_count() or 1, 8))


# ---------------------------------------------------------------------- theta


@dataclass(frozen=True)
class ThetaEstimate:
    d: int
    k: int
    p: float
    q: float
    L: int
    trials: int
    survivals: int
    theta_hat: float
    ci_lo: float
    ci_hi: float
    budget_hits: int
    seed: int

    FIELDS = ("d", "k", "p", "q", "L", "trials", "survivals", "theta_hat", "ci_lo", "ci_hi", "budget_hits", "seed")

    def row(self) -> dict:
        return {f: getattr(self, f) for f in self.FIELDS}


def estimate_theta(
    p: float,
    q: float,
    k: int,
    d: int,
    L: int = DEFAULT_DEPTH,
    trials: int = 10_000,
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
    jobs: int = 1,
    conf: float = 0.95,
) -> ThetaEstimate:
    """Fraction of configurations whose root reaches depth L, with a Wilson CI."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    params = _params(p, q, k, d)
    parts = _run(_survival_chunk, params, L, budget, seed, 0, trials, jobs)
    surv = sum(s for s, _ in parts)
    hits = sum(h for _, h in parts)
    lo, hi = wilson(surv, trials, conf)
    return ThetaEstimate(d, k, p, q, L, trials, surv, surv / trials, lo, hi, hits, seed)


# ------------------------------------------------------------------ q_c probes


@dataclass
class Probe:
    q: float
    verdict: str  # "super", "sub" or "undecided"
    trials: int
    stat: float
    ci_lo: float
    ci_hi: float
    explosions: int = 0
    band: Optional[int] = None


def trial_budget_for(L: int, d: int, k: int) -> int:
    """Per-trial vertex cap for the growth classifier.

    About sixteen times the typical size of a critical cluster surviving to
    depth L, so censoring essentially never fires at or below criticality.
    """
    return max(2000, 2 * (L + k) ** 2 * d**k)


def pick_band(rows, n2: int, min_reach: int = MIN_REACH) -> int:
    """Deepest band n <= n2 // 2 reached in at least ``min_reach`` trials (0 if none)."""
    for n in range(n2 // 2, 0, -1):
        if sum(1 for w in rows if w is not None and w[n] > 0) >= min_reach:
            return n
    return 0


def classify_growth(
    p, q, k, d, L=DEFAULT_DEPTH, seed=0, trials=START_TRIALS, max_trials=MAX_TRIALS,
    conf=0.99, trial_budget=None, jobs=1,
) -> Probe:
    if L < 2 * k:
        raise ValueError("growth classifier needs L >= 2k")
    params = _params(p, q, k, d)
    budget = trial_budget or trial_budget_for(L, d, k)
    n2 = L // k
    z = z_value(conf)
    rows = []
    explosions = 0
    target = trials
    n1 = None
    while True:
        step = CHUNK * max(1, jobs)
        while len(rows) < target:
            start = len(rows)
            stop = min(start + step, target)
            for part in _run(_growth_chunk, params, L, budget, seed, start, stop, jobs):
                for w, exploded in part:
                    rows.append(w)
                    explosions += exploded
            if explosions >= EXPLOSIONS_TO_DECIDE:
                return Probe(q, "super", len(rows), math.inf, math.inf, math.inf, explosions)
        if n1 is None:
            n1 = pick_band(rows, n2)
        diffs = [float(budget) if w is None else float(w[n2] - w[n1]) for w in rows]
        n = len(diffs)
        mean = math.fsum(diffs) / n
        var = math.fsum((x - mean) ** 2 for x in diffs) / (n - 1)
        half = z * math.sqrt(var / n)
        lo, hi = mean - half, mean + half
        if var == 0.0:
            # every trial gave the same difference, e.g. all dead before band n1
            verdict = "super" if mean > 0 else "sub"
            return Probe(q, verdict, n, mean, lo, hi, explosions, n1)
        if lo > 0:
            return Probe(q, "super", n, mean, lo, hi, explosions, n1)
        if hi < 0:
            return Probe(q, "sub", n, mean, lo, hi, explosions, n1)
        if target >= max_trials:
            return Probe(q, "undecided", n, mean, lo, hi, explosions, n1)
        target = min(2 * target, max_trials)


def classify_survival(
    p, q, k, d, L=DEFAULT_DEPTH, seed=0, trials=START_TRIALS, max_trials=MAX_TRIALS,
    conf=0.95, theta_min=THETA_MIN, budget=DEFAULT_BUDGET, jobs=1,
) -> Probe:
    target = trials
    while True:
        est = estimate_theta(p, q, k, d, L, target, seed, budget, jobs, conf)
        if est.ci_lo > theta_min:
            return Probe(q, "super", target, est.theta_hat, est.ci_lo, est.ci_hi, est.budget_hits)
        if est.ci_hi < theta_min:
            return Probe(q, "sub", target, est.theta_hat, est.ci_lo, est.ci_hi, est.budget_hits)
        if target >= max_trials:
            return Probe(q, "undecided", target, est.theta_hat, est.ci_lo, est.ci_hi, est.budget_hits)
        target = min(2 * target, max_trials)


@dataclass
class QcEstimate:
    p: float
    k: int
    d: int
    L: int
    qc_lo: float
    qc_hi: float
    probes: List[Probe] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    @property
    def width(self) -> float:
        return self.qc_hi - self.qc_lo

    def contains(self, q: float, slack: float = 0.0) -> bool:
        return self.qc_lo - slack <= q <= self.qc_hi + slack


def estimate_qc(
    p: float,
    k: int,
    d: int,
    L: int = DEFAULT_DEPTH,
    trials: int = START_TRIALS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    max_trials: int = MAX_TRIALS,
    rule: str = "growth",
    conf: Optional[float] = None,
    theta_min: float = THETA_MIN,
    jobs: int = 1,
) -> QcEstimate:
    """Bracket q_c(p, k) by bisection on [0, d^-k]."""
    if tol < 1e-3:
        raise ValueError("tol must be >= 1e-3")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p >= 1.0 / d:
        return QcEstimate(p, k, d, L, 0.0, 0.0, [], ["short-supercritical"])
    if rule == "growth":
        classify = lambda q: classify_growth(
            p, q, k, d, L, seed, trials, max_trials, 0.99 if conf is None else conf, jobs=jobs)
    elif rule == "survival":
        classify = lambda q: classify_survival(
            p, q, k, d, L, seed, trials, max_trials, 0.95 if conf is None else conf, theta_min, jobs=jobs)
    else:
        raise ValueError(f"unknown rule {rule!r}")

    lo, hi = 0.0, float(d) ** (-k)
    est = QcEstimate(p, k, d, L, lo, hi)

    def probe(q):
        pr = classify(q)
        est.probes.append(pr)
        log.debug("p=%g k=%d probe q=%.6f -> %s (%d trials)", p, k, q, pr.verdict, pr.trials)
        return pr.verdict

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        verdict = probe(mid)
        if verdict == "super":
            hi = mid
            continue
        if verdict == "sub":
            lo = mid
            continue
        # too close to call: step half a tolerance to either side
        h = 0.4995 * tol
        new_lo, new_hi = lo, hi
        up, down = probe(mid + h), probe(mid - h)
        if up == "super":
            new_hi = mid + h
        elif up == "sub":
            new_lo = mid + h
        if down == "sub":
            new_lo = max(new_lo, mid - h)
        elif down == "super":
            new_hi = min(new_hi, mid - h)
        if new_lo >= new_hi:
            est.flags.append("inconsistent")
            lo, hi = mid - h, mid + h
            break
        if (new_lo, new_hi) == (lo, hi):
            est.flags.append("undecided")
            break
        lo, hi = new_lo, new_hi
    est.qc_lo, est.qc_hi = lo, hi
    if hi < lower_bound_qc(p, d, k):
        est.flags.append("below-branching-bound")
    return est


# -------------------------------------------------------------------- curves


@dataclass
class CurveRow:
    p: float
    qc_lo: float
    qc_hi: float
    raw_qc_hi: float
    flags: List[str]
    raw_qc_lo: float = math.nan


@dataclass
class CurveEstimate:
    k: int
    d: int
    L: int
    rows: List[CurveRow]
    meta: dict

    def brackets(self):
        return [(r.p, r.qc_lo, r.qc_hi) for r in self.rows]


def default_grid(d: int, points: int = GRID_POINTS) -> List[float]:
    return [i / (d * (points - 1)) for i in range(points)]


def isotonic_clip(values: Sequence[float]):
    """Running minimum, plus whether anything had to be lowered."""
    out, changed, cur = [], False, math.inf
    for v in values:
        if v > cur:
            changed = True
        cur = min(cur, v)
        out.append(cur)
    return out, changed


def sweep_curve(
    k: int,
    d: int,
    p_grid: Optional[Sequence[float]] = None,
    L: int = DEFAULT_DEPTH,
    trials: int = START_TRIALS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    max_trials: int = MAX_TRIALS,
    rule: str = "growth",
    theta_min: float = THETA_MIN,
    jobs: int = 1,
    progress: Optional[Callable[[QcEstimate], None]] = None,
) -> CurveEstimate:
    grid = sorted(default_grid(d) if p_grid is None else p_grid)
    if any(not 0.0 <= p <= 1.0 / d + 1e-12 for p in grid):
        raise ValueError("p_grid must lie in [0, 1/d]")
    ests = []
    for p in grid:
        e = estimate_qc(p, k, d, L, trials, tol, seed, max_trials, rule, theta_min=theta_min, jobs=jobs)
        ests.append(e)
        if progress is not None:
            progress(e)
    clipped, changed = isotonic_clip([e.qc_hi for e in ests])
    rows = []
    for e, hi in zip(ests, clipped):
        flags = list(e.flags)
        if hi < e.qc_hi:
            flags.append("clipped")
        rows.append(CurveRow(e.p, min(e.qc_lo, hi), hi, e.qc_hi, flags, e.qc_lo))
    meta = dict(rule=rule, trials=trials, max_trials=max_trials, tol=tol, seed=seed,
                theta_min=theta_min if rule == "survival" else None, clipped=changed)
    return CurveEstimate(k, d, L, rows, meta)


def reference_lines(d: int, k: int):
    """Plot guide lines: the branching bound and the axis anchors."""
    bound = [(x / 100 / d, lower_bound_qc(x / 100 / d, d, k)) for x in range(101)]
    anchors = [(1.0 / d, 0.0), (0.0, float(d) ** (-k))]
    return bound, anchors

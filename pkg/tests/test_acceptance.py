"""The thirteen acceptance criteria, one test each.

Every test prints a PASS/FAIL line; the lines are repeated in the terminal
summary.  All randomness is driven from SEED.
"""

import random
import subprocess
import sys
import time

import pytest

from perco.branching import critical_q, theta_depth
from perco.coupling import (
    TileCoupling,
    enhance_coupling,
    joint_exploration,
    max_marginal_error,
    support_violations,
    tile_violations,
)
from perco.coupling.laws import FiniteLaw, residual
from perco.coupling.tile import VARIANTS
from perco.estimator import estimate_qc, estimate_theta, lower_bound_qc, sweep_curve
from perco.explorer import (
    cluster_bfs,
    decomposition_overlaps,
    hub_overlaps,
    recursive_cluster,
    trace_hub_violations,
)
from perco.sampler import ConfigSample, derive_seed
from perco.tree import ROOT, ModelParams

pytestmark = pytest.mark.slow

SEED = 1
L = 30


def verdict(report, num, passed, detail):
    report(num, passed, detail)
    assert passed, detail


@pytest.fixture(scope="module")
def sweep_k1():
    t = time.perf_counter()
    c = sweep_curve(1, 2, L=L, seed=SEED)
    return c, time.perf_counter() - t


@pytest.fixture(scope="module")
def sweep_k2():
    t = time.perf_counter()
    c = sweep_curve(2, 2, L=L, seed=SEED)
    return c, time.perf_counter() - t


def test_01_endpoint(report):
    t = time.perf_counter()
    e = estimate_qc(0.0, 2, 2, L=L, seed=SEED, max_trials=32_000)
    dt = time.perf_counter() - t
    ok = e.width <= 0.01 and e.contains(0.25) and dt <= 300
    verdict(report, 1, ok, f"q_c(0, 2) in [{e.qc_lo:.5f}, {e.qc_hi:.5f}], exact 0.25, {dt:.0f}s")


def test_02_k1_closed_form(report):
    t = time.perf_counter()
    e = estimate_qc(0.25, 1, 2, L=L, seed=SEED)
    dt = time.perf_counter() - t
    exact = 1 - 0.5 / (1 - 0.25)
    ok = e.contains(exact, slack=0.01) and dt <= 300
    verdict(report, 2, ok, f"q_c(0.25, 1) in [{e.qc_lo:.5f}, {e.qc_hi:.5f}], exact 1/3, {dt:.0f}s")


def test_03_gw_oracle(report):
    t = time.perf_counter()
    e = estimate_theta(0.0, 0.75, 1, 2, L=L, trials=10_000, seed=SEED)
    dt = time.perf_counter() - t
    ok = e.ci_lo <= 8 / 9 <= e.ci_hi and dt <= 60
    verdict(report, 3, ok, f"theta CI [{e.ci_lo:.4f}, {e.ci_hi:.4f}] vs 8/9 = 0.8889, {dt:.0f}s")


def _triangle_points(n, rng):
    # uniform on {p, q >= 0, 2p + 4q <= 0.95} by rejection
    pts = []
    while len(pts) < n:
        p, q = rng.uniform(0, 0.475), rng.uniform(0, 0.2375)
        if 2 * p + 4 * q <= 0.95:
            pts.append((p, q))
    return pts


def test_04_branching_bound(report):
    t = time.perf_counter()
    pts = _triangle_points(20, random.Random(SEED))
    bad = []
    for p, q in pts:
        e = estimate_theta(p, q, 2, 2, L=L, trials=10_000, seed=SEED)
        if e.theta_hat > 0.01:
            bad.append((p, q, e.theta_hat, theta_depth(p, q, 2, 2, L)))
    dt = time.perf_counter() - t
    detail = f"{20 - len(bad)}/20 points with theta_hat <= 0.01, {dt:.0f}s"
    if bad:
        detail += "; over: " + ", ".join(
            f"(p={p:.3f}, q={q:.3f}) hat={h:.4f} exact={x:.4f}" for p, q, h, x in bad)
    verdict(report, 4, not bad and dt <= 300, detail)


def test_04b_theta_hat_tracks_exact_depth_probability():
    # companion to criterion 4: the estimator agrees with the exact depth-L
    # survival probability at the sampled points
    for p, q in _triangle_points(20, random.Random(SEED))[:6]:
        e = estimate_theta(p, q, 2, 2, L=L, trials=10_000, seed=SEED)
        exact = theta_depth(p, q, 2, 2, L)
        assert e.ci_lo - 0.005 <= exact <= e.ci_hi + 0.005


def test_05_lower_bound_guard(report, sweep_k2):
    c, dt = sweep_k2
    bad = [(r.p, r.qc_hi) for r in c.rows if r.qc_hi < lower_bound_qc(r.p, 2, 2)]
    misses = [r.p for r in c.rows if not r.qc_lo <= critical_q(r.p, 2, 2) <= r.qc_hi + 1e-12]
    detail = f"{len(c.rows) - len(bad)}/{len(c.rows)} points above the bound, {dt:.0f}s"
    if misses:
        detail += f" (exact q_c outside bracket at p={', '.join(f'{p:.3f}' for p in misses)})"
    verdict(report, 5, len(c.rows) == 13 and not bad, detail)


def test_06_strict_decrease_in_k(report):
    t = time.perf_counter()
    parts, ok = [], True
    for p in (0.1, 0.2, 0.3):
        e1 = estimate_qc(p, 1, 2, L=L, seed=SEED)
        e2 = estimate_qc(p, 2, 2, L=L, seed=SEED)
        sep = e2.qc_hi < e1.qc_lo
        ok &= sep
        parts.append(f"p={p}: k=2 [{e2.qc_lo:.4f}, {e2.qc_hi:.4f}] k=1 [{e1.qc_lo:.4f}, {e1.qc_hi:.4f}]")
    dt = time.perf_counter() - t
    ok &= dt <= 1800
    verdict(report, 6, ok, "; ".join(parts) + f", {dt:.0f}s")


def test_07_strict_decrease_in_p(report, sweep_k1):
    c, dt = sweep_k1
    rows = c.rows
    bad = []
    for a, b in zip(rows, rows[1:]):
        assert b.p - a.p >= 0.03
        # the raw bracket at the larger p lies strictly below the one at the smaller p
        if not (b.qc_hi < a.qc_hi and b.raw_qc_hi < a.raw_qc_lo):
            bad.append(f"{a.p:.4f}->{b.p:.4f}")
    detail = f"{len(rows) - 1 - len(bad)}/{len(rows) - 1} adjacent pairs separated, {dt:.0f}s"
    if bad:
        detail += f" (not separated: {', '.join(bad)})"
    verdict(report, 7, not bad, detail)


def test_08_algorithm_equivalence(report):
    t = time.perf_counter()
    mismatches = n = 0
    for p in (0.2, 0.4):
        for q in (0.2, 0.4):
            for i in range(250):
                cfg = ConfigSample(ModelParams(2, 2, p, q), derive_seed(SEED, 8, n))
                n += 1
                rec = recursive_cluster(cfg, [ROOT], 12)
                bfs = cluster_bfs(cfg, [ROOT], 12)
                mismatches += rec.vertices != bfs.vertices or rec.budget_hit or bfs.budget_hit
    dt = time.perf_counter() - t
    verdict(report, 8, n == 1000 and mismatches == 0 and dt <= 120,
            f"{n - mismatches}/{n} configurations equal, {dt:.0f}s")


def test_09_exploration_properties(report):
    rng = random.Random(SEED)
    records = hub = trace = decomp = 0
    i = 0
    while records < 10_000:
        d, k = rng.choice([(2, 1), (2, 2), (3, 2), (2, 3)])
        p, q = rng.uniform(0, 0.9 / d), rng.uniform(0, 0.9 / d**k)
        cfg = ConfigSample(ModelParams(d, k, p, q), derive_seed(SEED, 9, i))
        i += 1
        res = recursive_cluster(cfg, [ROOT], 10, keep_records=True)
        decomp += decomposition_overlaps(res.parts) > 0
        for r in res.records:
            records += 1
            hub += bool(hub_overlaps(r.hubs))
            trace += bool(trace_hub_violations(r, k, d))
    bad = hub + trace + decomp
    verdict(report, 9, bad == 0,
            f"{records} records: {hub} hub overlaps, {trace} trace-hub violations, "
            f"{decomp} overlapping decompositions")


def test_10_coupling_exactness(report):
    rng = random.Random(SEED)
    checked = worst = bad = 0
    for bits in range(1, 11):
        for _ in range(20):
            n = 1 << bits
            kappa = [rng.random() for _ in range(n)]
            y = rng.randrange(n)
            kappa[y] += sum(kappa)  # the distinguished point carries about half the mass
            s = sum(kappa)
            kappa = [x / s for x in kappa]

            def near():
                w = [x * (1 + rng.uniform(-0.3, 0.3)) for x in kappa]
                t = sum(w)
                return FiniteLaw(tuple(range(n)), tuple(x / t for x in w))

            Pa, Pb = near(), near()
            assert residual(Pa, Pb, y) >= 0
            joint = enhance_coupling(Pa, Pb, y)
            err = max_marginal_error(joint, Pa, Pb)
            worst = max(worst, err)
            bad += err > 1e-12 or bool(support_violations(joint, y))
            checked += 1
    verdict(report, 10, bad == 0,
            f"{checked} law pairs on spaces 2^1..2^10, max marginal error {worst:.1e}, {bad} failures")


# (center, lo, hi) with a nonempty validity window at d = 2
TILE_PARAMS = {
    (VARIANTS[0], 1): (0.5, 0.2, 0.6),
    (VARIANTS[1], 1): (0.5, 0.2, 0.6),
    (VARIANTS[0], 2): (0.47, 0.01, 0.99),
    (VARIANTS[1], 2): (0.8, 0.01, 0.99),
}


def test_11_tile_coupling(report):
    t = time.perf_counter()
    parts, bad = [], 0
    for (variant, k), prm in TILE_PARAMS.items():
        tc = TileCoupling(variant, *prm, 2, k)
        rng = random.Random(derive_seed(SEED, 11, k, VARIANTS.index(variant)))
        v = sum(bool(tile_violations(tc.sample(rng))) for _ in range(10_000))
        bad += v
        parts.append(f"{variant} k={k}: {v} violations (delta={tc.delta:.1e})")
    dt = time.perf_counter() - t
    verdict(report, 11, bad == 0 and dt <= 300, "; ".join(parts) + f", {dt:.0f}s")


def test_12_embedding(report):
    t = time.perf_counter()
    bad = smaller = 0
    for i in range(10_000):
        r = joint_exploration(0.3, 0.35, 1, 2, derive_seed(SEED, 12, i), L=15)
        bad += not r.ok
        smaller += len(r.cluster_k) > len(r.cluster_k1)
    dt = time.perf_counter() - t
    verdict(report, 12, bad == 0 and smaller == 0,
            f"10000 runs: {bad} failed witnesses, {smaller} with |C_k| > |C_k+1|, {dt:.0f}s")


CLI_RUNS = [
    ["theta", "--p", "0.3", "--q", "0.2", "--k", "2", "--L", "15", "--trials", "500"],
    ["theta", "--p", "0.3", "--q", "0.2", "--k", "2", "--L", "15", "--trials", "500", "--jobs", "2"],
    ["curve", "--k", "2", "--p-grid", "0.1,0.3", "--L", "12", "--tol", "0.05", "--max-trials", "4000"],
    ["nstat", "--trials", "5", "--n", "6"],
    ["verify-couplings", "--trials", "25"],
]


def test_13_determinism(report):
    differ = []
    for argv in CLI_RUNS:
        full = [sys.executable, "-m", "perco", *argv, "--seed", str(SEED)]
        a = subprocess.run(full, capture_output=True)
        b = subprocess.run(full, capture_output=True)
        if a.returncode != 0 or a.stdout != b.stdout or not a.stdout:
            differ.append(argv[0])
    verdict(report, 13, not differ,
            f"{len(CLI_RUNS) - len(differ)}/{len(CLI_RUNS)} commands byte-identical across repeated runs")

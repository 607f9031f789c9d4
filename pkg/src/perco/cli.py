"""Command-line front end: ``perco <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import random
import sys
from pathlib import Path
from typing import List, Optional

from . import estimator as est
from .coupling import (
    AUDIT_HEADER,
    ComparisonCoupling,
    FiniteLaw,
    LawsTooFarApart,
    TileCoupling,
    audit_line,
    enhance_coupling,
    joint_exploration,
    max_marginal_error,
    support_violations,
    tile_violations,
)
from .coupling.tile import VARIANTS, special_point
from .explorer import (
    cluster_bfs,
    decomposition_overlaps,
    hub_overlaps,
    level_counts,
    recursive_cluster,
)
from .sampler import ConfigSample, derive_seed
from .tree import ModelParams

log = logging.getLogger("perco")

COMMANDS = ("theta", "curve", "compare-k", "verify-couplings", "decompose-check", "nstat")


class ArgError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("PERCO_DEFAULT_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ArgError(f"PERCO_DEFAULT_SEED={raw!r} is not an integer")


def _common(sp, p=None, q=None, k=1, L=est.DEFAULT_DEPTH, trials=None):
    sp.add_argument("--d", type=int, default=2, help="branching degree (default 2)")
    sp.add_argument("--k", type=int, default=k, help=f"long-edge range (default {k})")
    sp.add_argument("--p", type=float, default=p, help="short-edge probability")
    sp.add_argument("--q", type=float, default=q, help="long-edge probability")
    sp.add_argument("--L", type=int, default=L, help=f"depth cut-off (default {L})")
    sp.add_argument("--trials", type=int, default=trials, help=f"trials (default {trials})")
    sp.add_argument("--seed", type=int, default=None, help="root seed (default $PERCO_DEFAULT_SEED or 0)")
    sp.add_argument("--tol", type=float, default=est.DEFAULT_TOL, help="bisection tolerance in q")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
    sp.add_argument("--out", type=Path, default=None, help="output file (default stdout)")
    sp.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="perco", description="Multi-range oriented percolation on d-ary trees.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    sp = sub.add_parser("theta", help="depth-L survival frequency with a Wilson interval")
    _common(sp, trials=10_000)

    for name, k, helptext in (("curve", 1, "bracket q_c(p, k) along a p grid"),
                              ("compare-k", 1, "curves for k and k+1 with an overlap report")):
        sp = sub.add_parser(name, help=helptext)
        _common(sp, k=k, trials=est.START_TRIALS)
        sp.add_argument("--points", type=int, default=est.GRID_POINTS, help="grid size on [0, 1/d]")
        sp.add_argument("--p-grid", type=str, default=None, help="comma-separated p values")
        sp.add_argument("--max-trials", type=int, default=est.MAX_TRIALS)
        sp.add_argument("--rule", choices=("growth", "survival"), default="growth")
        sp.add_argument("--theta-min", type=float, default=est.THETA_MIN)
        if name == "curve":
            sp.add_argument("--plot-dir", type=Path, default=None, help="write two-column plot data here")
        else:
            sp.add_argument("--check", action="store_true",
                            help="exit 1 unless the k+1 bracket lies strictly below at interior p")

    sp = sub.add_parser("verify-couplings", help="audit every coupling construction")
    _common(sp, p=0.3, q=0.35, L=15, trials=1000)

    sp = sub.add_parser("decompose-check", help="recursive exploration against plain BFS")
    _common(sp, p=0.3, q=0.1, k=2, L=12, trials=1000)

    sp = sub.add_parser("nstat", help="N_n trajectories per trial")
    _common(sp, k=2, trials=10)
    sp.add_argument("--n", type=int, default=10, help="largest n")
    return ap


def _validate(a) -> None:
    if a.d < 2 or a.d > 255:
        raise ArgError("--d must lie in [2, 255]")
    if a.k < 1:
        raise ArgError("--k must be >= 1")
    for name in ("p", "q"):
        v = getattr(a, name)
        if v is not None and not 0.0 <= v <= 1.0:
            raise ArgError(f"--{name} must lie in [0, 1], got {v}")
    if a.L < 0:
        raise ArgError("--L must be >= 0")
    if a.trials is not None and a.trials < 1:
        raise ArgError("--trials must be >= 1")
    if a.tol < 1e-3:
        raise ArgError("--tol must be >= 1e-3")
    if a.jobs < 1:
        raise ArgError("--jobs must be >= 1")
    if a.seed is None:
        a.seed = _default_seed()
    if not 0 <= a.seed < 1 << 64:
        raise ArgError("--seed must be an unsigned 64-bit integer")
    if a.command == "theta" and (a.p is None or a.q is None):
        raise ArgError("theta needs --p and --q")
    if a.command in ("curve", "compare-k"):
        if a.p_grid is not None:
            try:
                a.grid = sorted(float(x) for x in a.p_grid.split(",") if x.strip())
            except ValueError:
                raise ArgError("--p-grid must be comma-separated numbers")
            if not a.grid or any(not 0 <= x <= 1 / a.d + 1e-12 for x in a.grid):
                raise ArgError("--p-grid values must lie in [0, 1/d]")
        else:
            if a.points < 2:
                raise ArgError("--points must be >= 2")
            a.grid = est.default_grid(a.d, a.points)
        if a.rule == "growth" and a.L < 2 * (a.k + (a.command == "compare-k")):
            raise ArgError("the growth rule needs --L >= 2k")
        if a.max_trials < a.trials:
            raise ArgError("--max-trials must be >= --trials")
    if a.command == "nstat" and a.n < 1:
        raise ArgError("--n must be >= 1")


def _emit(a, text: str) -> None:
    if a.out is None:
        sys.stdout.write(text)
    else:
        a.out.write_text(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _flags(flags) -> str:
    return ";".join(sorted(set(flags)))


# ------------------------------------------------------------------ commands


def cmd_theta(a) -> int:
    e = est.estimate_theta(a.p, a.q, a.k, a.d, a.L, a.trials, a.seed, jobs=a.jobs)
    _emit(a, _csv(est.ThetaEstimate.FIELDS, [[getattr(e, f) for f in est.ThetaEstimate.FIELDS]]))
    return 0


CURVE_HEADER = ("d", "k", "L", "p", "qc_lo", "qc_hi", "flags")


def _sweep(a, k):
    def progress(e):
        log.info("k=%d p=%.6g bracket [%.6g, %.6g] %s", k, e.p, e.qc_lo, e.qc_hi, ",".join(e.flags))

    return est.sweep_curve(k, a.d, a.grid, a.L, a.trials, a.tol, a.seed, a.max_trials, a.rule,
                           a.theta_min, a.jobs, progress)


def _curve_rows(c):
    return [[c.d, c.k, c.L, r.p, r.qc_lo, r.qc_hi, _flags(r.flags)] for r in c.rows]


def write_plot_data(directory: Path, curve) -> List[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    d, k = curve.d, curve.k
    bound, anchors = est.reference_lines(d, k)
    files = {
        f"curve_d{d}_k{k}.dat": [(r.p, 0.5 * (r.qc_lo + r.qc_hi)) for r in curve.rows],
        f"bound_d{d}_k{k}.dat": bound,
        f"anchors_d{d}_k{k}.dat": anchors,
    }
    out = []
    for name, pts in files.items():
        path = directory / name
        path.write_text("".join(f"{x!r} {y!r}\n" for x, y in pts))
        out.append(path)
    return out


def cmd_curve(a) -> int:
    c = _sweep(a, a.k)
    _emit(a, _csv(CURVE_HEADER, _curve_rows(c)))
    if a.plot_dir is not None:
        write_plot_data(a.plot_dir, c)
    return 0


def cmd_compare_k(a) -> int:
    lo_curve, hi_curve = _sweep(a, a.k), _sweep(a, a.k + 1)
    rows, bad = [], 0
    for r1, r2 in zip(lo_curve.rows, hi_curve.rows):
        separated = r2.qc_hi < r1.qc_lo
        interior = 0 < r1.p < 1 / a.d
        if interior and not separated:
            bad += 1
        rows.append([a.d, a.k, a.L, r1.p, r1.qc_lo, r1.qc_hi, r2.qc_lo, r2.qc_hi, int(separated)])
    header = ("d", "k", "L", "p", "qc_lo_k", "qc_hi_k", "qc_lo_k1", "qc_hi_k1", "separated")
    _emit(a, _csv(header, rows))
    print(f"{len(rows) - bad}/{len(rows)} grid points separated or on the boundary", file=sys.stderr)
    return 1 if a.check and bad else 0


def default_tile_parameters(variant: str, d: int, k: int):
    """(center, lo, hi) giving the distinguished tile outcome the most mass."""
    y = special_point(variant, d, k)[0]
    return sum(y) / len(y), 0.01, 0.99


def _random_law_pair(rng: random.Random, n: int):
    base = [rng.random() + 0.1 for _ in range(n)]
    s = sum(base)
    pa = [x / s for x in base]
    eps = [rng.uniform(-1, 1) * 0.05 / n for _ in range(n)]
    shift = sum(eps) / n
    pb = [max(0.0, x + e - shift) for x, e in zip(pa, eps)]
    s = sum(pb)
    pb = [x / s for x in pb]
    out = tuple(range(n))
    return FiniteLaw(out, tuple(pa)), FiniteLaw(out, tuple(pb))


def cmd_verify_couplings(a) -> int:
    if a.p is None or a.q is None or not (0 < a.p < 1 and 0 < a.q < 1):
        raise ArgError("verify-couplings needs 0 < --p, --q < 1")
    lines = [AUDIT_HEADER]
    summary = []
    rng = random.Random(derive_seed(a.seed, 101))

    # three-outcome coupling on random laws
    fails = 0
    n_laws = min(a.trials, 200)
    for i in range(n_laws):
        size = 2 + i % 63
        Pa, Pb = _random_law_pair(rng, size)
        y = max(range(size), key=lambda z: Pa.prob(z))
        try:
            joint = enhance_coupling(Pa, Pb, y)
            ok = max_marginal_error(joint, Pa, Pb) < 1e-12 and not support_violations(joint, y)
            lines.append(audit_line(f"law-{i}", "LAW", ok, (size, len(joint))))
        except LawsTooFarApart:
            ok = True  # correctly refused
            lines.append(audit_line(f"law-{i}", "FAR", ok, (size, 0)))
        fails += not ok
    summary.append(("enhance-coupling", n_laws, fails))

    # tile couplings
    for variant in VARIANTS:
        center, lo, hi = default_tile_parameters(variant, a.d, a.k)
        tc = TileCoupling(variant, center, lo, hi, a.d, a.k)
        trng = random.Random(derive_seed(a.seed, 102, VARIANTS.index(variant)))
        fails = 0
        for i in range(a.trials):
            s = tc.sample(trng)
            bad = tile_violations(s)
            fails += bool(bad)
            lines.append(audit_line(f"tile-{variant}-{i}", s.event, not bad,
                                    (sum(s.omega.short + s.omega.long),
                                     sum(s.omega_prime.short + s.omega_prime.long))))
        summary.append((f"tile {variant}", a.trials, fails))

    # comparison coupling, every b' for this k
    crng = random.Random(derive_seed(a.seed, 103))
    fails = total = 0
    for mask in range(1 << (a.k + 1)):
        b_prime = [i + 1 for i in range(a.k + 1) if mask >> i & 1]
        try:
            cc = ComparisonCoupling(a.q, a.k, a.d, b_prime, mode="sampled")
        except LawsTooFarApart as exc:
            log.warning("b'=%s skipped: %s", b_prime, exc)
            continue
        for i in range(max(1, a.trials // (1 << (a.k + 1)))):
            s = cc.sample(crng)
            total += 1
            fails += not s.witness_ok
            tag = "".join(map(str, b_prime)) or "none"
            lines.append(audit_line(f"cmp-{tag}-{i}", s.event, s.witness_ok, (len(s.A), len(s.B))))
    summary.append(("comparison", total, fails))

    # joint exploration
    fails = 0
    for i in range(a.trials):
        r = joint_exploration(a.p, a.q, a.k, a.d, derive_seed(a.seed, 104, i), a.L)
        ok = r.ok and len(r.cluster_k) <= len(r.cluster_k1)
        fails += not ok
        events = sorted({lv.event for lv in r.witness.levels}) or ["NONE-NEEDED"]
        lines.append(audit_line(f"joint-{i}", "+".join(events), ok, (len(r.cluster_k), len(r.cluster_k1))))
    summary.append(("joint-exploration", a.trials, fails))

    _emit(a, "\n".join(lines) + "\n")
    failed = 0
    for name, n, f in summary:
        print(f"{name}: {n - f}/{n} passed", file=sys.stderr)
        failed += f
    return 1 if failed else 0


def cmd_decompose_check(a) -> int:
    params = ModelParams(a.d, a.k, a.p if a.p is not None else 0.3, a.q if a.q is not None else 0.1)
    equal = overlaps = hub_bad = 0
    for i in range(a.trials):
        cfg = ConfigSample(params, derive_seed(a.seed, i))
        rec = recursive_cluster(cfg, [()], a.L, keep_records=True)
        bfs = cluster_bfs(cfg, [()], a.L)
        equal += rec.vertices == bfs.vertices and not rec.budget_hit and not bfs.budget_hit
        overlaps += decomposition_overlaps(rec.parts) > 0
        hub_bad += any(hub_overlaps(r.hubs) for r in rec.records)
    n = a.trials
    _emit(a, f"{equal}/{n} equal\n{n - overlaps}/{n} disjoint decompositions\n"
             f"{n - hub_bad}/{n} with disjoint hub progenies\n")
    return 0 if equal == n and not overlaps and not hub_bad else 1


def cmd_nstat(a) -> int:
    params = ModelParams(a.d, a.k, a.p if a.p is not None else 0.3, a.q if a.q is not None else 0.1)
    rows = []
    for i in range(a.trials):
        counts, hit = level_counts(ConfigSample(params, derive_seed(a.seed, i)), a.n)
        rows.extend([i, n, c, int(hit)] for n, c in enumerate(counts, start=1))
    _emit(a, _csv(("trial", "n", "N_n", "budget_hit"), rows))
    return 0


HANDLERS = {
    "theta": cmd_theta,
    "curve": cmd_curve,
    "compare-k": cmd_compare_k,
    "verify-couplings": cmd_verify_couplings,
    "decompose-check": cmd_decompose_check,
    "nstat": cmd_nstat,
}


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)  # exits 2 on malformed arguments
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        _validate(a)
        return HANDLERS[a.command](a)
    except ArgError as exc:
        ap.error(str(exc))
    except (ValueError, LawsTooFarApart) as exc:
        print(f"perco: error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"perco: assertion failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

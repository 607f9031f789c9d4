"""Exact branching-process quantities for percolation on T_{d,k}.

Reachability from the root is a multi-type Galton-Watson process.  Give each
vertex v the type ``(r_0, ..., r_{k-1})`` where ``r_j`` says whether the j-th
ancestor of v (``r_0`` is v itself) is reached.  A child c of v is reached iff
the short edge from v is open and v is reached, or the long edge from the
(k-1)-th ancestor of v is open and that ancestor is reached.  The d children
draw their types independently, so extinction probabilities follow from the
offspring generating function and criticality from the Perron root of the
mean matrix.

These routines are deterministic and serve as oracles for the Monte Carlo
estimators; nothing here touches the sampler.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def _check(p, q, d, k):
    if d < 2 or k < 1:
        raise ValueError("need d >= 2 and k >= 1")
    if not (0 <= p <= 1 and 0 <= q <= 1):
        raise ValueError("p and q must lie in [0, 1]")


def child_open_prob(t: int, p: float, q: float, k: int) -> float:
    """Probability that a child of a type-``t`` vertex is reached."""
    r0 = t & 1
    rk = (t >> (k - 1)) & 1
    return 1.0 - (1.0 - p * r0) * (1.0 - q * rk)


def transition_matrix(p: float, q: float, k: int) -> np.ndarray:
    """Single-child type transition probabilities over all 2^k types."""
    n = 1 << k
    mask = n - 1
    P = np.zeros((n, n))
    for t in range(n):
        s = child_open_prob(t, p, q, k)
        base = (t << 1) & mask
        P[t, base | 1] += s
        P[t, base] += 1.0 - s
    return P


def mean_matrix(p: float, q: float, d: int, k: int) -> np.ndarray:
    """Mean offspring matrix restricted to the live types 1..2^k-1."""
    _check(p, q, d, k)
    return d * transition_matrix(p, q, k)[1:, 1:]


def perron_root(p: float, q: float, d: int, k: int) -> float:
    return float(max(abs(np.linalg.eigvals(mean_matrix(p, q, d, k)))))


def extinction_by_generation(p: float, q: float, d: int, k: int, n: int) -> np.ndarray:
    """P(no live vertex at generation n | root of each type), all types."""
    _check(p, q, d, k)
    P = transition_matrix(p, q, k)
    f = np.zeros(1 << k)
    f[0] = 1.0
    for _ in range(n):
        f = (P @ f) ** d
        f[0] = 1.0
    return f


def theta_depth(p: float, q: float, d: int, k: int, L: int) -> float:
    """Exact P(the root reaches some vertex at depth >= L)."""
    if L <= 0:
        return 1.0
    return float(1.0 - extinction_by_generation(p, q, d, k, L + k - 1)[1])


def theta(p: float, q: float, d: int, k: int, tol: float = 1e-13, max_iter: int = 10**6) -> float:
    """P(o reaches infinity) as the limit of the finite-depth survival."""
    _check(p, q, d, k)
    P = transition_matrix(p, q, k)
    f = np.zeros(1 << k)
    f[0] = 1.0
    for _ in range(max_iter):
        g = (P @ f) ** d
        g[0] = 1.0
        if np.max(np.abs(g - f)) < tol:
            f = g
            break
        f = g
    return float(1.0 - f[1])


@lru_cache(maxsize=4096)
def critical_q(p: float, d: int, k: int, tol: float = 1e-12) -> float:
    """q_c(p, k): the q at which the Perron root of the mean matrix is 1.

    Returns 0 when short edges alone percolate (p > 1/d).
    """
    _check(p, 0.0, d, k)
    if perron_root(p, 0.0, d, k) >= 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if perron_root(p, mid, d, k) > 1.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)

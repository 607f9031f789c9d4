import random
import struct

import pytest
from hypothesis import given, settings, strategies as st

from perco.sampler import ConfigSample, OverlayConfig, derive_seed, edge_bytes, edge_state, new_config
from perco.tree import ROOT, Edge, Kind, ModelParams, words


def _random_edges(rng, d, k, n, kind):
    out = set()
    while len(out) < n:
        tail = tuple(rng.randint(1, d) for _ in range(rng.randint(0, 12)))
        m = 1 if kind == Kind.SHORT else k
        out.add(Edge(tail, tuple(rng.randint(1, d) for _ in range(m)), kind))
    return sorted(out)


def test_byte_layout():
    e = Edge((1, 2), (2,), Kind.SHORT)
    assert edge_bytes(e, 7) == b"\x00" + struct.pack("<I", 2) + bytes([1, 2, 2]) + struct.pack("<Q", 7)
    e = Edge(ROOT, (2, 1), Kind.LONG)
    assert edge_bytes(e, 1)[:5] == b"\x01\x00\x00\x00\x00"


def test_degenerate_probabilities():
    cfg = new_config(ModelParams(2, 2, 1.0, 0.0), 3)
    assert all(edge_state(cfg, Edge((1,), (a,), Kind.SHORT)) for a in (1, 2))
    assert not any(edge_state(cfg, Edge((1,), r, Kind.LONG)) for r in words(2, 2))
    closed = new_config(ModelParams(2, 2, 0.0, 0.0), 3)
    assert closed.open_children(ROOT) == [] and closed.open_long(ROOT) == []


def test_reproducible_handle():
    a = new_config(ModelParams(2, 2, 0.3, 0.1), 7)
    b = new_config(ModelParams(2, 2, 0.3, 0.1), 7)
    e = Edge(ROOT, (1,), Kind.SHORT)
    assert edge_state(a, e) == edge_state(b, e) == edge_state(a, e)


def test_malformed_edge_rejected():
    cfg = new_config(ModelParams(2, 2, 0.3, 0.1), 0)
    with pytest.raises(ValueError):
        edge_state(cfg, Edge(ROOT, (1,), Kind.LONG))
    with pytest.raises(ValueError):
        edge_state(cfg, Edge(ROOT, (3,), Kind.SHORT))
    with pytest.raises(TypeError):
        new_config((2, 2, 0.3, 0.1), 0)
    with pytest.raises(ValueError):
        new_config(ModelParams(2, 2, 0.3, 0.1), -1)


def test_long_open_fraction():
    # 10^5 distinct long edges at q = 0.25; Chernoff puts [0.24, 0.26] at failure < 1e-6
    cfg = new_config(ModelParams(2, 3, 0.5, 0.25), 11)
    n = 0
    opened = 0
    for depth in range(14):
        for u in words(2, depth):
            opened += len(cfg.open_long(u))
            n += 8
            if n >= 100_000:
                break
        if n >= 100_000:
            break
    assert n == 100_000
    assert 0.24 <= opened / n <= 0.26


def test_seeds_uncorrelated():
    rng = random.Random(5)
    edges = _random_edges(rng, 2, 2, 10_000, Kind.SHORT)
    a = new_config(ModelParams(2, 2, 0.5, 0.5), 1)
    b = new_config(ModelParams(2, 2, 0.5, 0.5), 2)
    xs = [a.state(e) for e in edges]
    ys = [b.state(e) for e in edges]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / n
    corr = cov / ((mx * (1 - mx)) * (my * (1 - my))) ** 0.5
    assert abs(corr) < 0.03


def test_bulk_queries_match_single_edge_queries():
    cfg = new_config(ModelParams(3, 2, 0.4, 0.3), 9)
    for u in [ROOT, (1,), (3, 2, 1)]:
        assert cfg.open_children(u) == [a for a in (1, 2, 3) if cfg.state(Edge(u, (a,), Kind.SHORT))]
        assert cfg.open_long(u) == [r for r in words(3, 2) if cfg.state(Edge(u, r, Kind.LONG))]


def test_k1_parallel_edges_are_distinct_draws():
    cfg = new_config(ModelParams(2, 1, 0.5, 0.5), 4)
    u = [cfg.uniform(Edge((1,) * i, (1,), kind)) for i in range(50) for kind in Kind]
    assert len(set(u)) == len(u)


def test_derive_seed_deterministic_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(1, i) for i in range(1000)}) == 1000


def test_overlay_pins_override():
    base = new_config(ModelParams(2, 1, 0.0, 0.0), 0)
    ov = OverlayConfig(base)
    ov.pin(Edge(ROOT, (2,), Kind.SHORT), True)
    assert ov.open_children(ROOT) == [2]
    with pytest.raises(ValueError):
        ov.pin(Edge(ROOT, (2,), Kind.SHORT), False)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**64 - 1), st.randoms(use_true_random=False))
def test_query_order_irrelevant(seed, rnd):
    cfg = new_config(ModelParams(2, 2, 0.5, 0.5), seed)
    edges = _random_edges(random.Random(seed % 1000), 2, 2, 40, Kind.LONG)
    first = {e: cfg.state(e) for e in edges}
    shuffled = list(edges)
    rnd.shuffle(shuffled)
    assert {e: cfg.state(e) for e in shuffled} == first


def test_marginal_calibration_short():
    rng = random.Random(8)
    edges = _random_edges(rng, 3, 2, 20_000, Kind.SHORT)
    cfg = new_config(ModelParams(3, 2, 0.3, 0.5), 21)
    rate = sum(cfg.state(e) for e in edges) / len(edges)
    # 4.5 standard errors
    assert abs(rate - 0.3) < 4.5 * (0.3 * 0.7 / len(edges)) ** 0.5

import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from perco.coupling.laws import (
    FiniteLaw,
    LawsTooFarApart,
    ProductCoupling,
    classify,
    enhance_coupling,
    max_marginal_error,
    residual,
    support_violations,
)


def test_hand_example():
    Pa = FiniteLaw(("a", "b"), (0.5, 0.5))
    Pb = FiniteLaw(("a", "b"), (0.4, 0.6))
    joint = enhance_coupling(Pa, Pb, "b")
    assert joint.keys() == {("a", "a"), ("a", "b"), ("b", "b")}
    assert joint[("a", "a")] == pytest.approx(0.4)
    assert joint[("a", "b")] == pytest.approx(0.1)
    assert joint[("b", "b")] == pytest.approx(0.5)
    assert max_marginal_error(joint, Pa, Pb) < 1e-12


def test_equal_laws_give_diagonal():
    P = FiniteLaw((1, 2, 3), (0.2, 0.3, 0.5))
    joint = enhance_coupling(P, P, 2)
    assert all(x == z for x, z in joint)


def test_too_far_apart():
    Pa = FiniteLaw(("a", "b", "y"), (0.6, 0.4, 0.0))
    Pb = FiniteLaw(("a", "b", "y"), (0.3, 0.7, 0.0))
    with pytest.raises(LawsTooFarApart, match="too far apart"):
        enhance_coupling(Pa, Pb, "y")


def test_finite_law_validation():
    with pytest.raises(ValueError):
        FiniteLaw(("a",), (0.9,))
    with pytest.raises(ValueError):
        FiniteLaw(("a", "a"), (0.5, 0.5))
    with pytest.raises(ValueError):
        enhance_coupling(FiniteLaw(("a",), (1.0,)), FiniteLaw(("a",), (1.0,)), "z")


def _near(base, eps, rng):
    """A law close to ``base`` with the same support."""
    w = [max(0.0, b * (1 + rng.uniform(-eps, eps))) for b in base]
    s = sum(w)
    return [x / s for x in w]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**31), st.floats(0.0, 0.2))
def test_exact_marginals_by_enumeration(bits, seed, eps):
    rng = random.Random(seed)
    pts = list(itertools.product((0, 1), repeat=bits))
    base = [rng.random() + 0.01 for _ in pts]
    s = sum(base)
    base = [b / s for b in base]
    y = pts[rng.randrange(len(pts))]
    Pa = FiniteLaw(tuple(pts), tuple(_near(base, eps, rng)))
    Pb = FiniteLaw(tuple(pts), tuple(_near(base, eps, rng)))
    if residual(Pa, Pb, y) < 0:
        with pytest.raises(LawsTooFarApart):
            enhance_coupling(Pa, Pb, y)
        return
    joint = enhance_coupling(Pa, Pb, y)
    assert max_marginal_error(joint, Pa, Pb) < 1e-12
    assert not support_violations(joint, y)


def test_product_coupling_matches_enumerated_coupling():
    y = ((0, 1, 1), (0, 0))
    pc = ProductCoupling(3, 0.5, 0.49, [(2, 0.3)], y)
    assert pc.feasible
    Pa, Pb = pc.finite_laws()
    joint = enhance_coupling(Pa, Pb, y)
    for x in pc.space():
        for z in pc.space():
            assert pc.joint_prob(x, z) == pytest.approx(joint.get((x, z), 0.0), abs=1e-15)
    assert pc.residual == pytest.approx(residual(Pa, Pb, y), abs=1e-14)


def test_product_coupling_infeasible_and_shapes():
    pc = ProductCoupling(4, 0.9, 0.1, [], ((0, 0, 0, 0),))
    assert not pc.feasible
    with pytest.raises(LawsTooFarApart):
        pc.check()
    with pytest.raises(ValueError):
        ProductCoupling(2, 0.5, 0.5, [(1, 0.5)], ((0, 0),))


def test_product_sample_frequencies():
    y = ((1, 1),)
    pc = ProductCoupling(2, 0.55, 0.5, [], y)
    rng = random.Random(3)
    n = 20_000
    counts = {}
    for _ in range(n):
        x, z = pc.sample(rng)
        assert classify(x, z, y) != "NONE"
        counts[(x, z)] = counts.get((x, z), 0) + 1
    for (x, z), c in counts.items():
        w = pc.joint_prob(x, z)
        assert abs(c / n - w) < 5 * (w * (1 - w) / n) ** 0.5 + 1e-3


def test_classify():
    assert classify(1, 1, 0) == "EQ"
    assert classify(0, 2, 0) == "XSTAR"
    assert classify(2, 0, 0) == "YSTAR"
    assert classify(1, 2, 0) == "NONE"

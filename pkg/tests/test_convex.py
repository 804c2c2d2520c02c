"""Constraint-set geometry: projections, tangent cones, halfspaces."""

import numpy as np
import pytest

from tangenteq import (Box, Ball, Simplex, HalfspaceIntersection,
                       PointNotInSet, numeric_tangent_quotient)


def _random_body(rng, kind, dim):
    if kind == "box":
        lo = rng.uniform(-2.0, 0.0, dim)
        return Box(lo, lo + rng.uniform(0.5, 2.0, dim))
    if kind == "ball":
        return Ball(rng.uniform(-1.0, 1.0, dim), rng.uniform(0.5, 2.0))
    return Simplex(rng.uniform(0.5, 3.0), dim)


def _simplex_project_oracle(v, mass, iters=200):
    # dual bisection: w = max(v - lam, 0) with sum(w) = mass; independent
    # of the sort-based pivot rule used by the implementation
    v = np.asarray(v, dtype=float)
    lo = float(np.min(v)) - mass
    hi = float(np.max(v))
    for _ in range(iters):
        lam = 0.5 * (lo + hi)
        if np.maximum(v - lam, 0.0).sum() > mass:
            lo = lam
        else:
            hi = lam
    return np.maximum(v - 0.5 * (lo + hi), 0.0)


def test_box_projection_examples():
    b = Box([0.0, 0.0], [1.0, 1.0])
    assert np.allclose(b.project([2.0, 0.5]), [1.0, 0.5])
    assert np.allclose(b.project([-1.0, 3.0]), [0.0, 1.0])
    assert b.distance([0.5, 0.5]) == 0.0
    assert b.distance([2.0, 0.5]) == pytest.approx(1.0, abs=1e-15)
    assert b.contains([1.0, 1.0])
    assert not b.contains([1.1, 0.5])


def test_project_idempotent_and_nonexpansive():
    """Metric projections are idempotent and 1-Lipschitz; checked on 1e4
    random pairs across all body kinds with dimension up to 8."""
    rng = np.random.default_rng(7)
    kinds = ["box", "ball", "simplex"]
    for trial in range(10000):
        dim = int(rng.integers(1, 9))
        body = _random_body(rng, kinds[trial % 3], dim)
        x = rng.uniform(-4.0, 4.0, dim)
        y = rng.uniform(-4.0, 4.0, dim)
        px, py = body.project(x), body.project(y)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12
        assert np.linalg.norm(body.project(px) - px) <= 1e-12


def test_projection_gap_equals_distance():
    rng = np.random.default_rng(11)
    for _ in range(500):
        dim = int(rng.integers(1, 9))
        x = rng.uniform(-4.0, 4.0, dim)
        for kind, tol in (("box", 1e-12), ("ball", 1e-12), ("simplex", 1e-9)):
            body = _random_body(rng, kind, dim)
            gap = np.linalg.norm(x - body.project(x))
            assert abs(gap - body.distance(x)) <= tol


def test_simplex_projection_matches_dual_bisection_oracle():
    rng = np.random.default_rng(3)
    for _ in range(400):
        dim = int(rng.integers(1, 10))
        mass = rng.uniform(0.2, 5.0)
        v = rng.uniform(-3.0, 3.0, dim)
        w = Simplex(mass, dim).project(v)
        assert np.all(w >= 0.0)
        assert abs(w.sum() - mass) <= 1e-10
        assert np.max(np.abs(w - _simplex_project_oracle(v, mass))) <= 1e-9


def test_box_cone_sign_rule_against_numeric_quotient():
    """The closed-form membership rule must agree with the distance
    difference quotient d(x + h v)/h, which by convexity decreases as h
    shrinks and vanishes exactly for tangent directions."""
    rng = np.random.default_rng(19)
    hs = (1e-2, 1e-4, 1e-6)
    for _ in range(300):
        dim = int(rng.integers(1, 7))
        lo = rng.uniform(-2.0, 0.0, dim)
        hi = lo + rng.uniform(0.5, 2.0, dim)
        box = Box(lo, hi)
        # pin a random subset of coordinates to a face, keep the rest
        # well inside so only the pinned faces are active for small h
        x = lo + rng.uniform(0.3, 0.7, dim) * (hi - lo)
        pinned = rng.random(dim) < 0.6
        side = rng.random(dim) < 0.5
        x[pinned & side] = lo[pinned & side]
        x[pinned & ~side] = hi[pinned & ~side]
        v = rng.uniform(-1.0, 1.0, dim)
        res = box.tangent_cone_contains(x, v)
        quotients = [numeric_tangent_quotient(box, x, v, h) for h in hs]
        # slack covers the roundoff of d(x+hv) divided by h = 1e-6
        assert quotients[0] >= quotients[1] - 1e-9
        assert quotients[1] >= quotients[2] - 1e-9
        # at h = 1e-6 every pinned-face violation is already linear, so
        # the quotient equals the one-sided derivative up to roundoff
        assert abs(quotients[2] - res.directional_derivative) <= 1e-7
        assert res.contains == (quotients[2] <= 1e-6)


def test_quotient_limit_matches_derivative_all_bodies():
    # contingent and Clarke cones coincide for convex sets, numerically:
    # the quotient has an honest limit equal to the closed-form derivative
    rng = np.random.default_rng(23)
    kinds = ["box", "ball", "simplex"]
    for trial in range(1000):
        dim = int(rng.integers(2, 7))
        body = _random_body(rng, kinds[trial % 3], dim)
        x = body.project(rng.uniform(-3.0, 3.0, dim))
        v = rng.uniform(-1.0, 1.0, dim)
        dd = body.tangent_cone_contains(x, v).directional_derivative
        q = numeric_tangent_quotient(body, x, v, 1e-6)
        assert abs(q - dd) <= 1e-5


def test_tangent_project_output_is_tangent_and_shorter():
    rng = np.random.default_rng(5)
    kinds = ["box", "ball", "simplex"]
    for trial in range(600):
        dim = int(rng.integers(1, 9))
        body = _random_body(rng, kinds[trial % 3], dim)
        x = body.project(rng.uniform(-3.0, 3.0, dim))
        v = rng.uniform(-2.0, 2.0, dim)
        w = body.tangent_project(x, v)
        assert np.linalg.norm(w) <= np.linalg.norm(v) + 1e-12
        assert body.tangent_cone_contains(x, w, tol=1e-8).contains


def test_tangent_project_minimality_by_sampling():
    """tangent_project should return the nearest cone element: no sampled
    cone direction may be closer to v."""
    rng = np.random.default_rng(13)
    for _ in range(40):
        dim = int(rng.integers(2, 7))
        lo = rng.uniform(-1.0, 0.0, dim)
        box = Box(lo, lo + rng.uniform(0.5, 1.5, dim))
        x = box.project(rng.uniform(-2.0, 2.0, dim))
        v = rng.uniform(-2.0, 2.0, dim)
        w = box.tangent_project(x, v)
        best = np.linalg.norm(v - w)
        for _ in range(200):
            z = box.tangent_project(x, rng.uniform(-3.0, 3.0, dim))
            assert best <= np.linalg.norm(v - z) + 1e-12


def test_degenerate_box_component_forces_zero():
    box = Box([0.0, 1.0], [1.0, 1.0])
    w = box.tangent_project([0.5, 1.0], [0.3, -4.0])
    assert w[1] == 0.0
    assert not box.tangent_cone_contains([0.5, 1.0], [0.0, 1e-3]).contains
    assert box.tangent_cone_contains([0.5, 1.0], [0.2, 0.0]).contains


def test_cone_query_requires_membership():
    with pytest.raises(PointNotInSet):
        Box([0.0], [1.0]).tangent_cone_contains([2.0], [1.0])
    with pytest.raises(PointNotInSet):
        Ball([0.0, 0.0], 1.0).tangent_cone_contains([2.0, 0.0], [1.0, 0.0])


def test_ball_cone_is_inward_halfspace():
    ball = Ball([0.0, 0.0], 1.0)
    x = np.array([1.0, 0.0])
    assert ball.tangent_cone_contains(x, [-1.0, 0.3]).contains
    assert ball.tangent_cone_contains(x, [0.0, 1.0]).contains
    out = ball.tangent_cone_contains(x, [0.5, 0.0])
    assert not out.contains
    assert out.directional_derivative == pytest.approx(0.5, abs=1e-12)
    # interior point: everything is tangent
    assert ball.tangent_cone_contains([0.1, 0.2], [5.0, -3.0]).contains


def test_box_halfspace_enumeration():
    hs = Box([0.0, 0.0], [1.0, 1.0]).supporting_halfspaces()
    got = sorted((tuple(p), a) for p, a in hs)
    expected = sorted([((1.0, 0.0), 1.0), ((-1.0, -0.0), 0.0),
                       ((0.0, 1.0), 1.0), ((-0.0, -1.0), 0.0)])
    assert len(got) == 4
    for (p, a), (q, b) in zip(got, expected):
        assert np.allclose(p, q) and a == pytest.approx(b, abs=1e-15)


def test_simplex_halfspace_enumeration():
    hs = Simplex(1.0, 2).supporting_halfspaces()
    assert len(hs) == 4
    s = 1.0 / np.sqrt(2.0)
    seen = {(round(p[0], 12), round(p[1], 12), round(a, 12)) for p, a in hs}
    assert (-1.0, 0.0, 0.0) in seen
    assert (0.0, -1.0, 0.0) in seen
    assert (round(s, 12), round(s, 12), round(s, 12)) in seen
    assert (round(-s, 12), round(-s, 12), round(-s, 12)) in seen


def test_halfspaces_characterize_membership():
    # exact for boxes and simplexes: inside iff every p.x <= a
    rng = np.random.default_rng(29)
    for _ in range(200):
        dim = int(rng.integers(1, 7))
        for kind in ("box", "simplex"):
            body = _random_body(rng, kind, dim)
            hs = body.supporting_halfspaces()
            x = rng.uniform(-2.0, 3.0, dim)
            slack = max(float(p @ x) - a for p, a in hs)
            assert (slack <= 1e-9) == body.contains(x, tol=1e-9)


def test_ball_eight_normal_gap_formula():
    """Circumscribing a disc by 8 tangent halfspaces misses it by exactly
    r*(1/cos(pi/8) - 1)."""
    expected = 1.0 / np.cos(np.pi / 8.0) - 1.0
    assert expected == pytest.approx(0.0823922, abs=1e-7)
    ball = Ball([0.0, 0.0], 1.0)
    assert ball.outer_gap(count=8) == pytest.approx(expected, abs=1e-12)
    hs = ball.supporting_halfspaces(count=8)
    assert len(hs) == 8
    # outer approximation: every ball point satisfies every halfspace,
    # and the worst corner sticks out by exactly the gap
    th = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
    pts = np.stack([np.cos(th), np.sin(th)], axis=-1)
    for p, a in hs:
        assert np.max(pts @ p) <= a + 1e-12
    corner = np.array([1.0 + expected, 0.0]) @ np.array([np.cos(np.pi / 8),
                                                         np.sin(np.pi / 8)])
    assert corner <= 1.0 + 1e-12


def test_ball_gap_shrinks_with_more_normals():
    ball = Ball([0.5, -0.5], 2.0)
    gaps = [ball.outer_gap(count=m) for m in (8, 16, 32, 64)]
    assert all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-2


def test_halfspace_intersection_reproduces_box():
    rng = np.random.default_rng(31)
    for _ in range(25):
        dim = int(rng.integers(1, 5))
        lo = rng.uniform(-1.0, 0.0, dim)
        hi = lo + rng.uniform(0.5, 1.5, dim)
        box = Box(lo, hi)
        normals, offsets = zip(*box.supporting_halfspaces())
        poly = HalfspaceIntersection(normals, offsets, 0.5 * (lo + hi))
        for _ in range(4):
            x = rng.uniform(-2.0, 2.0, dim)
            assert np.max(np.abs(poly.project(x) - box.project(x))) <= 1e-8
            assert abs(poly.distance(x) - box.distance(x)) <= 1e-8
        xb = box.project(rng.uniform(-2.0, 2.0, dim))
        v = rng.uniform(-1.0, 1.0, dim)
        wb = box.tangent_project(xb, v)
        wp = poly.tangent_project(xb, v, tol=1e-9)
        assert np.max(np.abs(wb - wp)) <= 1e-8


def test_halfspace_intersection_validates_inputs():
    with pytest.raises(ValueError):
        HalfspaceIntersection([[1.0, 0.0]], [0.0], [1.0, 0.0])  # infeasible
    with pytest.raises(ValueError):
        HalfspaceIntersection([[0.0, 0.0]], [1.0], [0.0, 0.0])  # zero normal


def test_box_rejects_crossed_bounds():
    with pytest.raises(ValueError):
        Box([1.0], [0.0])
    with pytest.raises(ValueError):
        Ball([0.0], 0.0)
    with pytest.raises(ValueError):
        Simplex(0.0, 3)

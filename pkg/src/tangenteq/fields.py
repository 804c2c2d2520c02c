"""Set-valued nonlinearity fields and tangential selections.

A field maps a state ``(x, u, p)`` (position, value, gradient) to an
axis-aligned interval box of admissible reaction values.  Three variants
cover the use cases: single-valued functions, explicit interval bounds,
and the sampled interval hull of a possibly discontinuous function over a
small ball (the regularization that turns jumps into intervals).

``tangent_selection`` picks the minimal-norm admissible value that is also
tangent to the constraint set at ``u``.  That selection is what the
equilibrium iterations feed through the resolvent, and its emptiness is
exactly the tangency failure the verifiers hunt for.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .convex import CONE_TOL, Box
from .errors import BoundViolated, EmptyIntersection, TangentEqError


@dataclass
class SetValue:
    """Interval box of admissible values, ``lo <= hi`` componentwise."""

    lo: np.ndarray
    hi: np.ndarray

    def distance(self, y):
        """Euclidean distance from ``y`` to the box."""
        y = np.asarray(y, dtype=float)
        return float(np.linalg.norm(y - np.clip(y, self.lo, self.hi)))

    def contains(self, y, tol=1e-12):
        return self.distance(y) <= tol

    def min_norm_point(self):
        return np.clip(0.0, self.lo, self.hi)

    def sup_norm(self):
        """Largest Euclidean norm over the box (attained at a corner)."""
        return float(np.linalg.norm(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    def excess_over(self, other):
        """One-sided Hausdorff excess of this box over ``other``."""
        gap = np.maximum(0.0, np.maximum(other.lo - self.lo, self.hi - other.hi))
        return float(np.linalg.norm(gap))

    def is_singleton(self, tol=0.0):
        return bool(np.all(self.hi - self.lo <= tol))


@dataclass
class GraphApproxConfig:
    """Knobs for the sampled graph-approximation check."""

    epsilon: float
    sample_count: int = 128
    perturbation_radius: float = None

    def radius(self):
        r = self.epsilon if self.perturbation_radius is None else self.perturbation_radius
        # membership is quantified over perturbations strictly inside the
        # epsilon ball, so never search past it
        return min(r, self.epsilon) * (1.0 - 1e-9)


def _components(value, n):
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.size != n:
        raise ValueError("field returned %d components, expected %d" % (v.size, n))
    return v.astype(float)


class NonlinearityField:
    """Base field: holds the component count and an optional envelope.

    ``bound`` may be a constant or a function of position; when set,
    every evaluation is checked against it and BoundViolated is raised
    on escape.
    """

    def __init__(self, components, bound=None):
        self.components = int(components)
        self.bound = bound

    def evaluate(self, x, u, p):
        val = self._value(x, u, p)
        self._check_bound(x, val)
        return val

    def _value(self, x, u, p):
        raise NotImplementedError

    def _check_bound(self, x, val):
        if self.bound is None:
            return
        b = self.bound(x) if callable(self.bound) else float(self.bound)
        worst = val.sup_norm()
        if worst > b + 1e-9 * (1.0 + abs(b)):
            raise BoundViolated(
                "field value norm %.6g exceeds envelope %.6g at x=%.6g"
                % (worst, b, x))


class SingleValued(NonlinearityField):
    """Pointwise function ``g(x, u, p)`` seen as a singleton interval."""

    def __init__(self, g, components=1, bound=None):
        super().__init__(components, bound)
        self.g = g

    def _value(self, x, u, p):
        y = _components(self.g(x, u, p), self.components)
        return SetValue(lo=y, hi=y.copy())


class IntervalValued(NonlinearityField):
    """Explicit interval bounds ``[g_lo(x,u,p), g_hi(x,u,p)]``."""

    def __init__(self, g_lo, g_hi, components=1, bound=None):
        super().__init__(components, bound)
        self.g_lo = g_lo
        self.g_hi = g_hi

    def _value(self, x, u, p):
        lo = _components(self.g_lo(x, u, p), self.components)
        hi = _components(self.g_hi(x, u, p), self.components)
        if np.any(lo > hi):
            raise ValueError("interval endpoints crossed (lo > hi)")
        return SetValue(lo=lo, hi=hi)


class FilippovHull(NonlinearityField):
    """Sampled interval hull of ``g`` over a delta-ball around the state.

    The hull is an inner approximation of the exact convexification that
    grows with ``sample_count``.  Sampling is deterministic: the rng seed
    is derived from the state itself, draws are sequential (so a larger
    sample count extends, never reshuffles, a smaller one) and rays are
    scaled by delta (so a larger delta moves each probe outward along the
    same direction).  Both monotonicity properties follow for monotone
    jumps, and concurrent evaluations at different states are independent.
    """

    def __init__(self, g, delta, sample_count=64, components=1,
                 bound=None, base_seed=0):
        super().__init__(components, bound)
        if delta <= 0:
            raise ValueError("delta must be positive")
        self.g = g
        self.delta = float(delta)
        self.sample_count = int(sample_count)
        self.base_seed = int(base_seed)

    def _state_rng(self, x, u, p):
        h = hashlib.blake2b(digest_size=8)
        h.update(np.int64(self.base_seed).tobytes())
        h.update(np.float64(x).tobytes())
        h.update(np.asarray(u, dtype=float).tobytes())
        h.update(np.asarray(p, dtype=float).tobytes())
        return np.random.default_rng(int.from_bytes(h.digest(), "little"))

    def _value(self, x, u, p):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        dim = 1 + u.size + p.size
        rng = self._state_rng(x, u, p)
        rays = unit_ball_rays(rng, self.sample_count, dim)
        lo = hi = _components(self.g(x, u, p), self.components)
        for ray in rays:
            dx = self.delta * ray
            y = _components(
                self.g(x + dx[0], u + dx[1:1 + u.size], p + dx[1 + u.size:]),
                self.components)
            lo = np.minimum(lo, y)
            hi = np.maximum(hi, y)
        return SetValue(lo=lo, hi=hi)


def unit_ball_rays(rng, count, dim):
    """``count`` points of the closed unit ball, drawn sequentially."""
    out = np.empty((count, dim))
    for i in range(count):
        d = rng.standard_normal(dim)
        nd = np.linalg.norm(d)
        if nd == 0.0:
            nd = 1.0
        out[i] = (rng.random() ** (1.0 / dim) / nd) * d
    return out


def selection_on_intervals(vlo, vhi, clo, chi, gap_tol=1e-10):
    """Minimal-norm point of ``[vlo,vhi] & [clo,chi]``, componentwise.

    Works on arrays of any matching shape.  Returns ``(v, empty)`` where
    ``empty`` flags components whose intervals miss each other by more
    than ``gap_tol``.
    """
    ilo = np.maximum(vlo, clo)
    ihi = np.minimum(vhi, chi)
    empty = ilo > ihi + gap_tol
    v = np.clip(0.0, ilo, np.maximum(ilo, ihi))
    return v, empty


def tangent_selection(field, body, x, u, p, tol=CONE_TOL,
                      gap_tol=1e-10, max_iter=5000):
    """Minimal-norm admissible value tangent to ``body`` at ``u``.

    Box constraints reduce to componentwise interval clipping.  Otherwise
    Dykstra's alternating projections between the value box and the
    tangent cone are run from the origin; Dykstra converges to the
    projection of the start point onto the intersection, which is exactly
    the minimal-norm point.  The scheme declares the intersection empty
    when the box-to-cone gap stalls above tolerance (reduction below
    1e-14 across 50 iterations).

    Raises EmptyIntersection when no admissible tangent value exists.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    val = field.evaluate(x, u, p)

    if isinstance(body, Box):
        low, up = body.active_faces(u, tol)
        clo = np.where(low, 0.0, -np.inf)
        chi = np.where(up, 0.0, np.inf)
        v, empty = selection_on_intervals(val.lo, val.hi, clo, chi, gap_tol)
        if np.any(empty):
            k = int(np.nonzero(empty)[0][0])
            raise EmptyIntersection(
                "component %d: values [%.6g, %.6g] miss the face cone"
                % (k, val.lo[k], val.hi[k]))
        return v

    y = np.zeros(field.components)
    pc = np.zeros_like(y)
    qc = np.zeros_like(y)
    gaps = []
    gap = np.inf
    for i in range(max_iter):
        zb = y + pc
        b = np.clip(zb, val.lo, val.hi)
        pc = zb - b
        zt = b + qc
        t = body.tangent_project(u, zt, tol=tol)
        qc = zt - t
        y = t
        gap = float(np.linalg.norm(b - t))
        gaps.append(gap)
        if gap <= gap_tol:
            break
        if i >= 50 and gaps[i - 50] - gap < 1e-14 and gap > gap_tol:
            raise EmptyIntersection(
                "alternating projections stalled at gap %.3g" % gap)
    if gap > gap_tol:
        raise EmptyIntersection(
            "no admissible tangent value found (gap %.3g)" % gap)

    check_tol = max(tol, 100.0 * gap_tol)
    res = body.tangent_cone_contains(u, y, tol=check_tol)
    if not res.contains or val.distance(y) > check_tol:
        raise TangentEqError("selection failed its a-posteriori validation")
    return y


@dataclass
class GraphCheckReport:
    """Outcome of the sampled graph-approximation validation."""

    pass_fraction: float
    worst_gap: float
    tested: int
    failures: list


def validate_graph_approximation(f, field, cfg, states, seed=0):
    """Check that ``f`` lands within ``epsilon`` of field values taken at
    perturbed states (search radius inside the epsilon ball).

    ``states`` is a sequence of ``(x, u, p)`` triples.  For each one the
    check looks for some nearby state whose value box comes within
    ``epsilon`` of ``f``; the reported gap per state is the best distance
    found, and the report carries the failing indices.
    """
    rng = np.random.default_rng(seed)
    gaps = []
    failures = []
    for idx, (x, u, p) in enumerate(states):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        y = np.atleast_1d(np.asarray(f(x, u, p), dtype=float))
        dim = 1 + u.size + p.size
        best = field.evaluate(x, u, p).distance(y)
        if best > 0.0:
            for ray in unit_ball_rays(rng, cfg.sample_count, dim):
                dx = cfg.radius() * ray
                val = field.evaluate(x + dx[0], u + dx[1:1 + u.size],
                                     p + dx[1 + u.size:])
                best = min(best, val.distance(y))
                if best == 0.0:
                    break
        gaps.append(best)
        if best > cfg.epsilon + 1e-12:
            failures.append((idx, best))
    gaps = np.asarray(gaps) if gaps else np.zeros(1)
    return GraphCheckReport(
        pass_fraction=1.0 - len(failures) / max(1, len(states)),
        worst_gap=float(np.max(gaps)),
        tested=len(states),
        failures=failures)


def semicontinuity_probe(field, x, u, p, delta, sample_count=64, seed=0):
    """Worst one-sided excess of nearby value boxes over the one at the
    probed state.  Small excess across shrinking delta is the numerical
    signature of upper semicontinuity; a jump that stays out of the value
    box keeps the excess pinned at the jump size.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    base = field.evaluate(x, u, p)
    dim = 1 + u.size + p.size
    rng = np.random.default_rng(seed)
    worst = 0.0
    for ray in unit_ball_rays(rng, sample_count, dim):
        dx = delta * ray
        val = field.evaluate(x + dx[0], u + dx[1:1 + u.size],
                             p + dx[1 + u.size:])
        worst = max(worst, val.excess_over(base))
    return worst

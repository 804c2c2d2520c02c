"""Convex constraint sets: distances, projections and tangent cones.

Every set here exposes the same small surface: ``distance`` / ``project``
(the metric projection, which is a 1-Lipschitz retraction), membership
queries for the tangent cone at a point of the set, the metric projection
onto that cone, and a finite list of supporting halfspaces used by the
resolvent invariance audits.

The tangent cone of a convex set at ``x`` is the closure of the feasible
rays ``h*(K - x)``, ``h > 0``.  For the sets below it has closed form:

* ``Box``      componentwise sign rules on the active faces,
* ``Ball``     a halfspace through the outward normal on the boundary,
* ``Simplex``  zero-sum directions, nonnegative on the zero coordinates,
* ``HalfspaceIntersection``  the cone cut out by the active halfspaces.

Directional derivatives of the distance function are reported alongside
membership: for a convex set the one-sided derivative of ``d_K`` at
``x in K`` along ``v`` equals the distance from ``v`` to the tangent cone,
so membership at tolerance ``tol`` is exactly ``derivative <= tol``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PointNotInSet

#: default tolerance for active-face detection and cone membership
CONE_TOL = 1e-9


@dataclass
class ConeQueryResult:
    """Outcome of a tangent-cone membership query.

    Attributes:
        contains: whether the direction lies in the cone (at tolerance).
        directional_derivative: one-sided derivative of the distance
            function along the queried direction; zero iff contained.
    """

    contains: bool
    directional_derivative: float


def _as1d(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


class ConvexBody:
    """Shared plumbing for the concrete sets."""

    dim = None

    def distance(self, x):
        x = _as1d(x)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol=CONE_TOL):
        return self.distance(x) <= tol

    def _require_member(self, x, tol):
        d = self.distance(x)
        if d > max(tol, CONE_TOL):
            raise PointNotInSet(
                "point at distance %.3g from the set (tol %.3g)" % (d, tol))

    def tangent_cone_contains(self, x, v, tol=CONE_TOL):
        """Query whether ``v`` is tangent to the set at ``x``.

        Raises PointNotInSet when ``x`` is not a member (up to ``tol``).
        """
        self._require_member(x, tol)
        w = self.tangent_project(x, v, tol=tol)
        dd = float(np.linalg.norm(_as1d(v) - w))
        return ConeQueryResult(contains=dd <= tol, directional_derivative=dd)

    def tangent_project(self, x, v, tol=CONE_TOL):
        raise NotImplementedError

    def supporting_halfspaces(self):
        raise NotImplementedError


class Box(ConvexBody):
    """Axis-aligned box ``[lo, hi]``; degenerate components are allowed.

    On an active lower face the cone admits directions with nonnegative
    component, on an active upper face nonpositive; a degenerate component
    (``lo_i == hi_i``) forces the component to zero.
    """

    def __init__(self, lo, hi):
        self.lo = _as1d(lo)
        self.hi = _as1d(hi)
        if self.lo.shape != self.hi.shape:
            raise ValueError("lo and hi must have matching shapes")
        if np.any(self.hi < self.lo):
            raise ValueError("box needs lo <= hi componentwise")
        self.dim = self.lo.size

    def project(self, x):
        return np.clip(_as1d(x), self.lo, self.hi)

    def active_faces(self, x, tol=CONE_TOL):
        """Boolean masks (lower, upper) of the faces active at ``x``."""
        x = _as1d(x)
        return x - self.lo <= tol, self.hi - x <= tol

    def tangent_project(self, x, v, tol=CONE_TOL):
        low, up = self.active_faces(x, tol)
        w = _as1d(v).copy()
        w[low] = np.maximum(w[low], 0.0)
        w[up] = np.minimum(w[up], 0.0)
        w[low & up] = 0.0
        return w

    def supporting_halfspaces(self):
        out = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            out.append((e.copy(), float(self.hi[i])))
            out.append((-e, float(-self.lo[i])))
        return out


class Ball(ConvexBody):
    """Euclidean ball.  The cone at a boundary point is the halfspace of
    directions with nonpositive product against the outward normal."""

    def __init__(self, center, radius):
        self.center = _as1d(center)
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        self.dim = self.center.size

    def project(self, x):
        x = _as1d(x)
        r = x - self.center
        nr = np.linalg.norm(r)
        if nr <= self.radius:
            return x.copy()
        return self.center + (self.radius / nr) * r

    def distance(self, x):
        return max(0.0, float(np.linalg.norm(_as1d(x) - self.center)) - self.radius)

    def tangent_project(self, x, v, tol=CONE_TOL):
        x = _as1d(x)
        v = _as1d(v).copy()
        r = x - self.center
        nr = np.linalg.norm(r)
        if self.radius - nr > tol:
            return v
        n = r / nr
        return v - max(0.0, float(n @ v)) * n

    def supporting_halfspaces(self, count=64, seed=0):
        """Outer polyhedral approximation by ``count`` tangent halfspaces.

        Exact for dim 1; equally spaced normals in dim 2 (circumscribed
        polygon, Hausdorff gap ``r*(1/cos(pi/count) - 1)``); seeded unit
        normals in higher dimension.  Always an outer approximation.
        """
        if self.dim == 1:
            ps = [np.array([1.0]), np.array([-1.0])]
        elif self.dim == 2:
            th = 2.0 * np.pi * np.arange(count) / count
            ps = [np.array([np.cos(t), np.sin(t)]) for t in th]
        else:
            rng = np.random.default_rng(seed)
            raw = rng.standard_normal((count, self.dim))
            raw /= np.linalg.norm(raw, axis=1)[:, None]
            ps = list(raw)
        return [(p, float(p @ self.center) + self.radius) for p in ps]

    def outer_gap(self, count=64, seed=0, probes=4096):
        """Hausdorff gap of the halfspace approximation over the ball."""
        if self.dim == 1:
            return 0.0
        if self.dim == 2:
            return self.radius * (1.0 / np.cos(np.pi / count) - 1.0)
        ps = np.array([p for p, _ in self.supporting_halfspaces(count, seed)])
        rng = np.random.default_rng(seed + 1)
        dirs = rng.standard_normal((probes, self.dim))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        # worst angular hole between a probe direction and the normal fan
        cosmax = np.max(dirs @ ps.T, axis=1)
        cosmax = np.clip(cosmax, 1e-9, 1.0)
        return float(self.radius * np.max(1.0 / cosmax - 1.0))


class Simplex(ConvexBody):
    """Scaled probability simplex ``{u >= 0, sum(u) = total_mass}``."""

    def __init__(self, total_mass, dim):
        self.total_mass = float(total_mass)
        if self.total_mass <= 0:
            raise ValueError("total_mass must be positive")
        self.dim = int(dim)
        if self.dim < 1:
            raise ValueError("dim must be at least 1")

    def project(self, x):
        # sort-based exact projection (Held/Wolfe/Crowder pivot rule)
        v = _as1d(x)
        s = self.total_mass
        u = np.sort(v)[::-1]
        cssv = np.cumsum(u) - s
        idx = np.arange(1, v.size + 1)
        rho = np.nonzero(u * idx > cssv)[0][-1]
        theta = cssv[rho] / (rho + 1.0)
        return np.maximum(v - theta, 0.0)

    def active_zeros(self, x, tol=CONE_TOL):
        return _as1d(x) <= tol

    def tangent_project(self, x, v, tol=CONE_TOL):
        """Exact projection onto ``{w: sum w = 0, w_i >= 0 on zeros}``.

        KKT reduces to one scalar equation: free components give
        ``w_i = v_i - lam``, active ones ``w_i = max(v_i - lam, 0)``, and
        ``lam`` solves zero total sum (monotone, bisected to 1e-14).
        """
        v = _as1d(v)
        act = self.active_zeros(x, tol)

        def total(lam):
            w = v - lam
            w = np.where(act, np.maximum(w, 0.0), w)
            return w.sum()

        scale = float(np.max(np.abs(v))) + 1.0
        lo, hi = -scale * (self.dim + 1), scale * (self.dim + 1)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if total(mid) > 0:
                lo = mid
            else:
                hi = mid
        lam = 0.5 * (lo + hi)
        w = v - lam
        return np.where(act, np.maximum(w, 0.0), w)

    def supporting_halfspaces(self):
        out = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = -1.0
            out.append((e, 0.0))
        one = np.ones(self.dim) / np.sqrt(self.dim)
        mass = self.total_mass / np.sqrt(self.dim)
        out.append((one, mass))
        out.append((-one, -mass))
        return out


class HalfspaceIntersection(ConvexBody):
    """Finite intersection of halfspaces ``p_k . x <= a_k``.

    Normals are normalized at construction and a feasible point must be
    supplied as a certificate of nonemptiness.  Projections (and the cone
    projection on the active constraints) run Dykstra's alternating
    projections, so distances here carry the iteration tolerance rather
    than being exact.
    """

    def __init__(self, normals, offsets, point):
        P = np.atleast_2d(np.asarray(normals, dtype=float))
        a = _as1d(offsets).astype(float)
        if P.shape[0] != a.size:
            raise ValueError("one offset per normal required")
        norms = np.linalg.norm(P, axis=1)
        if np.any(norms <= 0):
            raise ValueError("zero normal supplied")
        self.normals = P / norms[:, None]
        self.offsets = a / norms
        self.point = _as1d(point)
        self.dim = P.shape[1]
        slack = self.normals @ self.point - self.offsets
        if np.max(slack) > 1e-9:
            raise ValueError("certificate point is not feasible")

    def contains(self, x, tol=CONE_TOL):
        return float(np.max(self.normals @ _as1d(x) - self.offsets)) <= tol

    def project(self, x):
        x = _as1d(x)
        if self.contains(x, tol=0.0):
            return x.copy()
        projs = [_halfspace_projector(p, a)
                 for p, a in zip(self.normals, self.offsets)]
        return _dykstra(x, projs)

    def tangent_project(self, x, v, tol=CONE_TOL):
        act = self.normals @ _as1d(x) - self.offsets >= -tol
        if not np.any(act):
            return _as1d(v).copy()
        projs = [_halfspace_projector(p, 0.0) for p in self.normals[act]]
        return _dykstra(_as1d(v), projs)

    def supporting_halfspaces(self):
        return [(p.copy(), float(a))
                for p, a in zip(self.normals, self.offsets)]


def _halfspace_projector(p, a):
    def proj(y):
        excess = float(p @ y) - a
        if excess <= 0:
            return y.copy()
        return y - excess * p
    return proj


def _dykstra(x, projectors, tol=1e-13, max_sweeps=20000):
    """Dykstra's scheme: converges to the metric projection of ``x`` onto
    the intersection of the projectors' sets (plain alternation does not)."""
    y = x.copy()
    corr = [np.zeros_like(y) for _ in projectors]
    scale = max(1.0, float(np.linalg.norm(x)))
    for _ in range(max_sweeps):
        y_prev = y.copy()
        for i, proj in enumerate(projectors):
            z = y + corr[i]
            y = proj(z)
            corr[i] = z - y
        if np.linalg.norm(y - y_prev) <= tol * scale:
            break
    return y


def numeric_tangent_quotient(body, x, v, h):
    """Finite difference quotient ``d_K(x + h v) / h`` (cross-check of the
    closed-form directional derivative; nondecreasing in h by convexity)."""
    return body.distance(_as1d(x) + h * _as1d(v)) / h

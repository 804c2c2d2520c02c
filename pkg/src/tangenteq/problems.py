"""Problem catalog and hypothesis verifiers.

The catalog side builds the pieces a concrete run needs: named
nonlinearities (single-valued, interval, relay hulls, tabulated data),
nodewise bound pairs for moving rectangles, and the second-order
boundary-value assembly used for gradient-dependent problems on a ball
constraint.

The verifier side turns the structural hypotheses behind the solvers into
sampled checks with margins and witnesses:

* ``verify_tangency``   - admissible values meet the constraint's tangent
  cone on every face of the boundary,
* ``verify_bernstein``  - sign, quadratic-growth, and sphere conditions
  for gradient-dependent two-point problems,
* ``verify_subsuper``   - discrete sub/supersolution inequalities for
  nodewise bound pairs.

A margin is always "distance to violation": positive means the condition
holds strictly, negative means a witness was found.
"""

from dataclasses import dataclass

import numpy as np

from .convex import Ball, Box
from .fields import (FilippovHull, IntervalValued, NonlinearityField,
                     SetValue, SingleValued)
from .operators import Grid1D, OperatorSpec, assemble


@dataclass
class MovingBox:
    """Nodewise box bounds alpha(x) <= u(x) <= beta(x).

    ``alpha`` and ``beta`` are arrays over grid nodes, one row per node
    (scalar problems may pass flat arrays).  The equilibrium solvers
    treat this exactly like a box constraint whose faces move with x.
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.alpha.shape != self.beta.shape:
            raise ValueError("bound arrays must share a shape")
        if np.any(self.alpha > self.beta):
            raise ValueError("alpha must stay below beta")


# ---------------------------------------------------------------------------
# nonlinearity catalog


def _linear(params, components, bound, seed):
    a = float(params.get("a", 0.5))
    b = float(params.get("b", -1.0))
    return SingleValued(lambda x, u, p: a + b * u,
                        components=components, bound=bound)


def _logistic(params, components, bound, seed):
    r = float(params.get("r", 1.0))
    theta = float(params.get("theta", 0.4))
    return SingleValued(lambda x, u, p: r * u * (1.0 - u) * (u - theta),
                        components=components, bound=bound)


def _constant(params, components, bound, seed):
    lo = float(params.get("lo", 0.0))
    hi = float(params.get("hi", lo))
    return IntervalValued(lambda x, u, p: np.full(components, lo),
                          lambda x, u, p: np.full(components, hi),
                          components=components, bound=bound)


def _heaviside(params, components, bound, seed):
    off = float(params.get("off", 1.0))
    on = float(params.get("on", -1.0))
    threshold = float(params.get("threshold", 0.5))
    delta = float(params.get("delta", 0.05))
    count = int(params.get("samples", 64))

    def relay(x, u, p):
        u = np.atleast_1d(u)
        return np.where(u < threshold, off, on)

    return FilippovHull(relay, delta, sample_count=count,
                        components=components, bound=bound, base_seed=seed)


def _tabulated(params, components, bound, seed):
    path = params.get("path")
    if path is None:
        raise ValueError("tabulated nonlinearity needs a 'path' parameter")
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[1] < 2:
        raise ValueError("expected two CSV columns: state, value")
    order = np.argsort(data[:, 0])
    knots, vals = data[order, 0], data[order, 1]
    return SingleValued(lambda x, u, p: np.interp(u, knots, vals),
                        components=components, bound=bound)


_CATALOG = {
    "linear": _linear,
    "logistic": _logistic,
    "constant": _constant,
    "heaviside": _heaviside,
    "tabulated": _tabulated,
}

NONLINEARITY_NAMES = tuple(sorted(_CATALOG))

# parameter names each factory understands, for config validation
NONLINEARITY_PARAMS = {
    "linear": ("a", "b"),
    "logistic": ("r", "theta"),
    "constant": ("hi", "lo"),
    "heaviside": ("delta", "off", "on", "samples", "threshold"),
    "tabulated": ("path",),
}


def make_nonlinearity(name, params=None, components=1, bound=None, seed=0):
    """Instantiate a catalog nonlinearity by name."""
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise ValueError("unknown nonlinearity %r (have: %s)"
                         % (name, ", ".join(NONLINEARITY_NAMES))) from None
    return factory(params or {}, components, bound, seed)


# ---------------------------------------------------------------------------
# gradient-dependent two-point problems on a ball


class StateShiftedField(NonlinearityField):
    """Wrap a field as F(x, u, p) = base(x, u, p) - c * u.

    Pairing this with an operator whose zeroth-order coefficient absorbs
    ``+c * u`` leaves the modeled equation unchanged while moving mass
    between the linear and nonlinear parts.
    """

    def __init__(self, base, c):
        super().__init__(components=base.components, bound=None)
        self.base = base
        self.c = float(c)

    def _value(self, x, u, p):
        val = self.base._value(x, u, p)
        return SetValue(val.lo - self.c * u, val.hi - self.c * u)


def as_field(phi, components=1, bound=None):
    if isinstance(phi, NonlinearityField):
        return phi
    return SingleValued(phi, components=components, bound=bound)


def make_bernstein_problem(phi, R, c, n, length=1.0, bound=None):
    """Assemble u'' + phi(x, u, u') = 0, |u| <= R, zero boundary values.

    The operator carries the ``+c*u`` zeroth-order term (negative shift)
    and the field hands back ``phi - c*u``, so their sum is the original
    equation while the resolvent sees the coercive linear part.
    Returns (operator, field, ball_constraint).
    """
    if R <= 0:
        raise ValueError("radius must be positive")
    spec = OperatorSpec(d=1.0, gamma=0.0, bc="dirichlet", shift=-float(c),
                        components=1)
    op = assemble(spec, Grid1D(length, n))
    fld = StateShiftedField(as_field(phi, bound=bound), c)
    return op, fld, Ball(np.zeros(1), float(R))


# ---------------------------------------------------------------------------
# condition reports


@dataclass
class ConditionItem:
    name: str
    passed: bool
    margin: float
    witness: dict = None

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed),
                "margin": float(self.margin), "witness": self.witness}


@dataclass
class ConditionReport:
    items: list

    @property
    def passed(self):
        return all(item.passed for item in self.items)

    @property
    def worst_margin(self):
        return min((item.margin for item in self.items), default=float("inf"))

    def to_dict(self):
        return {"passed": bool(self.passed),
                "worst_margin": float(self.worst_margin),
                "items": [item.to_dict() for item in self.items]}

    def lines(self):
        out = []
        for item in self.items:
            tag = "ok  " if item.passed else "FAIL"
            out.append("[%s] %-24s margin=% .6e" % (tag, item.name, item.margin))
        return out


def _witness(x, u, p, value, violation):
    return {"x": float(x),
            "u": [float(c) for c in np.atleast_1d(u)],
            "p": [float(c) for c in np.atleast_1d(p)],
            "value": value, "violation": float(violation)}


# ---------------------------------------------------------------------------
# tangency of admissible values on the constraint boundary


def _node_bounds(C, grid, components):
    n = grid.n
    if isinstance(C, Box):
        lo = np.tile(C.lo, (n, 1))
        hi = np.tile(C.hi, (n, 1))
        glo = np.zeros_like(lo)
        ghi = np.zeros_like(hi)
    else:
        lo = np.asarray(C.alpha, dtype=float).reshape(n, -1)
        hi = np.asarray(C.beta, dtype=float).reshape(n, -1)
        glo = np.gradient(lo, grid.dx, axis=0)
        ghi = np.gradient(hi, grid.dx, axis=0)
    if lo.shape[1] != components:
        raise ValueError("constraint dimension %d != components %d"
                         % (lo.shape[1], components))
    return lo, hi, glo, ghi


def _box_face_items(field, C, grid, components, samples, rng, tol):
    # At a state touching a bound from inside, the touching component's
    # gradient matches the bound's; free components carry the bound mean
    # slope as a neutral stand-in.
    lo, hi, glo, ghi = _node_bounds(C, grid, components)
    n = grid.n
    items = []
    for i in range(components):
        for side in ("low", "high"):
            worst = np.inf
            witness = None
            for _ in range(samples):
                j = int(rng.integers(n))
                u = lo[j] + rng.random(components) * (hi[j] - lo[j])
                p = 0.5 * (glo[j] + ghi[j])
                if side == "low":
                    u[i] = lo[j, i]
                    p[i] = glo[j, i]
                else:
                    u[i] = hi[j, i]
                    p[i] = ghi[j, i]
                val = field.evaluate(grid.nodes[j], u, p)
                margin = val.hi[i] if side == "low" else -val.lo[i]
                if margin < worst:
                    worst = margin
                    if margin < -tol:
                        witness = _witness(grid.nodes[j], u, p,
                                           [val.lo.tolist(), val.hi.tolist()],
                                           -margin)
            items.append(ConditionItem("face[%d].%s" % (i, side),
                                       worst >= -tol, float(worst), witness))
    return items


def _ball_items(field, C, grid, samples, rng, tol):
    N = C.dim
    worst = np.inf
    witness = None
    for _ in range(samples):
        j = int(rng.integers(grid.n))
        d = rng.standard_normal(N)
        d /= np.linalg.norm(d)
        u = C.center + C.radius * d
        p = np.zeros(N)
        val = field.evaluate(grid.nodes[j], u, p)
        # inward admissibility: some value y with outward component <= 0
        inner_min = np.sum(np.minimum(d * val.lo, d * val.hi))
        margin = -inner_min
        if margin < worst:
            worst = margin
            if margin < -tol:
                witness = _witness(grid.nodes[j], u, p,
                                   [val.lo.tolist(), val.hi.tolist()], -margin)
    return [ConditionItem("sphere", worst >= -tol, float(worst), witness)]


def verify_tangency(field, C=None, grid=None, samples=10000, seed=42,
                    tol=1e-9):
    """Sampled check that admissible values point into the constraint.

    The first argument may be a parsed problem description (constraint
    and grid are then built from it) or a bare nonlinearity paired with
    an explicit constraint and grid.  Boxes and nodewise bound pairs are
    checked face by face; balls over sampled boundary directions.
    Gradient arguments at a face follow the bound's own slope, since a
    touching state has to share it.
    """
    if C is None and hasattr(field, "build_field"):
        spec = field
        grid = spec.build_grid()
        C = spec.build_constraint(grid)
        field = spec.build_field()
    if C is None or grid is None:
        raise ValueError("need a constraint set and a grid")
    rng = np.random.default_rng(seed)
    N = field.components
    if isinstance(C, Ball):
        items = _ball_items(field, C, grid, samples, rng, tol)
    elif isinstance(C, (Box, MovingBox)):
        items = _box_face_items(field, C, grid, N, samples, rng, tol)
    else:
        raise ValueError("no tangency verifier for %r" % type(C).__name__)
    return ConditionReport(items=items)


# ---------------------------------------------------------------------------
# Bernstein-type conditions for gradient-dependent problems


def verify_bernstein(phi, R, a, b, c, length=1.0, samples=10000, seed=42,
                     tol=1e-9):
    """Check the sign, growth, and sphere conditions for phi on |u| <= R.

    * sign:   some admissible value y has  y . u <= 0  whenever |u| > R
              (sampled up to |u| = 2R + 1) with zero gradient argument;
    * growth: every admissible value obeys |y| <= a|p|^2 + b on |u| <= R;
    * sphere: some admissible y has  y . u <= c R^2  when |u| = R and
              u . p = 0.
    """
    fld = as_field(phi)
    N = fld.components
    rng = np.random.default_rng(seed)
    xs = rng.random(samples) * length
    pmax = max(1.0, 2.0 * R)

    def directions(count):
        d = rng.standard_normal((count, N))
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    sign_worst, sign_wit = np.inf, None
    for x, d in zip(xs, directions(samples)):
        radius = R + rng.random() * (R + 1.0)
        u = radius * d
        val = fld.evaluate(x, u, np.zeros(N))
        inner_min = np.sum(np.minimum(u * val.lo, u * val.hi))
        margin = -inner_min
        if margin < sign_worst:
            sign_worst = margin
            if margin < -tol:
                sign_wit = _witness(x, u, np.zeros(N),
                                    [val.lo.tolist(), val.hi.tolist()],
                                    -margin)

    growth_worst, growth_wit = np.inf, None
    for x in xs:
        u = R * (2.0 * rng.random(N) - 1.0)
        p = pmax * (2.0 * rng.random(N) - 1.0)
        val = fld.evaluate(x, u, p)
        margin = a * float(np.dot(p, p)) + b - val.sup_norm()
        if margin < growth_worst:
            growth_worst = margin
            if margin < -tol:
                growth_wit = _witness(x, u, p,
                                      [val.lo.tolist(), val.hi.tolist()],
                                      -margin)

    sphere_worst, sphere_wit = np.inf, None
    for x, d in zip(xs, directions(samples)):
        u = R * d
        if N == 1:
            p = np.zeros(1)
        else:
            raw = rng.standard_normal(N)
            raw -= d * np.dot(raw, d)
            p = raw
        val = fld.evaluate(x, u, p)
        inner_min = np.sum(np.minimum(u * val.lo, u * val.hi))
        margin = c * R * R - inner_min
        if margin < sphere_worst:
            sphere_worst = margin
            if margin < -tol:
                sphere_wit = _witness(x, u, p,
                                      [val.lo.tolist(), val.hi.tolist()],
                                      -margin)

    items = [
        ConditionItem("sign_outside_ball", bool(sign_worst >= -tol),
                      float(sign_worst), sign_wit),
        ConditionItem("quadratic_growth", bool(growth_worst >= -tol),
                      float(growth_worst), growth_wit),
        ConditionItem("sphere_tangency", bool(sphere_worst >= -tol),
                      float(sphere_worst), sphere_wit),
    ]
    return ConditionReport(items=items)


# ---------------------------------------------------------------------------
# discrete sub/supersolution shape inequalities


def verify_subsuper(alpha, beta, grid, tol=1e-9):
    """Shape check for a bound pair on a Dirichlet problem.

    alpha must be discretely subharmonic (second differences >= -tol at
    interior nodes), beta superharmonic, alpha <= beta everywhere, and
    the pinned boundary values must satisfy alpha <= 0 <= beta.  The
    check is purely geometric; the nonlinearity plays no part.
    """
    n = grid.n
    alpha = np.asarray(alpha, dtype=float).reshape(n, -1)
    beta = np.asarray(beta, dtype=float).reshape(n, -1)
    if alpha.shape != beta.shape:
        raise ValueError("bound arrays must share a shape")
    dx2 = grid.dx * grid.dx

    order = float(np.min(beta - alpha))
    items = [ConditionItem("ordering", bool(order >= -tol), order)]

    d2a = (alpha[2:] - 2.0 * alpha[1:-1] + alpha[:-2]) / dx2
    d2b = (beta[2:] - 2.0 * beta[1:-1] + beta[:-2]) / dx2

    def _extreme(vals, sign, name, source):
        # sign +1: need vals >= -tol; sign -1: need vals <= tol
        signed = sign * vals
        worst = float(np.min(signed))
        witness = None
        if worst < -tol:
            j, i = np.unravel_index(np.argmin(signed), signed.shape)
            witness = {"x": float(grid.nodes[j + 1]),
                       "u": [float(source[j + 1, i])],
                       "second_difference": float(vals[j, i]),
                       "violation": float(-worst)}
        return ConditionItem(name, bool(worst >= -tol), worst, witness)

    items.append(_extreme(d2a, +1.0, "subharmonic_alpha", alpha))
    items.append(_extreme(d2b, -1.0, "superharmonic_beta", beta))

    bmargin = float(min(np.min(-alpha[0]), np.min(-alpha[-1]),
                        np.min(beta[0]), np.min(beta[-1])))
    items.append(ConditionItem("boundary_signs", bool(bmargin >= -tol),
                               bmargin))
    return ConditionReport(items=items)

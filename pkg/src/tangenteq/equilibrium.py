"""Constrained equilibrium iterations built on resolvents and selections.

``resolvent_iterate`` runs the damped fixed-point sweep

    u_next = (1 - damping) * u + damping * J_h( proj_K( u + h * v(u) ) )

where ``v(u)`` is the nodewise minimal-norm tangent selection of the
nonlinearity and ``proj_K`` the nodewise metric projection onto the
constraint.  A converged point solves the discrete inclusion
``0 in A u + F(x, u, u')`` with every nodal value kept inside the
constraint set.

Whenever the sweep's fixed-point defect drops below ``1e-9 * h`` on two
consecutive sweeps the current iterate is recorded as a checkpoint: an
(approximate) fixed point of the current step map.  At such points the
retraction-defect inequality

    ||A u + v||  <=  (1/h) * dist_K-lift(u + h v)  +  slack

holds with slack at roundoff level (the projection is 1-Lipschitz with
equality on the distance), and the recorded pairs let callers audit it.
Harmonic step schedules advance ``h_k = h0 / k`` exactly at checkpoints,
so the checkpoint sequence mirrors the per-step-size fixed points that
drive the vanishing-residual argument.

``truncation_iterate`` is the alternative scheme for Dirichlet problems
with nodewise box bounds: Picard on ``u -> A^{-1}(-v(clamp(u)))`` with an
a-posteriori localization check.  ``viability_simulate`` integrates the
same dynamics without the projection step and tracks the distance to the
constraint as the viability certificate.
"""

from dataclasses import dataclass, field

import numpy as np

from .convex import CONE_TOL, Box
from .errors import EmptyIntersection
from .fields import selection_on_intervals, tangent_selection

_CHECKPOINT_FACTOR = 1e-9


@dataclass
class SolverConfig:
    step_schedule: str = "fixed"     # "fixed" or "harmonic"
    h0: float = 0.5
    max_iter: int = 500
    tol_residual: float = 1e-9
    tol_step: float = 1e-10
    damping: float = 1.0

    def __post_init__(self):
        if self.step_schedule not in ("fixed", "harmonic"):
            raise ValueError("unknown step schedule %r" % (self.step_schedule,))
        if self.h0 <= 0:
            raise ValueError("h0 must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")

    def step(self, k):
        return self.h0 / k if self.step_schedule == "harmonic" else self.h0


@dataclass
class SolveReport:
    u_star: np.ndarray
    residual_history: list
    tangency_residual: float
    constraint_violation: float
    status: str
    iterations: int = 0
    h_final: float = None
    method: str = "resolvent"
    bound_checks: list = field(default_factory=list)
    failure: dict = None

    def to_dict(self):
        return {
            "status": self.status,
            "method": self.method,
            "iterations": int(self.iterations),
            "h_final": None if self.h_final is None else float(self.h_final),
            "residual_history": [float(r) for r in self.residual_history],
            "tangency_residual": float(self.tangency_residual),
            "constraint_violation": float(self.constraint_violation),
            "bound_checks": self.bound_checks,
            "failure": self.failure,
        }


class _NodewiseConstraint:
    """Uniform or node-dependent constraint applied at every grid node.

    Boxes (including nodewise bound arrays) get vectorized projections and
    closed-form cone clipping; any other convex body falls back to the
    per-node selection machinery.
    """

    def __init__(self, C, n, N):
        self.body = None
        self.lo = None
        self.hi = None
        if isinstance(C, Box):
            self.lo = np.tile(C.lo, (n, 1))
            self.hi = np.tile(C.hi, (n, 1))
        elif hasattr(C, "alpha") and hasattr(C, "beta"):
            self.lo = np.broadcast_to(
                np.asarray(C.alpha, dtype=float).reshape(n, -1), (n, N)).copy()
            self.hi = np.broadcast_to(
                np.asarray(C.beta, dtype=float).reshape(n, -1), (n, N)).copy()
            if np.any(self.lo > self.hi):
                raise ValueError("lower bound exceeds upper bound somewhere")
        else:
            self.body = C
            if C.dim != N:
                raise ValueError("constraint dimension %d != components %d"
                                 % (C.dim, N))

    def is_box(self):
        return self.lo is not None

    def project(self, U):
        if self.is_box():
            return np.clip(U, self.lo, self.hi)
        return np.array([self.body.project(row) for row in U])

    def distances(self, U):
        if self.is_box():
            gap = U - np.clip(U, self.lo, self.hi)
            return np.linalg.norm(gap, axis=1)
        return np.array([self.body.distance(row) for row in U])

    def select(self, field_, xs, U, P, vlo, vhi, tol=CONE_TOL):
        """Nodewise minimal-norm tangent selection.

        Returns (v, failure) where failure is None or a witness dict for
        the first node whose admissible values miss the tangent cone.
        The interval gap tolerance matches the face activation tolerance:
        a state within ``tol`` of a face may carry values that overshoot
        the face cone by the same amount without leaving the set's
        distance derivative above ``tol``.
        """
        if self.is_box():
            low = U - self.lo <= tol
            up = self.hi - U <= tol
            clo = np.where(low, 0.0, -np.inf)
            chi = np.where(up, 0.0, np.inf)
            v, empty = selection_on_intervals(vlo, vhi, clo, chi,
                                              gap_tol=tol)
            bad = np.nonzero(np.any(empty, axis=1))[0]
            if bad.size:
                j = int(bad[0])
                return None, _witness(j, xs[j], U[j],
                                      "admissible values miss the face cone")
            return v, None
        v = np.empty_like(U)
        for j in range(U.shape[0]):
            try:
                v[j] = tangent_selection(field_, self.body, xs[j],
                                         self.project(U[j:j + 1])[0], P[j],
                                         tol=tol, gap_tol=tol)
            except EmptyIntersection as exc:
                return None, _witness(j, xs[j], U[j], str(exc))
        return v, None


def _witness(node, x, u, reason):
    return {"node": int(node), "x": float(x),
            "u": [float(c) for c in np.atleast_1d(u)], "reason": reason}


def _field_boxes(field_, xs, U, P):
    n, N = U.shape
    vlo = np.empty((n, N))
    vhi = np.empty((n, N))
    for j in range(n):
        val = field_.evaluate(xs[j], U[j], P[j])
        vlo[j] = val.lo
        vhi[j] = val.hi
    return vlo, vhi


def _equation_residual(op, AU, vlo, vhi):
    target = -AU
    gap = target - np.clip(target, vlo, vhi)
    r = np.linalg.norm(gap, axis=1)
    return op.grid.norm(r, mask=op.equation_mask())


def _as_grid_function(u0, n, N):
    U = np.asarray(u0, dtype=float)
    if U.ndim == 1 and N == 1:
        U = U[:, None]
    if U.shape != (n, N):
        raise ValueError("initial state must have shape (%d, %d)" % (n, N))
    return U.copy()


def _in_caller_shape(U, u0):
    """Return the (n, N) state in the shape the caller supplied u0 in
    (single-component states default to flat vectors)."""
    if U.shape[1] == 1 and (u0 is None or np.ndim(u0) != 2):
        return U[:, 0]
    return U


def _plateau_status(history, tol_residual):
    tail = history[-max(1, len(history) // 5):]
    if not tail:
        return "max_iter"
    flat = tail[0] - tail[-1] <= 0.05 * max(tail[0], 1e-300)
    if min(tail) > 10.0 * tol_residual and flat:
        return "non_convergence"
    return "max_iter"


def resolvent_iterate(op, field_, C, u0, config=None):
    """Drive the damped resolvent sweep to a constrained equilibrium.

    Returns a SolveReport; tangency failures are reported through its
    status/failure fields (node, position, state) rather than raised.
    """
    config = config or SolverConfig()
    n, N = op.grid.n, op.spec.components
    xs = op.grid.nodes
    K = _NodewiseConstraint(C, n, N)
    u = K.project(_as_grid_function(u0, n, N))

    history = []
    checks = []
    k_outer = 1
    prev_defect = np.inf
    status = None
    failure = None
    h = config.step(k_outer)
    it = 0

    for it in range(1, config.max_iter + 1):
        h = config.step(k_outer)
        AU = op.apply(u)
        P = op.gradient(u)
        vlo, vhi = _field_boxes(field_, xs, u, P)
        history.append(_equation_residual(op, AU, vlo, vhi))
        v, failure = K.select(field_, xs, u, P, vlo, vhi)
        if failure is not None:
            status = "tangency_failure"
            break

        lifted = u + h * v
        d_lift = op.grid.norm(K.distances(lifted))
        w = K.project(lifted)
        z = op.resolvent(h, w)
        defect = op.grid.norm(z - u)

        cp_tol = _CHECKPOINT_FACTOR * h
        at_checkpoint = defect <= cp_tol and prev_defect <= cp_tol
        if at_checkpoint:
            lhs = op.grid.norm(AU + v, mask=op.equation_mask())
            checks.append({"iteration": it, "h": float(h),
                           "residual_norm": float(lhs),
                           "distance_bound": float(d_lift / h)})
            if config.step_schedule == "harmonic":
                k_outer += 1
        prev_defect = defect

        # near the fixed point the undamped step is the checkpointed one
        u_next = z if defect <= cp_tol else (1.0 - config.damping) * u \
            + config.damping * z
        step_norm = op.grid.norm(u_next - u)
        u = u_next

        violation = float(np.max(K.distances(u)))
        if history[-1] <= config.tol_residual and step_norm <= config.tol_step \
                and violation <= max(config.tol_step, 1e-12):
            status = "converged"
            break

    if status is None:
        status = _plateau_status(history, config.tol_residual)

    violation = float(np.max(K.distances(u)))
    tangency = 0.0
    if status != "tangency_failure":
        try:
            P = op.gradient(u)
            vlo, vhi = _field_boxes(field_, xs, u, P)
            v, fail2 = K.select(field_, xs, u, P, vlo, vhi)
            if fail2 is None:
                tangency = op.grid.norm(K.distances(u + h * v)) / h
            else:
                tangency = float("inf")
        except EmptyIntersection:
            tangency = float("inf")
    else:
        tangency = float("inf")

    return SolveReport(u_star=_in_caller_shape(u, u0),
                       residual_history=history,
                       tangency_residual=tangency,
                       constraint_violation=violation, status=status,
                       iterations=it, h_final=h, method="resolvent",
                       bound_checks=checks, failure=failure)


def _nodewise_bound(b, n, N):
    arr = np.asarray(b, dtype=float)
    if arr.ndim == 0:
        return np.full((n, N), float(arr))
    if arr.ndim == 1:
        arr = arr[:, None]
    return np.broadcast_to(arr, (n, N)).astype(float).copy()


def truncation_iterate(op, field_, alpha, beta, config=None, u0=None):
    """Picard iteration ``u -> A^{-1}(-v(clamp(u)))`` on Dirichlet problems.

    ``alpha`` and ``beta`` are nodewise lower/upper bounds (scalars
    broadcast).  The clamp localizes every field evaluation inside the
    bounds; once the iteration settles, the solution itself must sit
    inside them or the report flags ``localization_failed``.
    """
    config = config or SolverConfig()
    n, N = op.grid.n, op.spec.components
    xs = op.grid.nodes
    lo = _nodewise_bound(alpha, n, N)
    hi = _nodewise_bound(beta, n, N)
    if np.any(lo > hi):
        raise ValueError("alpha must stay below beta")

    class _Bounds:
        alpha = lo
        beta = hi

    K = _NodewiseConstraint(_Bounds, n, N)
    u = _as_grid_function(u0, n, N) if u0 is not None \
        else np.clip(np.zeros((n, N)), lo, hi)

    history = []
    status = None
    failure = None
    it = 0
    for it in range(1, config.max_iter + 1):
        uc = np.clip(u, lo, hi)
        AUc = op.apply(uc)
        P = op.gradient(uc)
        vlo, vhi = _field_boxes(field_, xs, uc, P)
        history.append(_equation_residual(op, AUc, vlo, vhi))
        v, failure = K.select(field_, xs, uc, P, vlo, vhi)
        if failure is not None:
            status = "tangency_failure"
            break
        target = op.solve_stationary(-v)
        u_next = (1.0 - config.damping) * u + config.damping * target
        step_norm = op.grid.norm(u_next - u)
        u = u_next
        if history[-1] <= config.tol_residual and step_norm <= config.tol_step:
            status = "converged"
            break

    if status is None:
        status = _plateau_status(history, config.tol_residual)

    escape = u - np.clip(u, lo, hi)
    violation = float(np.max(np.linalg.norm(escape, axis=1)))
    if status == "converged" and violation > max(10.0 * config.tol_step, 1e-9):
        status = "localization_failed"
        j = int(np.argmax(np.linalg.norm(escape, axis=1)))
        failure = _witness(j, xs[j], u[j], "solution escapes the bounds")

    tangency = 0.0
    if status in ("converged", "max_iter", "non_convergence"):
        uc = np.clip(u, lo, hi)
        P = op.gradient(uc)
        vlo, vhi = _field_boxes(field_, xs, uc, P)
        v, fail2 = K.select(field_, xs, uc, P, vlo, vhi)
        if fail2 is None:
            dd = np.abs(v) * ((uc - lo <= CONE_TOL) & (v < 0)) \
                + np.abs(v) * ((hi - uc <= CONE_TOL) & (v > 0))
            tangency = float(np.max(np.linalg.norm(dd, axis=1)))
        else:
            tangency = float("inf")

    return SolveReport(u_star=_in_caller_shape(u, u0),
                       residual_history=history,
                       tangency_residual=tangency,
                       constraint_violation=violation, status=status,
                       iterations=it, h_final=None, method="truncation",
                       bound_checks=[], failure=failure)


@dataclass
class TrajectoryReport:
    terminal_state: np.ndarray
    max_constraint_distance: float
    terminal_residual: float
    steps: int
    h: float
    status: str
    failure: dict = None

    def to_dict(self):
        return {
            "status": self.status,
            "steps": int(self.steps),
            "h": float(self.h),
            "max_constraint_distance": float(self.max_constraint_distance),
            "terminal_residual": float(self.terminal_residual),
            "failure": self.failure,
        }


def viability_simulate(op, field_, C, u0, t_end, h):
    """Implicit Euler with tangential selections but NO projection step.

    The trajectory's worst nodewise distance to the constraint is the
    viability certificate: tangency keeps it at discretization level.
    Selections are queried at the nodewise projection of the state (the
    cone lives on the set) while the state itself evolves unprojected.
    """
    if t_end <= 0 or h <= 0:
        raise ValueError("horizon and step must be positive")
    n, N = op.grid.n, op.spec.components
    xs = op.grid.nodes
    K = _NodewiseConstraint(C, n, N)
    u = _as_grid_function(u0, n, N)
    steps = int(np.ceil(t_end / h))

    worst = float(np.max(K.distances(u)))
    status = "completed"
    failure = None
    for _ in range(steps):
        shadow = K.project(u)
        P = op.gradient(shadow)
        vlo, vhi = _field_boxes(field_, xs, shadow, P)
        v, failure = K.select(field_, xs, shadow, P, vlo, vhi)
        if failure is not None:
            status = "tangency_failure"
            break
        u = op.resolvent(h, u + h * v)
        worst = max(worst, float(np.max(K.distances(u))))

    shadow = K.project(u)
    P = op.gradient(shadow)
    vlo, vhi = _field_boxes(field_, xs, shadow, P)
    terminal = _equation_residual(op, op.apply(u), vlo, vhi)
    return TrajectoryReport(terminal_state=_in_caller_shape(u, u0),
                            max_constraint_distance=worst,
                            terminal_residual=terminal, steps=steps, h=h,
                            status=status, failure=failure)


def residual(op, field_, C, u):
    """(equation_residual, tangency_residual) at a given state.

    The equation part is the grid-weighted distance of ``-A u`` to the
    admissible value boxes; the tangency part is the largest directional
    derivative of the nodewise constraint distance along the selected
    tangent values (zero when every selection is genuinely tangent).
    """
    n, N = op.grid.n, op.spec.components
    xs = op.grid.nodes
    K = _NodewiseConstraint(C, n, N)
    U = _as_grid_function(u, n, N)
    P = op.gradient(U)
    vlo, vhi = _field_boxes(field_, xs, U, P)
    eq = _equation_residual(op, op.apply(U), vlo, vhi)
    v, failure = K.select(field_, xs, U, P, vlo, vhi)
    if failure is not None:
        raise EmptyIntersection(failure["reason"])
    if K.is_box():
        low = U - K.lo <= CONE_TOL
        up = K.hi - U <= CONE_TOL
        bad = np.where(low & (v < 0), -v, 0.0) + np.where(up & (v > 0), v, 0.0)
        tang = float(np.max(np.linalg.norm(bad, axis=1)))
    else:
        dds = [K.body.tangent_cone_contains(K.project(U[j:j + 1])[0], v[j])
               .directional_derivative for j in range(n)]
        tang = float(np.max(dds))
    return eq, tang

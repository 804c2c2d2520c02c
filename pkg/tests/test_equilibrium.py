"""Constrained equilibrium sweeps, truncation scheme, viability runs."""

import json

import numpy as np
import pytest

from tangenteq import (Grid1D, OperatorSpec, assemble, Box, SingleValued,
                       SolverConfig, resolvent_iterate, truncation_iterate,
                       viability_simulate, residual, EmptyIntersection,
                       MovingBox)


def _neumann_op(n=101, components=1):
    return assemble(OperatorSpec(bc="neumann", components=components),
                    Grid1D(1.0, n))


def _dirichlet_op(n=101):
    return assemble(OperatorSpec(bc="dirichlet"), Grid1D(1.0, n))


def _relaxing_field():
    return SingleValued(lambda x, u, p: 0.5 - u)


def _bvp_field():
    return SingleValued(lambda x, u, p: 1.0 - u)


def _bvp_solution(xs):
    return 1.0 - np.cosh(xs - 0.5) / np.cosh(0.5)


UNIT_BOX = Box([0.0], [1.0])


def test_constant_steady_state_from_three_starts():
    op = _neumann_op()
    rng = np.random.default_rng(1)
    starts = [np.zeros(101), np.ones(101), rng.uniform(0.0, 1.0, 101)]
    for u0 in starts:
        rep = resolvent_iterate(op, _relaxing_field(), UNIT_BOX, u0)
        assert rep.status == "converged"
        assert rep.iterations <= 500
        assert np.max(np.abs(rep.u_star - 0.5)) <= 1e-8
        eq, tang = residual(op, _relaxing_field(), UNIT_BOX, rep.u_star)
        assert eq <= 1e-8
        assert tang <= 1e-8


def test_converged_report_honors_its_own_invariant():
    cfg = SolverConfig(tol_residual=1e-9, tol_step=1e-10)
    rep = resolvent_iterate(_neumann_op(), _relaxing_field(), UNIT_BOX,
                            np.zeros(101), cfg)
    assert rep.status == "converged"
    assert rep.residual_history[-1] <= cfg.tol_residual
    assert rep.constraint_violation <= cfg.tol_step
    payload = json.dumps(rep.to_dict())
    assert "converged" in payload


def test_fixed_point_consistency_at_the_solution():
    """Feeding the converged state back through one sweep must move it by
    no more than the step tolerance."""
    op = _neumann_op()
    rep = resolvent_iterate(op, _relaxing_field(), UNIT_BOX, np.zeros(101))
    again = resolvent_iterate(op, _relaxing_field(), UNIT_BOX, rep.u_star,
                              SolverConfig(max_iter=1))
    assert op.grid.norm(again.u_star - rep.u_star) <= 1e-8


def test_dirichlet_bvp_matches_analytic_solution():
    op = _dirichlet_op(201)
    rep = resolvent_iterate(op, _bvp_field(), Box([-1.0], [1.0]),
                            np.zeros(201))
    assert rep.status == "converged"
    xs = op.grid.nodes
    assert np.max(np.abs(rep.u_star - _bvp_solution(xs))) <= 1e-3
    mid = rep.u_star[100]
    assert mid == pytest.approx(1.0 - 1.0 / np.cosh(0.5), abs=1e-3)


def test_bound_checks_satisfy_residual_distance_inequality():
    """Recorded checkpoints must obey the L = 1 bound
    ||A u + v|| <= d_lift(u + h v) / h + 1e-8, on both schedules."""
    runs = [
        (_neumann_op(), _relaxing_field(), UNIT_BOX, SolverConfig()),
        (_neumann_op(), _relaxing_field(), UNIT_BOX,
         SolverConfig(step_schedule="harmonic", h0=0.8, max_iter=2000)),
        (_dirichlet_op(), _bvp_field(), Box([-1.0], [1.0]), SolverConfig()),
    ]
    for op, field_, body, cfg in runs:
        rep = resolvent_iterate(op, field_, body, np.zeros(op.grid.n), cfg)
        assert rep.status == "converged"
        assert len(rep.bound_checks) >= 1
        for chk in rep.bound_checks:
            assert chk["residual_norm"] <= chk["distance_bound"] + 1e-8
            assert chk["h"] > 0


def test_harmonic_schedule_shrinks_the_step():
    cfg = SolverConfig(step_schedule="harmonic", h0=0.6)
    assert cfg.step(1) == 0.6
    assert cfg.step(4) == pytest.approx(0.15)
    assert SolverConfig(step_schedule="fixed", h0=0.6).step(9) == 0.6


def test_singleton_field_against_face_reports_tangency_failure():
    field = SingleValued(lambda x, u, p: np.full_like(u, -2.0))
    rep = resolvent_iterate(_neumann_op(), field, UNIT_BOX, np.zeros(101))
    assert rep.status == "tangency_failure"
    assert rep.failure is not None
    assert "node" in rep.failure
    assert rep.tangency_residual == np.inf


def test_initial_state_outside_the_box_is_projected_first():
    rep = resolvent_iterate(_neumann_op(), _relaxing_field(), UNIT_BOX,
                            np.full(101, -5.0))
    assert rep.status == "converged"
    assert np.max(np.abs(rep.u_star - 0.5)) <= 1e-8


def test_moving_box_constraint_behaves_like_the_fixed_box():
    op = _neumann_op()
    moving = MovingBox(alpha=np.zeros((101, 1)), beta=np.ones((101, 1)))
    rep = resolvent_iterate(op, _relaxing_field(), moving, np.zeros(101))
    assert rep.status == "converged"
    assert np.max(np.abs(rep.u_star - 0.5)) <= 1e-8


def test_oscillating_sweep_reports_non_convergence():
    # a stiff field plus a full step makes the damped sweep bounce between
    # the box faces; the residual plateau is reported honestly
    field = SingleValued(lambda x, u, p: 100.0 * (0.5 - u))
    cfg = SolverConfig(max_iter=100)
    rep = resolvent_iterate(_neumann_op(), field, UNIT_BOX, np.zeros(101),
                            cfg)
    assert rep.status == "non_convergence"
    assert len(rep.residual_history) == 100


def test_slow_run_out_of_budget_reports_max_iter():
    field = SingleValued(lambda x, u, p: 0.5 - u)
    cfg = SolverConfig(max_iter=12, damping=0.3, tol_residual=1e-12,
                       tol_step=1e-13)
    rep = resolvent_iterate(_neumann_op(), field, UNIT_BOX, np.zeros(101),
                            cfg)
    assert rep.status == "max_iter"
    assert rep.iterations == 12


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(step_schedule="geometric")
    with pytest.raises(ValueError):
        SolverConfig(h0=0.0)
    with pytest.raises(ValueError):
        SolverConfig(damping=0.0)
    with pytest.raises(ValueError):
        SolverConfig(damping=1.5)


def test_truncation_linear_decay_gives_zero():
    op = _dirichlet_op()
    field = SingleValued(lambda x, u, p: -u)
    rep = truncation_iterate(op, field, alpha=-1.0, beta=1.0)
    assert rep.status == "converged"
    assert rep.method == "truncation"
    assert np.max(np.abs(rep.u_star)) <= 1e-9


def test_truncation_agrees_with_resolvent_on_the_bvp():
    op = _dirichlet_op(201)
    trunc = truncation_iterate(op, _bvp_field(), alpha=-1.0, beta=1.0)
    resolv = resolvent_iterate(op, _bvp_field(), Box([-1.0], [1.0]),
                               np.zeros(201))
    assert trunc.status == "converged"
    assert resolv.status == "converged"
    assert np.max(np.abs(trunc.u_star - resolv.u_star)) <= 1e-6
    xs = op.grid.nodes
    assert np.max(np.abs(trunc.u_star - _bvp_solution(xs))) <= 1e-3


def test_truncation_with_too_tight_ceiling_fails_localization():
    # the analytic solution peaks at about 0.113, so beta = 0.05 lies
    # below it and the a-posteriori containment check must trip
    op = _dirichlet_op()
    rep = truncation_iterate(op, _bvp_field(), alpha=-1.0, beta=0.05)
    assert rep.status in ("localization_failed", "tangency_failure")
    if rep.status == "localization_failed":
        assert rep.failure is not None
        assert rep.constraint_violation > 1e-3


def test_truncation_requires_dirichlet_walls():
    from tangenteq import InvalidSpec

    with pytest.raises(InvalidSpec):
        truncation_iterate(_neumann_op(), _bvp_field(), alpha=-1.0, beta=1.0)


def test_viability_relaxation_stays_inside_and_settles():
    op = _neumann_op()
    rep = viability_simulate(op, _relaxing_field(), UNIT_BOX,
                             np.zeros(101), t_end=20.0, h=0.05)
    assert rep.status == "completed"
    assert rep.steps == 400
    assert rep.max_constraint_distance <= 1e-8
    assert np.max(np.abs(rep.terminal_state - 0.5)) <= 1e-4


def test_viability_from_the_upper_face_decays_inward():
    op = _neumann_op()
    rep = viability_simulate(op, _relaxing_field(), UNIT_BOX,
                             np.ones(101), t_end=20.0, h=0.05)
    assert rep.status == "completed"
    assert rep.max_constraint_distance <= 1e-8
    assert np.max(np.abs(rep.terminal_state - 0.5)) <= 1e-4


def test_viability_positive_field_fails_at_upper_face():
    field = SingleValued(lambda x, u, p: np.ones_like(u))
    rep = viability_simulate(_neumann_op(), field, UNIT_BOX, np.ones(101),
                             t_end=1.0, h=0.05)
    assert rep.status == "tangency_failure"
    assert rep.failure is not None


def test_viability_terminal_state_matches_equilibrium():
    op = _neumann_op()
    traj = viability_simulate(op, _relaxing_field(), UNIT_BOX,
                              np.zeros(101), t_end=25.0, h=0.05)
    eq = resolvent_iterate(op, _relaxing_field(), UNIT_BOX, np.zeros(101))
    assert np.max(np.abs(traj.terminal_state - eq.u_star)) <= 1e-6


def test_viability_rejects_bad_horizon():
    with pytest.raises(ValueError):
        viability_simulate(_neumann_op(), _relaxing_field(), UNIT_BOX,
                           np.zeros(101), t_end=0.0, h=0.05)
    with pytest.raises(ValueError):
        viability_simulate(_neumann_op(), _relaxing_field(), UNIT_BOX,
                           np.zeros(101), t_end=1.0, h=-0.1)


def test_residual_constant_field_at_zero_state():
    op = _neumann_op()
    eq, tang = residual(op, _relaxing_field(), UNIT_BOX, np.zeros(101))
    # Au = 0 and the admissible value is 0.5 everywhere, so the grid norm
    # of the defect over [0,1] is exactly 0.5
    assert eq == pytest.approx(0.5, abs=1e-12)
    assert tang == 0.0


def test_residual_vanishes_on_the_exact_discrete_solution():
    n = 101
    shifted = assemble(OperatorSpec(bc="dirichlet", shift=1.0),
                       Grid1D(1.0, n))
    u = shifted.solve_stationary(np.full(n, -1.0))
    op = _dirichlet_op(n)
    eq, tang = residual(op, _bvp_field(), Box([-1.0], [1.0]), u)
    assert eq <= 1e-10
    assert tang <= 1e-12


def test_residual_interior_state_has_zero_tangency():
    op = _neumann_op()
    field = SingleValued(lambda x, u, p: 7.0 + u)
    eq, tang = residual(op, field, UNIT_BOX, np.full(101, 0.4))
    assert tang == 0.0
    assert eq > 1.0


def test_residual_raises_when_no_admissible_value_exists():
    field = SingleValued(lambda x, u, p: np.full_like(u, -2.0))
    with pytest.raises(EmptyIntersection):
        residual(_neumann_op(), field, UNIT_BOX, np.zeros(101))

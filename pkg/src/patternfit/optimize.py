"""Cost functional, reduced gradient and projected gradient descent.

The discrete cost of a final configuration against the desired pattern is

    J = (N/2) * W2^2(final, desired)
      + (lambda1/2) * (theta - theta_ref)^2
      + (lambda2/2) * (eta - eta_ref)^2,

with the exact transport plan behind the Wasserstein term.  The reduced
gradient contracts the control derivatives of the pair forces with the
costates; paired with the N-scaled terminal condition its interaction term
carries the 1/N^2 prefactor.  The descent update is ``u <- P(u - tau*g)``
with Armijo backtracking for ``tau`` and the relative-gradient stopping rule
``||g_k||_1 / ||g_0||_1 < eps_stop``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import adjoint as adjoint_mod
from . import forces, transport
from .dynamics import ParticleState, Trajectory, simulate
from .params import Control, ForceParams


@dataclass(frozen=True)
class OptimizerOptions:
    """Constants of the cost functional and the descent loop."""

    lambda1: float = 1e-5
    lambda2: float = 1e-3
    theta_ref: float = 0.5 * math.pi
    eta_ref: float = 1.0
    eps_stop: float = 0.05
    max_iterations: int = 50
    tau0: float = 1.0
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 30
    adjoint_scheme: str = "discrete"
    orientation: str = "transposed"


@dataclass(frozen=True)
class CostBreakdown:
    j1: float
    j2: float
    j3: float

    @property
    def total(self) -> float:
        return self.j1 + self.j2 + self.j3


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    cost: CostBreakdown
    grad_theta: float
    grad_eta: float
    grad_rel: float
    theta: float
    eta: float
    tau: float


@dataclass
class OptimizeResult:
    control: Control
    history: list
    iterations: int
    converged: bool
    final_state: ParticleState
    stop_reason: str
    final_w2_squared: float


def evaluate_cost(final, desired, u: Control, opts: OptimizerOptions,
                  plan: transport.TransportPlan = None) -> CostBreakdown:
    """Cost parts for a final state against the desired pattern.

    ``j1 = total assignment cost / 2`` equals ``(N/2) * W2^2`` for uniform
    weights.  A precomputed plan for the same pair of states may be passed to
    avoid a second assignment solve.
    """
    final_pos = final.positions if isinstance(final, ParticleState) else np.asarray(final, float)
    desired_pos = desired.positions if isinstance(desired, ParticleState) else np.asarray(desired, float)
    if final_pos.shape != desired_pos.shape:
        raise ValueError("final and desired states must have the same particle count")
    if plan is None:
        plan = transport.transport_plan(final_pos, desired_pos)
    j1 = 0.5 * plan.total_cost
    j2 = 0.5 * opts.lambda1 * (u.theta - opts.theta_ref) ** 2
    j3 = 0.5 * opts.lambda2 * (u.eta - opts.eta_ref) ** 2
    return CostBreakdown(j1, j2, j3)


def project_control(u: Control, p: ForceParams) -> Control:
    """Clamp eta to the admissible box; theta is unconstrained."""
    return u.clipped(p)


def reduced_gradient(traj: Trajectory, adj: adjoint_mod.AdjointTrajectory, u: Control,
                     p: ForceParams, opts: OptimizerOptions) -> tuple:
    """Gradient (g_theta, g_eta) of the reduced cost from the costate sweep.

    The time quadrature pairs the pair-force control derivatives at the left
    grid endpoint ``x(t_k)`` with the costates that multiply that step's
    dynamics: ``xi(t_{k+1})`` for the exact-discrete sweep, ``xi(t_k)`` for
    the implicit one.
    """
    if adj.n_steps != traj.n_steps:
        raise ValueError("forward and costate trajectories must share the grid")
    n = traj.n_particles
    shift = 1 if opts.adjoint_scheme == "discrete" else 0
    acc_theta = 0.0
    acc_eta = 0.0
    for k in range(traj.n_steps):
        xi = adj.costates[k + shift]
        if _kernels.enabled():
            at, ae = _kernels.grad_contract_kernel(
                traj.positions[k], xi, u.theta, u.eta,
                p.alpha, p.beta, p.gamma, p.e_r, p.e_a, p.chi)
            acc_theta += at.sum()
            acc_eta += ae.sum()
            continue
        disp = forces.pair_displacements(traj.positions[k])
        d_theta, d_eta = forces.force_grad_control(disp, u, p)
        acc_theta += np.einsum("ijc,ic->", d_theta, xi)
        acc_eta += np.einsum("ijc,ic->", d_eta, xi)
    scale = traj.dt / n ** 2
    g_theta = opts.lambda1 * (u.theta - opts.theta_ref) - scale * acc_theta
    g_eta = opts.lambda2 * (u.eta - opts.eta_ref) - scale * acc_eta
    return float(g_theta), float(g_eta)


class StepFailure(Exception):
    """No Armijo-acceptable step size; the driver treats this as a stall."""


def line_search(u: Control, grad, evaluate, p: ForceParams, opts: OptimizerOptions,
                current: CostBreakdown = None):
    """Backtracking line search along the projected negative gradient.

    ``evaluate(control)`` must return ``(CostBreakdown, payload)``; the payload
    of the accepted trial is passed through.  Accepts the first ``tau`` with

        total(P(u - tau*g)) <= total(u) - c * tau * |g|^2.

    Raises ``StepFailure`` after ``max_backtracks`` halvings.
    """
    g_theta, g_eta = grad
    if not (math.isfinite(g_theta) and math.isfinite(g_eta)):
        raise ValueError("gradient must be finite")
    if current is None:
        current, _ = evaluate(u)
    g_sq = g_theta ** 2 + g_eta ** 2
    tau = opts.tau0
    for _ in range(opts.max_backtracks + 1):
        trial = project_control(Control(u.theta - tau * g_theta, u.eta - tau * g_eta), p)
        cost, payload = evaluate(trial)
        if cost.total <= current.total - opts.armijo_c * tau * g_sq:
            return tau, trial, cost, payload
        tau *= opts.backtrack_factor
    raise StepFailure(f"no acceptable step after {opts.max_backtracks} halvings")


def run_optimization(initial, desired, u0: Control, p: ForceParams, dt: float, steps: int,
                     opts: OptimizerOptions = OptimizerOptions(),
                     callback=None) -> OptimizeResult:
    """Projected gradient descent for the control identification problem.

    Parameters
    ----------
    initial, desired : ParticleState or array (N, 2)
        Starting configuration of the forward solves and the target pattern.
    u0 : Control
        Initial control; projected onto the admissible box before use.
    p, dt, steps : force coefficients and time grid of every forward solve.
    opts : OptimizerOptions

    Returns the final control, the per-iteration history, and the final state
    of the last accepted forward solve.
    """
    initial_pos = initial.positions if isinstance(initial, ParticleState) else np.asarray(initial, float)
    desired_pos = desired.positions if isinstance(desired, ParticleState) else np.asarray(desired, float)

    def evaluate(control):
        traj = simulate(initial_pos, control, p, dt, steps)
        plan = transport.transport_plan(traj.positions[-1], desired_pos)
        return evaluate_cost(traj.final_state, desired_pos, control, opts, plan), (traj, plan)

    def gradient_at(control, traj, plan):
        xi_T = traj.n_particles * transport.transport_displacements(
            traj.positions[-1], desired_pos, plan)
        if opts.adjoint_scheme == "discrete":
            # fused sweep: one pass computes costates and gradient quadrature
            _, acc_theta, acc_eta = adjoint_mod.sweep_with_gradient(
                traj, control, xi_T, p, opts.orientation)
            scale = traj.dt / traj.n_particles ** 2
            return (float(opts.lambda1 * (control.theta - opts.theta_ref) - scale * acc_theta),
                    float(opts.lambda2 * (control.eta - opts.eta_ref) - scale * acc_eta))
        adj = adjoint_mod.solve_adjoint(traj, control, xi_T, p,
                                        scheme=opts.adjoint_scheme,
                                        orientation=opts.orientation)
        return reduced_gradient(traj, adj, control, p, opts)

    u = project_control(u0, p)
    cost, (traj, plan) = evaluate(u)
    grad = gradient_at(u, traj, plan)
    g0_norm = abs(grad[0]) + abs(grad[1])
    history = [IterationRecord(0, cost, grad[0], grad[1], 1.0 if g0_norm > 0 else 0.0,
                               u.theta, u.eta, math.nan)]
    if callback is not None:
        callback(history[0])

    if g0_norm == 0.0:
        return OptimizeResult(u, history, 0, True, traj.final_state, "gradient", plan.w2_squared)

    converged = False
    stop_reason = "max_iterations"
    iterations = 0
    for it in range(1, opts.max_iterations + 1):
        try:
            tau, u, cost, (traj, plan) = line_search(u, grad, evaluate, p, opts, current=cost)
        except StepFailure:
            stop_reason = "stalled"
            break
        iterations = it
        grad = gradient_at(u, traj, plan)
        grad_rel = (abs(grad[0]) + abs(grad[1])) / g0_norm
        history.append(IterationRecord(it, cost, grad[0], grad[1], grad_rel,
                                       u.theta, u.eta, tau))
        if callback is not None:
            callback(history[-1])
        if grad_rel < opts.eps_stop:
            converged = True
            stop_reason = "gradient"
            break

    return OptimizeResult(u, history, iterations, converged, traj.final_state,
                          stop_reason, plan.w2_squared)


def export_history_csv(path, history):
    """Write the iteration history with the schema
    ``iter,j1,j2,j3,total,grad_theta,grad_eta,grad_rel,theta,eta,tau``."""
    with open(path, "w") as fh:
        fh.write("iter,j1,j2,j3,total,grad_theta,grad_eta,grad_rel,theta,eta,tau\n")
        for rec in history:
            c = rec.cost
            fh.write(f"{rec.iteration},{float(c.j1)!r},{float(c.j2)!r},{float(c.j3)!r},"
                     f"{float(c.total)!r},{float(rec.grad_theta)!r},{float(rec.grad_eta)!r},"
                     f"{float(rec.grad_rel)!r},{float(rec.theta)!r},{float(rec.eta)!r},"
                     f"{float(rec.tau)!r}\n")

"""Costate (adjoint) system: terminal condition and backward-in-time sweeps.

With ``A_ij`` the position Jacobian of the periodic force at ``wrap(x_i - x_j)``,
the costate generator in backward time ``s = T - t`` is

    (G xi)_i = (1/N) sum_j A~_ij xi_i - (1/N) sum_j A~_ij xi_j,

where ``A~`` is either ``A`` transposed (default) or ``A`` itself, switchable
via ``orientation``.  The transposed variant is the exact multiplier of the
forward linearization and is the one that passes the end-to-end
finite-difference gradient validation; the plain variant is kept behind the
switch for comparison.

Two backward sweeps are provided:

* ``"discrete"`` (default): explicit step in backward time,
  ``xi_k = xi_{k+1} + dt * G_k xi_{k+1}``.  With the transposed orientation
  this is the exact reverse-mode derivative of the explicit Euler forward
  map, so the assembled control gradient matches finite differences of the
  discrete cost to truncation error.
* ``"implicit"``: solves ``(I - dt*G_k) xi_k = xi_{k+1}`` per step (implicit
  Euler backward in time) with a matrix-free Jacobi-preconditioned iteration;
  unconditionally damping, first-order consistent with the same costate flow.

Both sweeps evaluate the pair Jacobians at the stored forward positions of the
left grid endpoint ``t_k``.  Terminal condition: ``xi_i(T) = N * wrap(x_des_sigma(i)
- x_i(T))`` with the optimal assignment ``sigma``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, forces, transport
from .dynamics import ParticleState, Trajectory
from .params import Control, ForceParams

IMPLICIT_TOL = 1e-10
IMPLICIT_MAX_ITER = 500


class ImplicitSolveError(RuntimeError):
    """Raised when the implicit costate solve stalls; carries the residual."""

    def __init__(self, residual, iterations):
        super().__init__(
            f"implicit costate solve did not reach tolerance {IMPLICIT_TOL:g} "
            f"within {iterations} iterations (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class AdjointTrajectory:
    """Costate snapshots aligned with the forward trajectory grid.

    ``costates`` has shape (steps+1, N, 2); index ``steps`` holds the terminal
    condition.
    """

    costates: np.ndarray
    dt: float

    def __post_init__(self):
        arr = np.asarray(self.costates, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "costates", arr)

    @property
    def n_steps(self) -> int:
        return self.costates.shape[0] - 1


def terminal_condition(final, desired):
    """Costates at final time: N times the connector to the assigned target.

    Returns ``(xi_T, plan)`` so the optimal plan can be reused for the cost.
    """
    final_pos = final.positions if isinstance(final, ParticleState) else np.asarray(final, float)
    desired_pos = desired.positions if isinstance(desired, ParticleState) else np.asarray(desired, float)
    if final_pos.shape != desired_pos.shape:
        raise ValueError("final and desired states must have the same particle count")
    plan = transport.transport_plan(final_pos, desired_pos)
    n = final_pos.shape[0]
    xi = n * transport.transport_displacements(final_pos, desired_pos, plan)
    return xi, plan


class PairOperator:
    """Pairwise Jacobian contraction for one snapshot of positions.

    Exposes the backward-time generator ``G`` without assembling (N, N, 2, 2)
    blocks: the Jacobian decomposes as ``A = a*I + b*B + outer(c, D)`` with
    scalar pair grids ``a``, ``b`` and vector grids ``c``, ``D``, and every
    contraction reduces to (N, N) einsums.
    """

    def __init__(self, positions, u: Control, p: ForceParams, orientation="transposed"):
        if orientation not in ("transposed", "plain"):
            raise ValueError(f"unknown orientation {orientation!r}")
        self.orientation = orientation
        self.n = positions.shape[0]
        self.B = forces.anisotropy_matrix(u.theta, p.chi)
        D = forces.pair_displacements(positions)
        r = np.linalg.norm(D, axis=-1)
        s = u.eta * r
        self.a = u.eta * forces.repulsion_coeff(s, p)
        self.b = u.eta * forces.attraction_coeff(s, p)
        repp = forces.repulsion_coeff_prime(s, p)
        attp = forces.attraction_coeff_prime(s, p)
        inv_r = np.where(r > 0.0, 1.0 / np.where(r > 0.0, r, 1.0), 0.0)
        self.D = D
        self.c = (u.eta ** 2) * inv_r[..., None] * (repp[..., None] * D + attp[..., None] * (D @ self.B.T))

    def _apply_blocks(self, w_j):
        """sum_j A~_ij w[i, j] for a pair field w of shape (N, N, 2)."""
        iso = np.einsum("ij,ijc->ic", self.a, w_j)
        aniso = np.einsum("ij,ijc->ic", self.b, w_j) @ self.B.T
        if self.orientation == "transposed":
            # A^T w = ... + D (c . w)
            rank1 = np.einsum("ijc,ijc->ij", self.c, w_j)
            rank1 = np.einsum("ij,ijc->ic", rank1, self.D)
        else:
            # A w = ... + c (D . w)
            rank1 = np.einsum("ijc,ijc->ij", self.D, w_j)
            rank1 = np.einsum("ij,ijc->ic", rank1, self.c)
        return iso + aniso + rank1

    def apply_generator(self, xi):
        """(G xi)_i = (1/N) sum_j A~_ij (xi_i - xi_j); self terms cancel."""
        w = xi[:, None, :] - xi[None, :, :]
        return self._apply_blocks(w) / self.n

    def diagonal_blocks(self):
        """Per-particle 2x2 diagonal blocks of G, for Jacobi preconditioning."""
        eye = np.eye(2)
        sum_a = self.a.sum(axis=1) - np.diagonal(self.a)
        sum_b = self.b.sum(axis=1) - np.diagonal(self.b)
        if self.orientation == "transposed":
            outer = np.einsum("ijc,ijd->icd", self.D, self.c)
        else:
            outer = np.einsum("ijc,ijd->icd", self.c, self.D)
        blocks = (sum_a[:, None, None] * eye + sum_b[:, None, None] * self.B + outer) / self.n
        return blocks


def adjoint_rhs(positions, u: Control, xi, p: ForceParams, orientation="transposed"):
    """Backward-time rate of change of the costates at the given positions."""
    op = PairOperator(np.asarray(positions, dtype=float), u, p, orientation)
    return op.apply_generator(np.asarray(xi, dtype=float))


# Below this size a direct factorization of the 2N x 2N implicit system is
# cheaper and unconditionally robust; the iterative path handles larger N.
DENSE_SOLVE_MAX_N = 400


def step_backward(xi_next, positions_at_t, u: Control, p: ForceParams, dt: float,
                  orientation="transposed", tol=IMPLICIT_TOL, max_iter=IMPLICIT_MAX_ITER,
                  method="auto"):
    """Implicit Euler step: solve (I - dt*G) xi = xi_next at the stored positions.

    ``method="iterative"`` runs a matrix-free Jacobi-preconditioned iteration
    and raises ``ImplicitSolveError`` with the residual when the cap is hit;
    ``"dense"`` factorizes the 2N x 2N system directly; ``"auto"`` picks dense
    for N <= DENSE_SOLVE_MAX_N (strong per-step coupling makes the iteration
    slow there at large time steps, while the factorization costs milliseconds).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    xi_next = np.asarray(xi_next, dtype=float)
    if method not in ("auto", "dense", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    if method == "dense" or (method == "auto" and xi_next.shape[0] <= DENSE_SOLVE_MAX_N):
        return step_backward_dense(xi_next, positions_at_t, u, p, dt, orientation)
    op = PairOperator(np.asarray(positions_at_t, dtype=float), u, p, orientation)
    precond = np.linalg.inv(np.eye(2) - dt * op.diagonal_blocks())
    rhs_scale = np.max(np.abs(xi_next))
    if rhs_scale == 0.0:
        return np.zeros_like(xi_next)
    xi = xi_next.copy()
    for _ in range(max_iter):
        residual = xi_next - (xi - dt * op.apply_generator(xi))
        if np.max(np.abs(residual)) <= tol * rhs_scale:
            return xi
        xi = xi + np.einsum("icd,id->ic", precond, residual)
    residual = xi_next - (xi - dt * op.apply_generator(xi))
    res_norm = float(np.max(np.abs(residual)))
    if res_norm <= tol * rhs_scale:
        return xi
    raise ImplicitSolveError(res_norm, max_iter)


def step_backward_dense(xi_next, positions_at_t, u: Control, p: ForceParams, dt: float,
                        orientation="transposed"):
    """Direct dense solve of the implicit step; oracle for small N."""
    xi_next = np.asarray(xi_next, dtype=float)
    n = xi_next.shape[0]
    G = dense_generator(positions_at_t, u, p, orientation)
    sol = np.linalg.solve(np.eye(2 * n) - dt * G, xi_next.reshape(-1))
    return sol.reshape(n, 2)


def dense_generator(positions, u: Control, p: ForceParams, orientation="transposed"):
    """Assemble G as a dense (2N, 2N) matrix from the pair Jacobian blocks.

    Quadratic memory; used by the dense implicit solves and as a test oracle.
    """
    x = np.asarray(positions, dtype=float)
    n = x.shape[0]
    disp = forces.pair_displacements(x)
    blocks = forces.force_jacobian_position(disp, u, p)
    if orientation == "transposed":
        blocks = np.swapaxes(blocks, -1, -2)
    idx = np.arange(n)
    row_sums = blocks.sum(axis=1) - blocks[idx, idx]
    g4 = -blocks.copy()
    g4[idx, idx] = row_sums
    return g4.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n) / n


def solve_adjoint(traj: Trajectory, u: Control, terminal, p: ForceParams,
                  scheme="discrete", orientation="transposed") -> AdjointTrajectory:
    """Backward sweep k = steps-1 .. 0 from the terminal costates.

    ``scheme="discrete"`` applies the exact reverse-mode recursion
    ``xi_k = (I + dt*G_k) xi_{k+1}``; ``scheme="implicit"`` solves the
    implicit Euler system per step.
    """
    if scheme not in ("discrete", "implicit"):
        raise ValueError(f"unknown scheme {scheme!r}")
    xi_T = np.asarray(terminal, dtype=float)
    if xi_T.shape != (traj.n_particles, 2):
        raise ValueError("terminal costates must align with the trajectory state")
    steps = traj.n_steps
    out = np.empty((steps + 1, traj.n_particles, 2))
    out[steps] = xi_T
    xi = xi_T
    use_kernel = scheme == "discrete" and _kernels.enabled()
    for k in range(steps - 1, -1, -1):
        x_k = traj.positions[k]
        if use_kernel:
            xi, _, _ = _kernels.costate_step_kernel(
                x_k, xi, traj.dt, orientation == "transposed",
                u.theta, u.eta, p.alpha, p.beta, p.gamma, p.e_r, p.e_a, p.chi)
        elif scheme == "discrete":
            op = PairOperator(x_k, u, p, orientation)
            xi = xi + traj.dt * op.apply_generator(xi)
        else:
            xi = step_backward(xi, x_k, u, p, traj.dt, orientation)
        out[k] = xi
    return AdjointTrajectory(out, traj.dt)


def sweep_with_gradient(traj: Trajectory, u: Control, terminal, p: ForceParams,
                        orientation="transposed"):
    """Exact-discrete backward sweep fused with the control-gradient quadrature.

    Single pass over the stored snapshots; equals ``solve_adjoint`` followed by
    ``reduced_gradient``'s interaction sums (tested for equality).  Returns
    ``(AdjointTrajectory, acc_theta, acc_eta)`` where the accumulators are the
    raw double sums ``sum_k sum_ij dF/du(x^k) . xi^{k+1}_i``.
    """
    xi_T = np.asarray(terminal, dtype=float)
    steps = traj.n_steps
    out = np.empty((steps + 1, traj.n_particles, 2))
    out[steps] = xi_T
    xi = xi_T
    acc_theta = 0.0
    acc_eta = 0.0
    for k in range(steps - 1, -1, -1):
        x_k = traj.positions[k]
        if _kernels.enabled():
            xi, at, ae = _kernels.costate_step_kernel(
                x_k, xi, traj.dt, orientation == "transposed",
                u.theta, u.eta, p.alpha, p.beta, p.gamma, p.e_r, p.e_a, p.chi)
            acc_theta += at.sum()
            acc_eta += ae.sum()
        else:
            disp = forces.pair_displacements(x_k)
            d_theta, d_eta = forces.force_grad_control(disp, u, p)
            acc_theta += np.einsum("ijc,ic->", d_theta, xi)
            acc_eta += np.einsum("ijc,ic->", d_eta, xi)
            op = PairOperator(x_k, u, p, orientation)
            xi = xi + traj.dt * op.apply_generator(xi)
        out[k] = xi
    return AdjointTrajectory(out, traj.dt), float(acc_theta), float(acc_eta)


def export_costates_csv(path, adj: AdjointTrajectory, stride: int = 1):
    """Debug export with the same schema as the position export."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    steps = adj.n_steps
    ks = list(range(0, steps + 1, stride))
    if ks[-1] != steps:
        ks.append(steps)
    with open(path, "w") as fh:
        fh.write("step,time,particle_id,x,y\n")
        for k in ks:
            t = float(k * adj.dt)
            for i, (x, y) in enumerate(adj.costates[k]):
                fh.write(f"{k},{t!r},{i},{float(x)!r},{float(y)!r}\n")

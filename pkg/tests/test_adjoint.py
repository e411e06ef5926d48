import numpy as np
import pytest

from patternfit import _kernels, adjoint, transport
from patternfit.dynamics import ParticleState, simulate
from patternfit.params import Control, ForceParams

from conftest import random_controls


@pytest.fixture
def small_setup(default_params, rng):
    """Clustered particles with a short trajectory: strong pair coupling."""
    x0 = 0.42 + 0.16 * rng.random((12, 2))
    u = Control(0.35 * np.pi, 1.02)
    traj = simulate(x0, u, default_params, dt=0.5, steps=12)
    return traj, u


class TestTerminalCondition:
    def test_identical_states_zero(self, rng):
        pts = rng.random((15, 2))
        xi, plan = adjoint.terminal_condition(ParticleState(pts), ParticleState(pts))
        np.testing.assert_array_equal(xi, np.zeros((15, 2)))
        np.testing.assert_array_equal(plan.assignment, np.arange(15))

    def test_single_particle_wrap_and_scaling(self):
        final = ParticleState(np.array([[0.9, 0.5]]))
        desired = ParticleState(np.array([[0.1, 0.5]]))
        xi, _ = adjoint.terminal_condition(final, desired)
        np.testing.assert_allclose(xi, [[0.2, 0.0]], atol=1e-15)

    def test_norm_identity(self, rng):
        # sum_i |xi_i|^2 = N^2 * sum_i M[i, sigma(i)] = N^2 * total_cost
        final = rng.random((30, 2))
        desired = rng.random((30, 2))
        xi, plan = adjoint.terminal_condition(ParticleState(final), ParticleState(desired))
        assert np.sum(xi ** 2) == pytest.approx(30 ** 2 * plan.total_cost, rel=1e-12)

    def test_mismatched_counts_rejected(self, rng):
        with pytest.raises(ValueError):
            adjoint.terminal_condition(ParticleState(rng.random((4, 2))),
                                       ParticleState(rng.random((5, 2))))


class TestAdjointRhs:
    def test_zero_costates_zero_rhs(self, small_setup, default_params):
        traj, u = small_setup
        rhs = adjoint.adjoint_rhs(traj.positions[0], u, np.zeros((12, 2)), default_params)
        np.testing.assert_array_equal(rhs, np.zeros((12, 2)))

    def test_single_particle_zero(self, default_params):
        rhs = adjoint.adjoint_rhs(np.array([[0.4, 0.6]]), Control(0.2, 1.0),
                                  np.array([[1.0, -2.0]]), default_params)
        np.testing.assert_allclose(rhs, np.zeros((1, 2)), atol=1e-18)

    @pytest.mark.parametrize("orientation", ["transposed", "plain"])
    def test_matches_dense_assembly(self, small_setup, default_params, rng, orientation):
        traj, u = small_setup
        xi = rng.standard_normal((12, 2))
        rhs = adjoint.adjoint_rhs(traj.positions[3], u, xi, default_params, orientation)
        G = adjoint.dense_generator(traj.positions[3], u, default_params, orientation)
        np.testing.assert_allclose(rhs, (G @ xi.reshape(-1)).reshape(12, 2),
                                   rtol=1e-12, atol=1e-15)

    def test_linearity(self, small_setup, default_params, rng):
        traj, u = small_setup
        xi1 = rng.standard_normal((12, 2))
        xi2 = rng.standard_normal((12, 2))
        r1 = adjoint.adjoint_rhs(traj.positions[0], u, xi1, default_params)
        r2 = adjoint.adjoint_rhs(traj.positions[0], u, xi2, default_params)
        r12 = adjoint.adjoint_rhs(traj.positions[0], u, xi1 + 2.5 * xi2, default_params)
        np.testing.assert_allclose(r12, r1 + 2.5 * r2, rtol=1e-11, atol=1e-14)


class TestStepBackward:
    def test_single_particle_identity(self, default_params):
        xi = np.array([[0.3, -0.7]])
        out = adjoint.step_backward(xi, np.array([[0.5, 0.5]]), Control(0, 1),
                                    default_params, dt=2.0)
        np.testing.assert_allclose(out, xi, atol=1e-14)

    def test_small_dt_limit(self, small_setup, default_params, rng):
        traj, u = small_setup
        xi = rng.standard_normal((12, 2))
        out = adjoint.step_backward(xi, traj.positions[0], u, default_params, dt=1e-9)
        np.testing.assert_allclose(out, xi, rtol=1e-7, atol=1e-9)

    @pytest.mark.parametrize("orientation", ["transposed", "plain"])
    def test_agrees_with_dense_lu(self, small_setup, default_params, rng, orientation):
        traj, u = small_setup
        xi = rng.standard_normal((12, 2))
        iterative = adjoint.step_backward(xi, traj.positions[5], u, default_params,
                                          dt=2.0, orientation=orientation)
        dense = adjoint.step_backward_dense(xi, traj.positions[5], u, default_params,
                                            dt=2.0, orientation=orientation)
        np.testing.assert_allclose(iterative, dense, rtol=1e-9, atol=1e-12)

    def test_residual_contract(self, small_setup, default_params, rng):
        traj, u = small_setup
        xi_next = rng.standard_normal((12, 2))
        xi = adjoint.step_backward(xi_next, traj.positions[2], u, default_params, dt=2.0)
        op = adjoint.PairOperator(traj.positions[2], u, default_params)
        residual = xi_next - (xi - 2.0 * op.apply_generator(xi))
        assert np.max(np.abs(residual)) <= 1e-10 * np.max(np.abs(xi_next))

    def test_iteration_cap_raises_with_residual(self, small_setup, default_params, rng):
        traj, u = small_setup
        xi = rng.standard_normal((12, 2))
        with pytest.raises(adjoint.ImplicitSolveError) as err:
            adjoint.step_backward(xi, traj.positions[0], u, default_params,
                                  dt=2.0, max_iter=1, method="iterative")
        assert err.value.residual > 0

    def test_dense_and_iterative_methods_agree(self, small_setup, default_params, rng):
        traj, u = small_setup
        xi = rng.standard_normal((12, 2))
        dense = adjoint.step_backward(xi, traj.positions[4], u, default_params,
                                      dt=2.0, method="dense")
        iterative = adjoint.step_backward(xi, traj.positions[4], u, default_params,
                                          dt=2.0, method="iterative")
        np.testing.assert_allclose(dense, iterative, rtol=1e-9, atol=1e-12)


class TestSolveAdjoint:
    @pytest.mark.parametrize("scheme", ["discrete", "implicit"])
    def test_zero_terminal_stays_zero(self, small_setup, default_params, scheme):
        traj, u = small_setup
        adj = adjoint.solve_adjoint(traj, u, np.zeros((12, 2)), default_params, scheme=scheme)
        np.testing.assert_array_equal(adj.costates, np.zeros_like(adj.costates))

    def test_single_particle_constant(self, default_params):
        traj = simulate(np.array([[0.3, 0.3]]), Control(0, 1), default_params, dt=1.0, steps=5)
        adj = adjoint.solve_adjoint(traj, Control(0, 1), np.array([[1.0, 2.0]]), default_params)
        for k in range(6):
            np.testing.assert_allclose(adj.costates[k], [[1.0, 2.0]], atol=1e-14)

    @pytest.mark.parametrize("scheme", ["discrete", "implicit"])
    def test_linearity_in_terminal(self, small_setup, default_params, rng, scheme):
        traj, u = small_setup
        t1 = rng.standard_normal((12, 2))
        t2 = rng.standard_normal((12, 2))
        a1 = adjoint.solve_adjoint(traj, u, t1, default_params, scheme=scheme)
        a2 = adjoint.solve_adjoint(traj, u, t2, default_params, scheme=scheme)
        a12 = adjoint.solve_adjoint(traj, u, t1 + 3.0 * t2, default_params, scheme=scheme)
        # implicit sweep is linear only up to its per-step solver tolerance
        rtol = 1e-9 if scheme == "discrete" else 3e-8
        np.testing.assert_allclose(a12.costates, a1.costates + 3.0 * a2.costates,
                                   rtol=rtol, atol=1e-11)

    def test_implicit_matches_dense_product(self, small_setup, default_params, rng):
        # whole sweep against step-by-step dense solves
        traj, u = small_setup
        terminal = rng.standard_normal((12, 2))
        adj = adjoint.solve_adjoint(traj, u, terminal, default_params, scheme="implicit")
        xi = terminal
        for k in range(traj.n_steps - 1, -1, -1):
            xi = adjoint.step_backward_dense(xi, traj.positions[k], u, default_params, traj.dt)
            np.testing.assert_allclose(adj.costates[k], xi, rtol=1e-8, atol=1e-11)

    def test_discrete_sweep_is_transposed_euler_propagator(self, small_setup, default_params, rng):
        traj, u = small_setup
        terminal = rng.standard_normal((12, 2))
        adj = adjoint.solve_adjoint(traj, u, terminal, default_params, scheme="discrete")
        xi = terminal.reshape(-1)
        for k in range(traj.n_steps - 1, -1, -1):
            G = adjoint.dense_generator(traj.positions[k], u, default_params, "transposed")
            xi = xi + traj.dt * (G @ xi)
            np.testing.assert_allclose(adj.costates[k], xi.reshape(12, 2),
                                       rtol=1e-10, atol=1e-13)

    def test_kernel_and_numpy_paths_agree(self, small_setup, default_params, rng):
        if not _kernels.HAVE_NUMBA:
            pytest.skip("numba not installed")
        traj, u = small_setup
        terminal = rng.standard_normal((12, 2))
        adj_fast = adjoint.solve_adjoint(traj, u, terminal, default_params)
        _kernels.KERNELS_ENABLED = False
        try:
            adj_ref = adjoint.solve_adjoint(traj, u, terminal, default_params)
        finally:
            _kernels.KERNELS_ENABLED = True
        np.testing.assert_allclose(adj_fast.costates, adj_ref.costates, rtol=1e-12, atol=1e-14)

    def test_costate_csv_export_roundtrip(self, small_setup, default_params, rng, tmp_path):
        traj, u = small_setup
        terminal = rng.standard_normal((12, 2))
        adj = adjoint.solve_adjoint(traj, u, terminal, default_params)
        path = tmp_path / "costates.csv"
        adjoint.export_costates_csv(path, adj, stride=5)
        from patternfit.dynamics import read_positions_csv
        last = read_positions_csv(path)
        np.testing.assert_array_equal(last, adj.costates[-1])

    def test_fused_sweep_matches_two_stage(self, small_setup, default_params, rng):
        from patternfit.optimize import OptimizerOptions, reduced_gradient
        traj, u = small_setup
        terminal = rng.standard_normal((12, 2))
        adj_traj, acc_t, acc_e = adjoint.sweep_with_gradient(traj, u, terminal, default_params)
        adj_ref = adjoint.solve_adjoint(traj, u, terminal, default_params)
        np.testing.assert_allclose(adj_traj.costates, adj_ref.costates, rtol=1e-12, atol=1e-14)
        opts = OptimizerOptions(lambda1=0.0, lambda2=0.0)
        g = reduced_gradient(traj, adj_ref, u, default_params, opts)
        scale = traj.dt / 12 ** 2
        assert g[0] == pytest.approx(-scale * acc_t, rel=1e-10, abs=1e-18)
        assert g[1] == pytest.approx(-scale * acc_e, rel=1e-10, abs=1e-18)

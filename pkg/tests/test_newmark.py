import numpy as np
import pytest

from slipbeam import (InitialData, IntegratorConfig, KernelSpec, MaterialParams,
                      build_mesh, effective_matrix, init_state, residual, run,
                      step)
from slipbeam.assembly import apply_d0sq
from slipbeam.energy import energy
from slipbeam.errors import ConfigurationError, StabilityError
from slipbeam.profiles import sine_initial_data

from conftest import make_blocks, make_state


def dense_reference_step(blocks, cfg, disp, vel, acc, past):
    """Independent dense transcription of one implicit step.

    ``past[l-1]`` holds the displacement l steps back.  Everything is built
    from the dense matrices; no solver or stencil code from the package.
    """
    J = blocks.J
    dt, beta, vs = cfg.dt, cfg.beta, cfg.varsigma
    M = np.diag(blocks.M_diag)
    C = np.diag(blocks.C_diag)
    KG = blocks.K + blocks.G0
    a_eff = M + vs * dt * C + beta * dt * dt * KG
    mem = sum(blocks.Gblock(j) @ past[j - 1] for j in range(1, blocks.weights1.N + 1))
    rhs = -C @ (vel + (1 - vs) * dt * acc) \
        - KG @ (disp + dt * vel + (0.5 - beta) * dt * dt * acc) - mem
    acc1 = np.linalg.solve(a_eff, rhs)
    vel1 = vel + (1 - vs) * dt * acc + vs * dt * acc1
    disp1 = disp + dt * vel + (0.5 - beta) * dt * dt * acc + beta * dt * dt * acc1
    return disp1, vel1, acc1


class TestInitState:
    def test_zero_data_zero_state(self):
        blocks = make_blocks()
        state, _ = make_state(blocks, amp=(0.0, 0.0, 0.0))
        assert np.array_equal(state.disp, np.zeros(3 * blocks.J))
        assert np.array_equal(state.acc, np.zeros(3 * blocks.J))

    def test_consistent_initial_acceleration_hand_value(self):
        # phi0 = sin(pi x), everything else zero, no memory, no damping:
        # M acc = -K disp reduces on the transverse block to
        # 3 rho1 acc = 3 k D0sq phi0, i.e. acc = (k/rho1) D0sq phi0
        params = MaterialParams(rho1=2.0, rho2=1.0, k=1.5, b=1.0, delta=0.0, gamma=0.0)
        blocks = make_blocks(J=3, params=params, k1=KernelSpec.zero(1),
                             k2=KernelSpec.zero(2))
        state, _ = make_state(blocks, amp=(1.0, 0.0, 0.0))
        phi0 = np.sin(np.pi * blocks.mesh.interior)
        expected = (params.k / params.rho1) * apply_d0sq(phi0, blocks.h)
        assert np.allclose(state.acc[:3], expected, rtol=1e-12)
        assert np.allclose(state.acc[3:], np.zeros(6), atol=1e-12)

    def test_dirichlet_violation_rejected(self):
        blocks = make_blocks(J=4)
        init = InitialData.zero(6)
        init.phi0[0] = 0.5
        with pytest.raises(ConfigurationError, match="clamped"):
            init_state(blocks, IntegratorConfig(dt=0.1, steps=1), init)

    def test_uncertified_parameters_warn(self):
        blocks = make_blocks()
        cfg = IntegratorConfig(dt=0.1, steps=1, beta=0.3, varsigma=0.6)
        init = sine_initial_data(blocks.mesh)
        with pytest.warns(UserWarning, match="no discrete-energy guarantee"):
            init_state(blocks, cfg, init)


class TestEffectiveMatrix:
    def test_hand_assembly_small(self):
        blocks = make_blocks(J=3)
        cfg = IntegratorConfig(dt=0.2, steps=1)
        a_eff = np.diag(blocks.M_diag + 0.5 * 0.2 * blocks.C_diag) \
            + 0.25 * 0.2 ** 2 * (blocks.K + blocks.G0)
        solver = effective_matrix(blocks, cfg, method="dense")
        rng = np.random.default_rng(0)
        for _ in range(3):
            rhs = rng.standard_normal(9)
            assert np.allclose(a_eff @ solver.solve(rhs), rhs, rtol=1e-12)

    def test_vanishing_dt_limit(self):
        blocks = make_blocks(J=4)
        solver = effective_matrix(blocks, IntegratorConfig(dt=1e-9, steps=1),
                                  method="dense")
        rhs = np.ones(12)
        assert np.allclose(solver.solve(rhs), rhs / blocks.M_diag, rtol=1e-9)

    @pytest.mark.parametrize("J", [5, 30, 80])
    def test_banded_matches_dense(self, J):
        blocks = make_blocks(J=J)
        cfg = IntegratorConfig(dt=0.15, steps=1)
        dense = effective_matrix(blocks, cfg, method="dense")
        banded = effective_matrix(blocks, cfg, method="banded")
        rng = np.random.default_rng(J)
        rhs = rng.standard_normal(3 * J)
        x_d, x_b = dense.solve(rhs), banded.solve(rhs)
        assert np.abs(x_d - x_b).max() <= 1e-12 * np.abs(x_d).max()

    def test_auto_method_threshold(self):
        cfg = IntegratorConfig(dt=0.1, steps=1)
        assert effective_matrix(make_blocks(J=5), cfg).method == "dense"
        assert effective_matrix(make_blocks(J=70), cfg).method == "banded"

    def test_indefinite_matrix_reports_stability_error(self):
        # gigantic kernel mass makes K + G0 lose positivity at large dt
        params = MaterialParams(rho1=1e-6, rho2=1e-6, k=1.0, b=50.0,
                                delta=0.0, gamma=0.0)
        blocks = make_blocks(J=6, N=2, dt=8.0, params=params,
                             k1=KernelSpec.exponential(40.0, 0.01, 1),
                             k2=KernelSpec.exponential(40.0, 0.01, 2))
        with pytest.raises(StabilityError, match="eigenvalue"):
            effective_matrix(blocks, IntegratorConfig(dt=8.0, steps=1),
                             method="dense")


class TestStep:
    def test_zero_fixed_point_exact(self):
        blocks = make_blocks()
        state, cfg = make_state(blocks, amp=(0.0, 0.0, 0.0))
        solver = effective_matrix(blocks, cfg)
        for _ in range(5):
            step(state, blocks, cfg, solver)
        assert np.array_equal(state.disp, np.zeros(3 * blocks.J))
        assert np.array_equal(state.vel, np.zeros(3 * blocks.J))

    @pytest.mark.parametrize("N", [2, 3])
    def test_single_step_matches_dense_reference(self, N):
        blocks = make_blocks(J=4, N=N, dt=0.08)
        state, cfg = make_state(blocks, steps=1)
        past3 = [np.concatenate([state.history.lag(l)[0],
                                 state.history.lag(l)[1],
                                 np.zeros(4)]) for l in range(1, N + 1)]
        ref_disp, ref_vel, ref_acc = dense_reference_step(
            blocks, cfg, state.disp.copy(), state.vel.copy(), state.acc.copy(),
            past3)
        solver = effective_matrix(blocks, cfg, method="dense")
        step(state, blocks, cfg, solver)
        scale = max(np.abs(ref_disp).max(), np.abs(ref_vel).max(),
                    np.abs(ref_acc).max(), 1.0)
        assert np.abs(state.disp - ref_disp).max() <= 1e-12 * scale
        assert np.abs(state.vel - ref_vel).max() <= 1e-12 * scale
        assert np.abs(state.acc - ref_acc).max() <= 1e-12 * scale

    def test_equation_of_motion_residual_along_run(self):
        blocks = make_blocks(J=8, N=4, dt=0.05)
        state, cfg = make_state(blocks, steps=30)
        solver = effective_matrix(blocks, cfg)
        scale = np.abs(blocks.M_diag).max() * max(np.abs(state.acc).max(), 1.0)
        for _ in range(30):
            step(state, blocks, cfg, solver)
            assert residual(state, blocks) <= 1e-9 * scale

    def test_conservative_energy_conservation(self):
        # gamma = 0, kernels off: the average-acceleration method preserves
        # the discrete energy of the symmetric system
        params = MaterialParams(rho1=1.0, rho2=1.0, k=2.0, b=2.0, delta=1.0,
                                gamma=0.0)
        blocks = make_blocks(J=50, N=1, dt=0.02, params=params,
                             k1=KernelSpec.zero(1), k2=KernelSpec.zero(2))
        state, cfg = make_state(blocks, steps=1000)
        solver = effective_matrix(blocks, cfg)
        e0 = energy(state, blocks, "dimensional").total
        worst = 0.0
        for _ in range(1000):
            step(state, blocks, cfg, solver)
            worst = max(worst, abs(energy(state, blocks, "dimensional").total - e0))
        assert worst <= 1e-10 * e0

    def test_time_reversal_of_conservative_system(self):
        params = MaterialParams(rho1=1.0, rho2=1.0, k=2.0, b=2.0, delta=1.0,
                                gamma=0.0)
        blocks = make_blocks(J=16, N=1, dt=0.05, params=params,
                             k1=KernelSpec.zero(1), k2=KernelSpec.zero(2))
        state, cfg = make_state(blocks, steps=50)
        solver = effective_matrix(blocks, cfg)
        disp0, vel0 = state.disp.copy(), state.vel.copy()
        scale = np.abs(disp0).max()
        for _ in range(50):
            step(state, blocks, cfg, solver)
        state.vel *= -1.0
        state.acc = (-(blocks.C_diag * state.vel) - blocks.apply_KG0(state.disp)) \
            / blocks.M_diag
        for _ in range(50):
            step(state, blocks, cfg, solver)
        assert np.abs(state.disp - disp0).max() <= 1e-8 * scale


class TestRun:
    def test_zero_steps_single_observation(self):
        blocks = make_blocks()
        state, _ = make_state(blocks)
        cfg = IntegratorConfig(dt=blocks.dt, steps=0)
        trace = run(state, blocks, cfg)
        assert trace.steps == [0]

    def test_observation_count_with_stride(self):
        blocks = make_blocks(J=4, N=2, dt=0.05)
        state, _ = make_state(blocks)
        cfg = IntegratorConfig(dt=0.05, steps=100)
        trace = run(state, blocks, cfg, stride=10)
        assert len(trace.steps) == 11

    def test_timestamps_exact(self):
        blocks = make_blocks(J=4, N=2, dt=0.125)
        state, _ = make_state(blocks)
        cfg = IntegratorConfig(dt=0.125, steps=8)
        trace = run(state, blocks, cfg)
        assert trace.times == [n * 0.125 for n in range(9)]

    def test_observer_can_stop_the_run(self):
        blocks = make_blocks(J=4, N=2)
        state, cfg = make_state(blocks, steps=50)

        def stop_at_five(step_index, time, st):
            return step_index < 5

        trace = run(state, blocks, cfg, observers=[stop_at_five])
        assert trace.steps[-1] == 5

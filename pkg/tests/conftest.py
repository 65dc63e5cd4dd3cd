import numpy as np
import pytest

from slipbeam import (InitialData, IntegratorConfig, KernelSpec, MaterialParams,
                      assemble_blocks, assemble_difference_ops, build_mesh,
                      init_state, sample_weights)
from slipbeam.profiles import sine_initial_data


@pytest.fixture
def unit_params():
    return MaterialParams(rho1=1.0, rho2=1.0, k=2.0, b=2.0, delta=1.0, gamma=1.0)


def make_blocks(J=4, N=3, dt=0.1, params=None, k1=None, k2=None, L=1.0):
    """Small assembled model for oracle-style tests."""
    params = params or MaterialParams(rho1=1.3, rho2=0.7, k=2.1, b=2.9,
                                      delta=0.8, gamma=0.6)
    k1 = k1 or KernelSpec.exponential(1.0, 1.0, 1)
    k2 = k2 or KernelSpec.exponential(0.9, 1.3, 2)
    mesh = build_mesh(J, L)
    ops = assemble_difference_ops(mesh)
    w1 = sample_weights(k1, dt, depth=N)
    w2 = sample_weights(k2, dt, depth=N)
    return assemble_blocks(ops, params, w1, w2)


def make_state(blocks, dt=None, steps=50, history_fn=None, amp=(1.0, 0.2, 0.5)):
    cfg = IntegratorConfig(dt=dt or blocks.dt, steps=steps)
    init = sine_initial_data(blocks.mesh, amp_phi0=amp[0], amp_u0=amp[1],
                             amp_v0=amp[2])
    return init_state(blocks, cfg, init, history_fn), cfg


def random_history_state(blocks, cfg, seed=0, scale=0.3):
    """State whose ring buffer is filled with random (rough) past data."""
    rng = np.random.default_rng(seed)
    J, N = blocks.J, blocks.weights1.N
    state, _ = make_state(blocks, steps=cfg.steps)
    for lag in range(1, N + 2):
        state.history.fill(lag, scale * rng.standard_normal(J),
                           scale * rng.standard_normal(J))
    # re-derive a consistent acceleration for the new history
    from slipbeam.history import memory_forcing
    rhs = -(blocks.C_diag * state.vel) - blocks.apply_KG0(state.disp) \
        - memory_forcing(state.history, blocks, blocks.weights1,
                         blocks.weights2, shift=0)
    state.acc = rhs / blocks.M_diag
    return state

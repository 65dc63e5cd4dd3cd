import numpy as np
import pytest
import scipy.linalg

from slipbeam import (KernelSpec, MaterialParams, assemble_blocks,
                      assemble_difference_ops, build_mesh, check_coercivity,
                      sample_weights)
from slipbeam.assembly import coercivity_form, _gradient_form
from slipbeam.errors import ConfigurationError

from conftest import make_blocks


class TestMesh:
    def test_hand_values(self):
        mesh = build_mesh(3, 1.0)
        assert mesh.h == 0.25
        assert np.allclose(mesh.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_too_few_nodes(self):
        with pytest.raises(ConfigurationError):
            build_mesh(1, 1.0)

    def test_fine_mesh_spacing(self):
        assert build_mesh(99, 1.0).h == pytest.approx(0.01, rel=1e-15)

    def test_spacing_consistency(self):
        mesh = build_mesh(37, 2.7)
        assert mesh.h * (mesh.J + 1) == pytest.approx(mesh.L, rel=1e-15)


class TestDifferenceOps:
    def test_d0sq_hand_stencil(self):
        ops = assemble_difference_ops(build_mesh(3, 1.0))
        expected = 16.0 * np.array([[-2.0, 1.0, 0.0],
                                    [1.0, -2.0, 1.0],
                                    [0.0, 1.0, -2.0]])
        assert np.array_equal(ops.D0sq, expected)

    def test_dminus_dplus_hand_stencils(self):
        ops = assemble_difference_ops(build_mesh(3, 1.0))
        dm = 4.0 * np.array([[1.0, 0, 0], [-1.0, 1.0, 0], [0, -1.0, 1.0]])
        assert np.array_equal(ops.Dminus, dm)
        assert np.array_equal(ops.Dplus, -dm.T)

    def test_q_hand_stencil_with_free_end_row(self):
        ops = assemble_difference_ops(build_mesh(3, 1.0))
        q = 0.25 * np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 1.0]])
        assert np.allclose(ops.Q, q, atol=1e-16)
        assert np.allclose(ops.Q, ops.Pplus @ ops.Pminus)

    @pytest.mark.parametrize("J", [2, 3, 4, 5, 17])
    def test_product_identities(self, J):
        ops = assemble_difference_ops(build_mesh(J, 1.0))
        h2 = ops.h ** 2
        j_first = np.zeros((J, J)); j_first[0, 0] = 1.0
        j_last = np.zeros((J, J)); j_last[-1, -1] = 1.0
        tol = 1e-13 / h2
        assert np.abs(ops.D0sq - (ops.Dplus @ ops.Dminus - j_last / h2)).max() <= tol
        assert np.abs(ops.D0sq - (ops.Dminus @ ops.Dplus - j_first / h2)).max() <= tol


def hand_energy_form(J, h, p, u):
    """Twice the elastic energy, written out as explicit loops."""
    phi, psi, v = u[:J], u[J:2 * J], u[2 * J:]

    def at(f, j):
        return f[j - 1] if 1 <= j <= J else 0.0

    total = 0.0
    for j in range(1, J + 1):  # interior half-cell shear samples
        s = ((at(phi, j) - at(phi, j - 1)) / h
             + (at(psi, j) + at(psi, j - 1)) / 2
             - (at(v, j) + at(v, j - 1)) / 2)
        total += 3 * p.k * s * s
    s_end = -phi[-1] / h + psi[-1] - v[-1]
    total += 3 * p.k * s_end * s_end
    for j in range(1, J + 1):  # flexural seminorms
        total += 3 * p.b * ((at(psi, j) - at(psi, j - 1)) / h) ** 2
        total += p.b_slip * ((at(v, j) - at(v, j - 1)) / h) ** 2
    for j in range(1, J + 1):  # adhesive, with the free-end half-cell
        total += 4 * p.delta * ((at(v, j) + at(v, j - 1)) / 2) ** 2
    total += 4 * p.delta * v[-1] ** 2
    return total


class TestBlocks:
    def test_mass_blocks_hand_values(self):
        params = MaterialParams(rho1=1.0, rho2=2.0, k=1.0, b=1.0)
        blocks = make_blocks(J=4, params=params,
                             k1=KernelSpec.zero(1), k2=KernelSpec.zero(2))
        J = 4
        m = blocks.M_diag
        assert np.array_equal(m[:J], np.full(J, 3.0))
        # rotation/slip blocks are 3*rho2 and rho2 with the free-end node at 3/2
        assert np.array_equal(m[J:2 * J], [6.0, 6.0, 6.0, 9.0])
        assert np.array_equal(m[2 * J:], [2.0, 2.0, 2.0, 3.0])
        assert m.min() == min(3 * params.rho1, 3 * params.rho2, params.rho2)

    def test_zero_friction_means_zero_damping(self):
        params = MaterialParams(rho1=1.0, rho2=1.0, k=1.0, b=1.0, gamma=0.0)
        blocks = make_blocks(params=params, k1=KernelSpec.zero(1),
                             k2=KernelSpec.zero(2))
        assert np.array_equal(blocks.C_diag, np.zeros(3 * blocks.J))

    def test_k_symmetric_bitwise(self):
        blocks = make_blocks(J=9)
        assert np.abs(blocks.K - blocks.K.T).max() == 0.0

    def test_phi_block_is_clamped_laplacian(self):
        blocks = make_blocks(J=5)
        J = 5
        assert np.allclose(blocks.K[:J, :J], -3 * blocks.params.k * blocks.ops.D0sq,
                           atol=1e-12 / blocks.h**2)

    @pytest.mark.parametrize("J", [2, 3, 4, 5])
    def test_k_matches_hand_energy_form(self, J):
        blocks = make_blocks(J=J)
        rng = np.random.default_rng(J)
        for _ in range(4):
            u = rng.standard_normal(3 * J)
            quad = float(u @ blocks.K @ u)
            hand = hand_energy_form(J, blocks.h, blocks.params, u)
            assert quad == pytest.approx(hand, rel=1e-12)

    def test_memory_block_structure(self):
        blocks = make_blocks(J=3, N=3, dt=0.1)
        for j in (0, 2):
            G = blocks.Gblock(j)
            J = 3
            assert np.allclose(G[:J, :J], 0.1 * blocks.weights1.g[j] * blocks.ops.D0sq)
            assert np.allclose(G[J:2 * J, J:2 * J],
                               0.1 * blocks.weights2.g[j] * (blocks.ops.Dplus @ blocks.ops.Dminus))
            assert np.array_equal(G[2 * J:, 2 * J:], np.zeros((J, J)))

    def test_zero_weight_gives_zero_block(self):
        blocks = make_blocks(k1=KernelSpec.zero(1), k2=KernelSpec.zero(2))
        assert np.array_equal(blocks.Gblock(1), np.zeros((3 * blocks.J, 3 * blocks.J)))

    @pytest.mark.parametrize("J", [4, 17, 70])
    def test_stencil_apply_matches_dense(self, J):
        blocks = make_blocks(J=J)
        rng = np.random.default_rng(J)
        u = rng.standard_normal(3 * J)
        dense = blocks.KG0 @ u
        fast = blocks.apply_KG0(u)
        scale = np.abs(dense).max()
        assert np.abs(dense - fast).max() <= 1e-12 * scale

    def test_mismatched_weights_rejected(self):
        mesh = build_mesh(4, 1.0)
        ops = assemble_difference_ops(mesh)
        params = MaterialParams(rho1=1, rho2=1, k=1, b=1)
        w1 = sample_weights(KernelSpec.zero(1), 0.1, depth=3)
        w2 = sample_weights(KernelSpec.zero(2), 0.2, depth=3)
        with pytest.raises(ConfigurationError):
            assemble_blocks(ops, params, w1, w2)

    def test_b_tilde_changes_slip_flexural_block(self):
        p1 = MaterialParams(rho1=1, rho2=1, k=1, b=2, b_tilde=5.0)
        p0 = MaterialParams(rho1=1, rho2=1, k=1, b=2)
        b1 = make_blocks(J=4, params=p1)
        b0 = make_blocks(J=4, params=p0)
        J = 4
        lam = b0.ops.Dminus.T @ b0.ops.Dminus
        diff = b1.K[2 * J:, 2 * J:] - b0.K[2 * J:, 2 * J:]
        assert np.allclose(diff, 3.0 * lam)


class TestCoercivity:
    def test_memoryless_unit_parameters_admissible(self):
        params = MaterialParams(rho1=1, rho2=1, k=1, b=1, delta=1, gamma=1)
        ops = assemble_difference_ops(build_mesh(12, 1.0))
        rep = check_coercivity(ops, params, 0.0, 0.0)
        assert rep.admissible and rep.k0_estimate > 0

    def test_huge_memory_mass_inadmissible(self):
        params = MaterialParams(rho1=1, rho2=1, k=1, b=1, delta=1, gamma=1)
        ops = assemble_difference_ops(build_mesh(12, 1.0))
        rep = check_coercivity(ops, params, 1000.0, 0.0)
        assert not rep.admissible and rep.k0_estimate < 0

    def test_homogeneity_under_doubling(self):
        ops = assemble_difference_ops(build_mesh(10, 1.0))
        p1 = MaterialParams(rho1=1, rho2=1, k=1.5, b=2.0, delta=0.7, gamma=0)
        p2 = MaterialParams(rho1=1, rho2=1, k=3.0, b=4.0, delta=1.4, gamma=0)
        k0_1 = check_coercivity(ops, p1, 0.3, 0.4).k0_estimate
        k0_2 = check_coercivity(ops, p2, 0.6, 0.8).k0_estimate
        assert k0_2 == pytest.approx(2.0 * k0_1, rel=1e-12)

    def test_monotone_in_g1_total(self):
        ops = assemble_difference_ops(build_mesh(8, 1.0))
        params = MaterialParams(rho1=1, rho2=1, k=1.2, b=1.5, delta=0.5, gamma=0)
        estimates = [check_coercivity(ops, params, g1, 0.2).k0_estimate
                     for g1 in (0.0, 0.3, 0.8, 1.1)]
        assert all(a >= b for a, b in zip(estimates, estimates[1:]))

    @pytest.mark.parametrize("J", [6, 14, 20])
    def test_matches_independent_dense_eigensolve(self, J):
        params = MaterialParams(rho1=1, rho2=1, k=1.7, b=2.2, delta=0.9, gamma=0.4)
        ops = assemble_difference_ops(build_mesh(J, 1.0))
        g1t, g2t = 0.4, 0.6
        rep = check_coercivity(ops, params, g1t, g2t)
        # independent route: full spectrum of B^{-1/2} A B^{-1/2}
        A = coercivity_form(ops, params, g1t, g2t)
        B = _gradient_form(ops)
        w, V = np.linalg.eigh(B)
        Bih = V @ np.diag(w ** -0.5) @ V.T
        lam = np.linalg.eigvalsh(Bih @ A @ Bih)
        assert rep.k0_estimate == pytest.approx(lam[0], rel=1e-8)

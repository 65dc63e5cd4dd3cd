"""Spatial mesh and the difference/averaging/block matrices of the scheme.

The beam (0, L) is discretized on J interior nodes x_j = j*h, h = L/(J+1).
The transverse displacement phi is clamped at both ends; the rotation
combination psi and the slip v are clamped at x = 0 and carry the discrete
Neumann condition "last interior value = ghost value" at x = L.  That
boundary treatment is baked into the operators:

* ``Dminus``  backward difference, (u_j - u_{j-1})/h with u_0 = 0
* ``Dplus``   = -Dminus^T, forward difference with vanishing ghost on the right
* ``D0sq``    clamped-clamped second difference (tridiagonal -2, 1)
* ``Pminus``  backward two-point average, (u_j + u_{j-1})/2 with u_0 = 0
* ``Q``       = Pplus @ Pminus, the quarter-weighted averaging stencil whose
               last diagonal entry is 1/4 (Neumann end)

and the exact algebraic identity

    D0sq = Dplus @ Dminus - J_last/h**2 = Dminus @ Dplus - J_first/h**2

(single-entry matrices at (J,J) and (1,1)) links the clamped and mixed
Laplacians; the energy bookkeeping leans on it.

The block system advanced in time is

    M a + C w + (K + G0) u + sum_{j=1..N} G_j u^{(-j)} = 0,

with M = diag(3 rho1, 3 rho2, rho2) x I, the damping C acting as 4 gamma
on the slip velocity only, K the symmetric elastic stiffness whose quadratic
form is twice the elastic energy (shear + flexural + adhesive + clamped-end
correction), and G_j = dt * diag(g1_j * D0sq, g2_j * Dplus@Dminus, 0) the
memory blocks.

The shear energy is the complete staggered quadrature

    3k [ sum_{j=1..J} (Dminus phi + Pminus psi - Pminus v)_j^2
         + (-phi_J/h + psi_J - v_J)^2 ],

one sample per half-cell including the free-end cell (x_J, L]; that last
sample supplies exactly the clamped-end correction making the phi-block
equal -3k D0sq.  The free-end node of the two Neumann fields carries the
cell measure 3h/2, so their mass, damping and adhesive end entries are
weighted by 3/2.  Dropping either end treatment leaves a single-node
inconsistency at x_J that degrades global convergence to first order; with
both, the scheme is second order in space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, NumericalError
from .kernels import KernelWeights

#: Averaging parameter of the theta-stencil; the scheme fixes it.
THETA = 0.25


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh with J interior nodes on (0, L)."""

    J: int
    L: float
    h: float
    nodes: np.ndarray  # all J+2 node coordinates, boundaries included

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]


def build_mesh(J: int, L: float = 1.0) -> Mesh:
    if J < 2:
        raise ConfigurationError(f"need at least 2 interior nodes, got J = {J}")
    if L <= 0:
        raise ConfigurationError("beam length must be positive")
    h = L / (J + 1)
    return Mesh(J=int(J), L=float(L), h=h, nodes=np.arange(J + 2) * h)


@dataclass(frozen=True)
class MaterialParams:
    """Physical constants of the layered beam.

    rho1, rho2 are the mass densities of the transverse and rotational
    equations, k the shear stiffness, b the flexural stiffness, delta the
    adhesive stiffness and gamma the slip friction coefficient.  delta = 0
    and gamma = 0 are allowed.  ``b_tilde``, when set, gives the slip
    equation its own flexural stiffness (different wave speeds); it defaults
    to b.
    """

    rho1: float
    rho2: float
    k: float
    b: float
    delta: float = 0.0
    gamma: float = 0.0
    b_tilde: float | None = None

    def __post_init__(self):
        for name in ("rho1", "rho2", "k", "b"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"material parameter {name} must be positive")
        if self.delta < 0 or self.gamma < 0:
            raise ConfigurationError("delta and gamma must be nonnegative")
        if self.b_tilde is not None and self.b_tilde <= 0:
            raise ConfigurationError("b_tilde must be positive when given")

    @property
    def b_slip(self) -> float:
        return self.b if self.b_tilde is None else self.b_tilde


@dataclass(frozen=True)
class DifferenceOperators:
    """Dense J x J difference and averaging matrices (small-J reference forms)."""

    mesh: Mesh
    Dminus: np.ndarray
    Dplus: np.ndarray
    D0sq: np.ndarray
    Pminus: np.ndarray
    Pplus: np.ndarray
    Q: np.ndarray

    @property
    def J(self) -> int:
        return self.mesh.J

    @property
    def h(self) -> float:
        return self.mesh.h


def assemble_difference_ops(mesh: Mesh) -> DifferenceOperators:
    J, h = mesh.J, mesh.h
    eye = np.eye(J)
    down = np.diag(np.ones(J - 1), -1)
    dminus = (eye - down) / h
    dplus = -dminus.T
    d0sq = (np.diag(-2.0 * np.ones(J)) + np.diag(np.ones(J - 1), 1)
            + np.diag(np.ones(J - 1), -1)) / h**2
    pminus = (eye + down) / 2.0
    pplus = pminus.T
    return DifferenceOperators(mesh=mesh, Dminus=dminus, Dplus=dplus, D0sq=d0sq,
                               Pminus=pminus, Pplus=pplus, Q=pplus @ pminus)


# -- stencil applications -----------------------------------------------------
#
# The stepping loop never multiplies by the dense matrices above; these O(J)
# kernels implement the same operators (same boundary rows) on vectors.

def apply_dminus(u: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(u)
    out[0] = u[0]
    out[1:] = u[1:] - u[:-1]
    out /= h
    return out


def apply_dplus(u: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(u)
    out[:-1] = u[1:] - u[:-1]
    out[-1] = -u[-1]
    out /= h
    return out


def apply_dminus_t(u: np.ndarray, h: float) -> np.ndarray:
    # Dminus^T = -Dplus
    return -apply_dplus(u, h)


def apply_d0sq(u: np.ndarray, h: float) -> np.ndarray:
    out = -2.0 * u
    out[:-1] += u[1:]
    out[1:] += u[:-1]
    return out / h**2


def apply_dpdm(u: np.ndarray, h: float) -> np.ndarray:
    """Dplus @ Dminus: mixed clamped/Neumann second difference."""
    return apply_dplus(apply_dminus(u, h), h)


def apply_pminus(u: np.ndarray) -> np.ndarray:
    out = u.copy()
    out[1:] += u[:-1]
    return 0.5 * out


def apply_pplus(u: np.ndarray) -> np.ndarray:
    out = u.copy()
    out[:-1] += u[1:]
    return 0.5 * out


@dataclass(frozen=True)
class SpatialOperators:
    """Everything spatial the integrator and the energy monitor consume.

    ``K`` is assembled symmetrically: its quadratic form equals twice the
    elastic energy (3k * shear-square + clamped-end correction + flexural +
    adhesive terms), which is what the Newmark energy argument requires.
    ``KG0`` = K + G0 folds in the instantaneous memory block.  ``M_diag``
    and ``C_diag`` are the diagonals of the (block-diagonal) mass and
    damping matrices.
    """

    mesh: Mesh
    params: MaterialParams
    ops: DifferenceOperators
    weights1: KernelWeights
    weights2: KernelWeights
    M_diag: np.ndarray
    C_diag: np.ndarray
    K: np.ndarray
    G0: np.ndarray
    KG0: np.ndarray

    @property
    def J(self) -> int:
        return self.mesh.J

    @property
    def h(self) -> float:
        return self.mesh.h

    @property
    def dt(self) -> float:
        return self.weights1.dt

    def Gblock(self, j: int) -> np.ndarray:
        """Dense memory block for weight index j (reference form, small J)."""
        J = self.J
        dt = self.weights1.dt
        out = np.zeros((3 * J, 3 * J))
        out[:J, :J] = dt * self.weights1.g[j] * self.ops.D0sq
        out[J:2 * J, J:2 * J] = dt * self.weights2.g[j] * (self.ops.Dplus @ self.ops.Dminus)
        return out

    def split(self, u: np.ndarray):
        J = self.J
        return u[:J], u[J:2 * J], u[2 * J:]

    def shear_samples(self, phi, psi, v) -> tuple[np.ndarray, float]:
        """Half-cell shear values: interior samples plus the free-end sample."""
        h = self.h
        s = apply_dminus(phi, h) + apply_pminus(psi) - apply_pminus(v)
        s_end = -phi[-1] / h + psi[-1] - v[-1]
        return s, s_end

    def apply_KG0(self, u: np.ndarray) -> np.ndarray:
        """O(J) stencil evaluation of (K + G0) @ u."""
        J, h = self.J, self.h
        p = self.params
        dt = self.weights1.dt
        phi, psi, v = self.split(u)
        s, s_end = self.shear_samples(phi, psi, v)
        out = np.empty_like(u)
        # transverse row: flux divergence of the half-cell shear + memory j=0
        row = -3.0 * p.k * apply_dplus(s, h)
        row[-1] -= 3.0 * p.k * s_end / h
        row += dt * self.weights1.g[0] * apply_d0sq(phi, h)
        out[:J] = row
        # rotation row: 3k * Pplus @ shear + 3b flexural + memory j=0
        row = 3.0 * p.k * apply_pplus(s)
        row[-1] += 3.0 * p.k * s_end
        row += 3.0 * p.b * apply_dminus_t(apply_dminus(psi, h), h)
        row += dt * self.weights2.g[0] * apply_dpdm(psi, h)
        out[J:2 * J] = row
        # slip row: -3k * Pplus @ shear + flexural + adhesive (end-corrected)
        row = -3.0 * p.k * apply_pplus(s)
        row[-1] -= 3.0 * p.k * s_end
        row += p.b_slip * apply_dminus_t(apply_dminus(v, h), h)
        row += 4.0 * p.delta * apply_pplus(apply_pminus(v))
        row[-1] += 4.0 * p.delta * v[-1]
        out[2 * J:] = row
        return out


def assemble_blocks(ops: DifferenceOperators, params: MaterialParams,
                    weights1: KernelWeights, weights2: KernelWeights) -> SpatialOperators:
    """Assemble the block mass/damping/stiffness/memory matrices."""
    if weights1.dt != weights2.dt:
        raise ConfigurationError("the two kernels must be sampled on the same time step")
    if weights1.N != weights2.N:
        raise ConfigurationError("the two kernels must share one truncation depth")
    J, h = ops.J, ops.h
    mesh = ops.mesh

    # the free-end node of the Neumann fields owns the cell (x_{J-1/2}, L]
    # of measure 3h/2; its mass/damping/adhesive entries carry that weight
    end = np.ones(J)
    end[-1] = 1.5
    m_diag = np.concatenate([
        np.full(J, 3.0 * params.rho1),
        3.0 * params.rho2 * end,
        params.rho2 * end,
    ])
    c_diag = np.concatenate([np.zeros(2 * J), 4.0 * params.gamma * end])

    # K from the complete staggered shear quadrature (interior half-cells via
    # W u = Dminus phi + Pminus psi - Pminus v, free-end half-cell via r u)
    # plus flexural and adhesive diagonal blocks
    e_last = np.zeros(J)
    e_last[-1] = 1.0
    W = np.hstack([ops.Dminus, ops.Pminus, -ops.Pminus])
    r = np.concatenate([-e_last / h, e_last, -e_last])[None, :]
    K = 3.0 * params.k * (W.T @ W + r.T @ r)
    lam = ops.Dminus.T @ ops.Dminus          # = -Dplus @ Dminus
    K[J:2 * J, J:2 * J] += 3.0 * params.b * lam
    Qhat = ops.Q + np.outer(e_last, e_last)
    K[2 * J:, 2 * J:] += params.b_slip * lam + 4.0 * params.delta * Qhat
    K = 0.5 * (K + K.T)   # bitwise symmetry regardless of BLAS summation order

    G0 = np.zeros((3 * J, 3 * J))
    dt = weights1.dt
    G0[:J, :J] = dt * weights1.g[0] * ops.D0sq
    G0[J:2 * J, J:2 * J] = dt * weights2.g[0] * (ops.Dplus @ ops.Dminus)

    blocks = SpatialOperators(
        mesh=mesh, params=params, ops=ops,
        weights1=weights1, weights2=weights2,
        M_diag=m_diag, C_diag=c_diag, K=K, G0=G0, KG0=K + G0,
    )
    assert blocks.K.shape == (3 * J, 3 * J)
    return blocks


@dataclass(frozen=True)
class CoercivityReport:
    k0_estimate: float
    admissible: bool


def _gradient_form(ops: DifferenceOperators) -> np.ndarray:
    """Block-diagonal discrete H^1-seminorm form: clamped for phi, mixed for psi, v."""
    J = ops.J
    lam = ops.Dminus.T @ ops.Dminus
    B = np.zeros((3 * J, 3 * J))
    B[:J, :J] = -ops.D0sq               # = Dplus^T Dplus + clamped-end term
    B[J:2 * J, J:2 * J] = lam
    B[2 * J:, 2 * J:] = lam
    return B


def coercivity_form(ops: DifferenceOperators, params: MaterialParams,
                    g1_total: float, g2_total: float) -> np.ndarray:
    """Discrete quadratic form of the memory-corrected elastic energy.

    3k |shear samples|^2 + 3(b - g2_total) |Dminus psi|^2 + b |Dminus v|^2
    + 4 delta * adhesive form - 3 g1_total * (phi gradient form).
    Positivity of this form (with margin k0 against the gradient form) is
    what makes the energy a norm.
    """
    J, h = ops.J, ops.h
    e_last = np.zeros(J)
    e_last[-1] = 1.0
    W = np.hstack([ops.Dminus, ops.Pminus, -ops.Pminus])
    r = np.concatenate([-e_last / h, e_last, -e_last])[None, :]
    A = 3.0 * params.k * (W.T @ W + r.T @ r)
    lam = ops.Dminus.T @ ops.Dminus
    A[:J, :J] += -3.0 * g1_total * (-ops.D0sq)
    A[J:2 * J, J:2 * J] += 3.0 * (params.b - g2_total) * lam
    Qhat = ops.Q + np.outer(e_last, e_last)
    A[2 * J:, 2 * J:] += params.b_slip * lam + 4.0 * params.delta * Qhat
    return A


def check_coercivity(ops: DifferenceOperators, params: MaterialParams,
                     g1_total: float, g2_total: float) -> CoercivityReport:
    """Numerically check coercivity of the memory-corrected elastic form.

    Returns the smallest generalized eigenvalue k0 of (elastic form,
    gradient form); the pair is admissible when k0 > 0.  This is the
    independent oracle for the geometry-coupled half of the standing
    hypotheses; the kernel-local half lives in ``check_h1_h2``.
    """
    A = coercivity_form(ops, params, g1_total, g2_total)
    B = _gradient_form(ops)
    try:
        eigvals = scipy.linalg.eigh(A, B, eigvals_only=True,
                                    subset_by_index=(0, 0))
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise NumericalError(
            "generalized eigensolve failed during the coercivity check; "
            f"cond(A) = {np.linalg.cond(A):.3e}, cond(B) = {np.linalg.cond(B):.3e}"
        ) from exc
    k0 = float(eigvals[0])
    return CoercivityReport(k0_estimate=k0, admissible=k0 > 0)

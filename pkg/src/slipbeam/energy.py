"""Fully discrete energy, its term-by-term breakdown, and the decrement audit.

The energy of the stepped system splits into kinetic terms, the elastic
quadratic form of K (shear + clamped-end correction + flexural + adhesive),
and memory terms built from the lag differences eta/z.  Writing q1(u) =
|Dplus u|^2 + u_1^2/h^2 and q2(u) = |Dminus u|^2 for the two channels, and

    w_1 = dt*g^1/2,  w_l = dt*(g^{l-1}+g^l)/2  (2 <= l <= N),  w_{N+1} = dt*g^N/2,

the energy is

    E^n = 1/2 w' M w + 1/2 u' (K+G0) u
          + sum_channels [ -1/2 (dt * sum_{j=0..N} g_j) q(u_channel)
                           + 1/2 sum_{l=1..N+1} w_l q(z^{n,l}) ]

and one Newmark step with beta = 1/4, vs = 1/2 changes it by exactly

    E^{n+1} - E^n = -dt * v_mid' C v_mid
                    - sum_channels 1/2 sum_{l=1..N+1} w_l (q(z^{n,l}) - q(z^{n,l-1})),

an algebraic identity of the scheme (float roundoff aside).  The ledger
reports that right-hand side in three groups per channel: the newest slot
entering the convolution (l = 1, always nonpositive), the aging of the
interior slots (l = 2..N), and the truncation slot (l = N+1, negligible
whenever the kernel tail at N*dt is).

The printed form of the memory boundary terms squares phi_1/h^2 instead of
phi_1/h; both conventions are implemented ("as_printed" and "dimensional")
and verification runs evaluate the identity under both -- only the
dimensional convention closes it, which the closure report records.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .assembly import SpatialOperators, apply_dminus, apply_dplus, apply_pminus
from .errors import ConfigurationError, IdentityViolationError
from .kernels import KernelWeights
from .newmark import SimState

AS_PRINTED = "as_printed"
DIMENSIONAL = "dimensional"
CONVENTIONS = (AS_PRINTED, DIMENSIONAL)

#: Default absolute tolerance factor for the identity check: 1e-9 * max(1, E0).
IDENTITY_TOL_FACTOR = 1e-9


def combined_weights(weights: KernelWeights) -> np.ndarray:
    """History-energy weights w_l, l = 0..N+1 (w_0 = 0, ends halved)."""
    n = weights.N
    w = np.zeros(n + 2)
    w[1] = 0.5 * weights.dt * weights.g[1]
    if n >= 2:
        w[2:n + 1] = weights.dt * 0.5 * (weights.g[1:n] + weights.g[2:n + 1])
    w[n + 1] = 0.5 * weights.dt * weights.g[n]
    return w


def _boundary_power(convention: str) -> int:
    if convention not in CONVENTIONS:
        raise ConfigurationError(f"unknown boundary-term convention {convention!r}")
    return 2 if convention == DIMENSIONAL else 4


def lag_q_arrays(state: SimState, blocks: SpatialOperators, convention: str):
    """(a1, a2) with a_i[l] = q_i(lag-l memory variable), l = 0..N+1."""
    buf = state.history
    n = buf.N
    h = blocks.h
    p = _boundary_power(convention)
    gphi_now = buf.lag_rows(buf.grad_phi, 0, 1)[0]
    phi1_now = buf.lag_rows(buf.phi_first, 0, 1)[0]
    gpsi_now = buf.lag_rows(buf.grad_psi, 0, 1)[0]

    d = gphi_now[None, :] - buf.lag_rows(buf.grad_phi, 1, n + 1)
    a1 = np.einsum("ij,ij->i", d, d)
    a1 += (phi1_now - buf.lag_rows(buf.phi_first, 1, n + 1)) ** 2 / h**p
    d = gpsi_now[None, :] - buf.lag_rows(buf.grad_psi, 1, n + 1)
    a2 = np.einsum("ij,ij->i", d, d)
    return np.concatenate([[0.0], a1]), np.concatenate([[0.0], a2])


@dataclass(frozen=True)
class EnergyBreakdown:
    """All displayed terms of the fully discrete energy, plus their sum.

    ``memory_*_static`` are the (negative) instantaneous corrections
    -1/2 * (dt * sum_j g_j) * q(current field); ``memory_*_history`` the
    nonnegative weighted sums over the lag differences.  ``total`` is
    computed as the sum of the parts.
    """

    kinetic_phi: float
    kinetic_psi: float
    kinetic_v: float
    elastic_shear: float
    boundary_shear: float  # free-end half-cell shear sample
    flexural_psi: float
    flexural_v: float
    adhesive_v: float
    memory_phi_static: float
    memory_phi_history: float
    memory_psi_static: float
    memory_psi_history: float
    printed_phi_flexural: float
    total: float

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def energy(state: SimState, blocks: SpatialOperators,
           convention: str = AS_PRINTED,
           include_phi_flexural: bool = False) -> EnergyBreakdown:
    """Evaluate the fully discrete energy of the current state.

    ``include_phi_flexural`` adds the display-only 3b/2 |Dminus phi|^2 term
    (default absent: with it present the conservative limit no longer closes,
    which marks it as a transcription artifact rather than part of the
    conserved quantity).
    """
    p = blocks.params
    h = blocks.h
    J = blocks.J
    phi, psi, v = blocks.split(state.disp)
    dphi, dpsi, dv = blocks.split(state.vel)

    # kinetic terms carry the (end-weighted) mass diagonal
    kin_phi = 0.5 * float(blocks.M_diag[:J] @ (dphi * dphi))
    kin_psi = 0.5 * float(blocks.M_diag[J:2 * J] @ (dpsi * dpsi))
    kin_v = 0.5 * float(blocks.M_diag[2 * J:] @ (dv * dv))

    s, s_end = blocks.shear_samples(phi, psi, v)
    el_shear = 1.5 * p.k * float(s @ s)
    bnd_shear = 1.5 * p.k * s_end**2
    dm_psi = apply_dminus(psi, h)
    flex_psi = 1.5 * p.b * float(dm_psi @ dm_psi)
    dm_v = apply_dminus(v, h)
    flex_v = 0.5 * p.b_slip * float(dm_v @ dm_v)
    pm_v = apply_pminus(v)
    adhesive = 2.0 * p.delta * (float(pm_v @ pm_v) + v[-1] ** 2)

    pw = _boundary_power(convention)
    dp_phi = apply_dplus(phi, h)
    q1_now = float(dp_phi @ dp_phi) + phi[0] ** 2 / h**pw
    q2_now = float(dm_psi @ dm_psi)

    a1, a2 = lag_q_arrays(state, blocks, convention)
    w1 = combined_weights(blocks.weights1)
    w2 = combined_weights(blocks.weights2)
    mem_phi_static = -0.5 * blocks.weights1.scheme_mass * q1_now
    mem_psi_static = -0.5 * blocks.weights2.scheme_mass * q2_now
    mem_phi_hist = 0.5 * float(w1[1:] @ a1[1:])
    mem_psi_hist = 0.5 * float(w2[1:] @ a2[1:])

    printed_flex = 0.0
    if include_phi_flexural:
        dm_phi = apply_dminus(phi, h)
        printed_flex = 1.5 * p.b * float(dm_phi @ dm_phi)

    parts = (kin_phi, kin_psi, kin_v, el_shear, bnd_shear, flex_psi, flex_v,
             adhesive, mem_phi_static, mem_phi_hist, mem_psi_static,
             mem_psi_hist, printed_flex)
    return EnergyBreakdown(*parts, total=float(sum(parts)))


@dataclass(frozen=True)
class EnergySample:
    """Energy breakdown plus the per-lag data the decrement audit consumes."""

    step_index: int
    time: float
    convention: str
    breakdown: EnergyBreakdown
    lag_q1: np.ndarray
    lag_q2: np.ndarray
    vel: np.ndarray

    @property
    def total(self) -> float:
        return self.breakdown.total


def energy_sample(state: SimState, blocks: SpatialOperators,
                  convention: str = AS_PRINTED,
                  include_phi_flexural: bool = False) -> EnergySample:
    a1, a2 = lag_q_arrays(state, blocks, convention)
    return EnergySample(
        step_index=state.step_index,
        time=state.time,
        convention=convention,
        breakdown=energy(state, blocks, convention, include_phi_flexural),
        lag_q1=a1, lag_q2=a2,
        vel=state.vel.copy(),
    )


@dataclass(frozen=True)
class DecrementLedger:
    """Exact per-step energy decrement, split into its dissipation channels.

    ``damping_loss`` is the frictional term -dt * v_mid' C v_mid.  Per
    kernel, ``fresh_slot`` is the cost of the newest lag entering the
    convolution (-dt g^1/4 * q(z^{n,1}), nonpositive for any state),
    ``kernel_smoothing`` the aging of the interior lags (nonpositive along
    smooth runs of nonincreasing kernels), and ``tail_drop`` the truncation
    slot, bounded by the kernel tail at N*dt.  ``predicted_decrement`` is
    their sum and must match ``observed_decrement`` to roundoff.
    """

    step_index: int
    time: float
    convention: str
    damping_loss: float
    fresh_slot1: float
    fresh_slot2: float
    kernel_smoothing1: float
    kernel_smoothing2: float
    tail_drop1: float
    tail_drop2: float
    predicted_decrement: float
    observed_decrement: float

    @property
    def mismatch(self) -> float:
        return self.observed_decrement - self.predicted_decrement

    def entries(self):
        return {
            "damping_loss": self.damping_loss,
            "fresh_slot1": self.fresh_slot1,
            "fresh_slot2": self.fresh_slot2,
            "kernel_smoothing1": self.kernel_smoothing1,
            "kernel_smoothing2": self.kernel_smoothing2,
            "tail_drop1": self.tail_drop1,
            "tail_drop2": self.tail_drop2,
        }


def _channel_terms(a: np.ndarray, w: np.ndarray):
    n = len(w) - 2
    fresh = -0.5 * w[1] * a[1]
    smoothing = -0.5 * float(w[2:n + 1] @ (a[2:n + 1] - a[1:n]))
    tail = -0.5 * w[n + 1] * (a[n + 1] - a[n])
    return fresh, smoothing, tail


def decrement_check(before: EnergySample, after: EnergySample,
                    blocks: SpatialOperators, e0: float | None = None,
                    tol_abs: float | None = None,
                    raise_on_violation: bool = False) -> DecrementLedger:
    """Compare the observed energy decrement with its closed form.

    ``before`` and ``after`` must be consecutive steps of a run with
    beta = 1/4, vs = 1/2 and matching conventions.  A mismatch beyond
    tol_abs (default 1e-9 * max(1, E0)) signals inconsistent assembly and,
    when requested, raises -- this is the artifact's primary tripwire.
    """
    if after.step_index != before.step_index + 1:
        raise ConfigurationError("decrement check needs two consecutive steps")
    if after.convention != before.convention:
        raise ConfigurationError("decrement check needs one boundary convention")
    dt = blocks.dt
    v_mid = 0.5 * (before.vel + after.vel)
    damping = -dt * float(blocks.C_diag @ (v_mid * v_mid))

    f1, s1, t1 = _channel_terms(before.lag_q1, combined_weights(blocks.weights1))
    f2, s2, t2 = _channel_terms(before.lag_q2, combined_weights(blocks.weights2))
    predicted = damping + f1 + s1 + t1 + f2 + s2 + t2
    observed = after.total - before.total
    ledger = DecrementLedger(
        step_index=before.step_index, time=before.time,
        convention=before.convention,
        damping_loss=damping,
        fresh_slot1=f1, fresh_slot2=f2,
        kernel_smoothing1=s1, kernel_smoothing2=s2,
        tail_drop1=t1, tail_drop2=t2,
        predicted_decrement=predicted, observed_decrement=observed,
    )
    if raise_on_violation:
        if tol_abs is None:
            tol_abs = IDENTITY_TOL_FACTOR * max(1.0, e0 if e0 is not None else 1.0)
        if abs(ledger.mismatch) > tol_abs:
            raise IdentityViolationError(
                f"energy decrement identity violated at step {before.step_index}: "
                f"|observed - predicted| = {abs(ledger.mismatch):.3e} > {tol_abs:.3e} "
                f"under the {before.convention} convention"
            )
    return ledger

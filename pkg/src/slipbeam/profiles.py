"""Named analytic initial-data profiles and prescribed-history envelopes.

Profiles are built on all J+2 nodes and respect the boundary conditions by
construction: the transverse displacement uses clamped-clamped sine modes
sin(m pi x / L); rotation and slip use the mixed modes sin((m - 1/2) pi x / L),
which vanish at x = 0 and have zero slope at x = L.  The polynomial bumps
x (L - x) and x (2L - x) satisfy the same conditions.

A prescribed history is a separable envelope env(s) (env(0) = 1) applied to
the t = 0 displacement profiles; the velocity initial data stay independent.
"""

from __future__ import annotations

import numpy as np

from .assembly import Mesh
from .errors import ConfigurationError
from .newmark import InitialData


def clamped_mode(x: np.ndarray, L: float, mode: int) -> np.ndarray:
    return np.sin(mode * np.pi * x / L)


def mixed_mode(x: np.ndarray, L: float, mode: int) -> np.ndarray:
    return np.sin((mode - 0.5) * np.pi * x / L)


def clamped_bump(x: np.ndarray, L: float) -> np.ndarray:
    return 4.0 * x * (L - x) / L**2


def mixed_bump(x: np.ndarray, L: float) -> np.ndarray:
    return x * (2.0 * L - x) / L**2


def sine_initial_data(mesh: Mesh, amp_phi0=1.0, mode_phi0=1, amp_u0=0.0, mode_u0=1,
                      amp_v0=0.5, mode_v0=1, amp_phi1=0.0, mode_phi1=1,
                      amp_u1=0.0, mode_u1=1, amp_v1=0.0, mode_v1=1) -> InitialData:
    x, L = mesh.nodes, mesh.L
    return InitialData(
        phi0=amp_phi0 * clamped_mode(x, L, mode_phi0),
        phi1=amp_phi1 * clamped_mode(x, L, mode_phi1),
        u0=amp_u0 * mixed_mode(x, L, mode_u0),
        u1=amp_u1 * mixed_mode(x, L, mode_u1),
        v0=amp_v0 * mixed_mode(x, L, mode_v0),
        v1=amp_v1 * mixed_mode(x, L, mode_v1),
    )


def bump_initial_data(mesh: Mesh, amp_phi0=1.0, amp_u0=0.0, amp_v0=0.5,
                      amp_phi1=0.0, amp_u1=0.0, amp_v1=0.0) -> InitialData:
    x, L = mesh.nodes, mesh.L
    return InitialData(
        phi0=amp_phi0 * clamped_bump(x, L),
        phi1=amp_phi1 * clamped_bump(x, L),
        u0=amp_u0 * mixed_bump(x, L),
        u1=amp_u1 * mixed_bump(x, L),
        v0=amp_v0 * mixed_bump(x, L),
        v1=amp_v1 * mixed_bump(x, L),
    )


def zero_initial_data(mesh: Mesh) -> InitialData:
    return InitialData.zero(mesh.J + 2)


def history_envelope(kind: str, rate: float = 0.0):
    """Scalar envelope env(s) for prescribed histories; env(0) = 1.

    ``constant`` freezes the past at the initial state (all memory variables
    start at zero); ``exp_decay`` and ``linear_growth`` prescribe a past that
    was larger/smaller going back in time according to env(s) = exp(-rate*s)
    or 1 - rate*s.
    """
    if kind == "constant":
        return lambda s: 1.0
    if kind == "exp_decay":
        return lambda s: float(np.exp(-rate * s))
    if kind == "linear_growth":
        return lambda s: 1.0 - rate * s
    raise ConfigurationError(f"unknown history kind {kind!r}")


def separable_history(mesh: Mesh, initial: InitialData, envelope):
    """history_fn(x, s) applying a scalar envelope to the t = 0 profiles."""
    x_all = mesh.nodes

    def history_fn(x: np.ndarray, s: float):
        env = envelope(s)
        # interpolate the stored node profiles onto the requested coordinates
        phi = env * np.interp(x, x_all, initial.phi0)
        u = env * np.interp(x, x_all, initial.u0)
        v = env * np.interp(x, x_all, initial.v0)
        return phi, u, v

    return history_fn

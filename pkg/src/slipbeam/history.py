"""Truncated displacement histories and the discrete memory variables.

The convolution damping needs the last N displacement vectors of the
transverse field phi and of the rotation combination psi.  The energy audit
additionally references one lag further back, so the ring stores the current
slot plus N+1 past slots.  Alongside the raw interior-node values each slot
caches the gradient data the energy forms consume: Dplus phi, the first
interior value phi_1, and Dminus psi.

The memory variables are lag differences against the current slot,

    eta^{n,j} = phi^n - phi^{n-j},     z^{n,j} = psi^n - psi^{n-j},

with the exact telescoping eta^{n,j} - eta^{n,j-1} = phi^{n+1-j} - phi^{n-j}.
"""

from __future__ import annotations

import numpy as np

from .assembly import Mesh, apply_d0sq, apply_dminus, apply_dpdm, apply_dplus
from .errors import ConfigurationError
from .kernels import KernelWeights


class HistoryBuffer:
    """Ring buffer of the current + N+1 past (phi, psi) interior vectors.

    Pushing is O(1) slot arithmetic; the weighted convolution sums read the
    ring through at most two contiguous slices, so they reduce to one or two
    BLAS matrix-vector products per field.
    """

    def __init__(self, J: int, N: int, dt: float, h: float):
        if N < 1:
            raise ConfigurationError("history depth must be >= 1")
        self.J = int(J)
        self.N = int(N)
        self.dt = float(dt)
        self.h = float(h)
        self.n_slots = self.N + 2          # current + N+1 past
        self.phi = np.zeros((self.n_slots, J))
        self.psi = np.zeros((self.n_slots, J))
        self.grad_phi = np.zeros((self.n_slots, J))   # Dplus phi per slot
        self.phi_first = np.zeros(self.n_slots)       # phi_1 per slot
        self.grad_psi = np.zeros((self.n_slots, J))   # Dminus psi per slot
        self._head = 0                     # ring row of the current slot

    def _row(self, lag: int) -> int:
        return (self._head - lag) % self.n_slots

    def fill(self, lag: int, phi: np.ndarray, psi: np.ndarray) -> None:
        """Write one slot directly (initialization path)."""
        r = self._row(lag)
        self.phi[r] = phi
        self.psi[r] = psi
        self.grad_phi[r] = apply_dplus(self.phi[r], self.h)
        self.phi_first[r] = phi[0]
        self.grad_psi[r] = apply_dminus(self.psi[r], self.h)

    def push(self, phi: np.ndarray, psi: np.ndarray) -> None:
        """Advance one step: the oldest slot is overwritten with the new state."""
        self._head = (self._head + 1) % self.n_slots
        self.fill(0, phi, psi)

    def lag(self, lag: int) -> tuple[np.ndarray, np.ndarray]:
        """(phi, psi) at ``lag`` steps behind the newest pushed slot."""
        if not 0 <= lag <= self.N + 1:
            raise ConfigurationError(f"lag {lag} outside stored range 0..{self.N + 1}")
        r = self._row(lag)
        return self.phi[r], self.psi[r]

    def _ring_chunks(self, first_lag: int, count: int):
        """Row-index chunks covering lags first_lag .. first_lag+count-1."""
        start = self._row(first_lag)
        # lags increase as rows decrease (mod n_slots)
        lo = start - count + 1
        if lo >= 0:
            yield slice(lo, start + 1), True
        else:
            yield slice(0, start + 1), True
            yield slice(self.n_slots + lo, self.n_slots), False

    def weighted_sum(self, field: str, weights: np.ndarray, first_lag: int) -> np.ndarray:
        """sum_l weights[l] * field(lag = first_lag + l) as one or two GEMVs."""
        data = self.phi if field == "phi" else self.psi
        count = len(weights)
        if first_lag + count - 1 > self.N + 1:
            raise ConfigurationError("weighted sum reaches beyond the stored history")
        out = np.zeros(self.J)
        for sl, newest_part in self._ring_chunks(first_lag, count):
            n_rows = sl.stop - sl.start
            # rows in a chunk run oldest-to-newest; weights run newest-to-oldest
            if newest_part:
                w = weights[:n_rows][::-1]
            else:
                w = weights[count - n_rows:][::-1]
            out += w @ data[sl]
        return out

    def lag_rows(self, array: np.ndarray, first_lag: int, count: int) -> np.ndarray:
        """Stacked rows for lags first_lag .. first_lag+count-1 (newest first)."""
        idx = (self._head - first_lag - np.arange(count)) % self.n_slots
        return array[idx]


def init_history(mesh: Mesh, N: int, dt: float, phi0: np.ndarray, psi0: np.ndarray,
                 history_fn=None) -> HistoryBuffer:
    """Create and pre-fill the buffer from the prescribed past.

    ``history_fn(x, s)`` maps node coordinates and a past time s >= 0 to the
    triple (phi, u, v) of field values; the stored rotation history is the
    combination psi = v - u.  Without a prescribed past every slot holds the
    t = 0 values, so all memory variables start at zero.  ``phi0``/``psi0``
    are the interior-node initial values and must agree with the prescribed
    past at s = 0.
    """
    buf = HistoryBuffer(mesh.J, N, dt, mesh.h)
    if history_fn is None:
        for lag in range(buf.n_slots):
            buf.fill(lag, phi0, psi0)
        return buf
    x = mesh.interior
    for lag in range(buf.n_slots):
        phi_s, u_s, v_s = history_fn(x, lag * dt)
        phi_s = np.asarray(phi_s, dtype=float)
        psi_s = np.asarray(v_s, dtype=float) - np.asarray(u_s, dtype=float)
        if lag == 0:
            scale = max(1.0, float(np.abs(phi0).max()), float(np.abs(psi0).max()))
            if (np.abs(phi_s - phi0).max() > 1e-12 * scale
                    or np.abs(psi_s - psi0).max() > 1e-12 * scale):
                raise ConfigurationError(
                    "prescribed history at s = 0 disagrees with the initial data")
        buf.fill(lag, phi_s, psi_s)
    return buf


def memory_forcing(buf: HistoryBuffer, blocks, weights1: KernelWeights,
                   weights2: KernelWeights, shift: int = 1) -> np.ndarray:
    """Convolution forcing sum_{j=1..N} G_j u^{(n+shift-j)} as a 3J-vector.

    ``shift = 1`` (default) is the term entering the implicit solve for the
    next acceleration; ``shift = 0`` evaluates the same sum in the equation
    of motion at the current step (consistent initialization, residuals).
    The slip component is identically zero by the structure of the memory
    blocks.
    """
    if weights1.N != buf.N or weights2.N != buf.N:
        raise ConfigurationError("kernel weights and history buffer depth disagree")
    if blocks is not None and blocks.J != buf.J:
        raise ConfigurationError("history buffer and spatial operators disagree on J")
    dt = weights1.dt
    n = buf.N
    out = np.zeros(3 * buf.J)
    # lags relative to the current slot: j - shift for j = 1..N
    first_lag = 1 - shift
    acc_phi = buf.weighted_sum("phi", weights1.g[1:n + 1], first_lag)
    acc_psi = buf.weighted_sum("psi", weights2.g[1:n + 1], first_lag)
    out[:buf.J] = dt * apply_d0sq(acc_phi, buf.h)
    out[buf.J:2 * buf.J] = dt * apply_dpdm(acc_psi, buf.h)
    return out


def eta_z_views(buf: HistoryBuffer, jmax: int | None = None):
    """Memory variables eta^{n,j}, z^{n,j} for j = 1..jmax (default N).

    Returned as (jmax, J) arrays ordered by increasing lag; row j-1 equals
    the stored current slot minus the slot j steps back, so the telescoping
    identity holds bit-exactly.
    """
    jmax = buf.N if jmax is None else jmax
    if jmax > buf.N + 1:
        raise ConfigurationError("requested lag beyond stored history")
    phi_now, psi_now = buf.lag(0)
    etas = phi_now[None, :] - buf.lag_rows(buf.phi, 1, jmax)
    zs = psi_now[None, :] - buf.lag_rows(buf.psi, 1, jmax)
    return etas, zs

"""Relaxation kernels for the two fading-memory damping terms.

A kernel g : [0, inf) -> [0, inf) weights how strongly the past of the
transverse displacement (index 1) or of the rotation/slip combination
(index 2) acts on the present.  The admissible families are

* ``exponential``   g(s) = d * exp(-alpha * s),      alpha > 0, d >= 0
* ``polynomial``    g(s) = d * (1 + s)**(-q),        q > 1 (integrability), d >= 0
* ``tabulated``     nonincreasing samples on a uniform s-grid, linearly
                    interpolated and clamped to the last value beyond the grid.

The discrete convolution truncates the history after N steps; N is chosen
so that the dropped analytic tail mass stays below a user tolerance, which
makes the truncation error an explicit, controlled quantity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AdmissibilityError,
    ConfigurationError,
    NonIntegrableKernelError,
    ResourceLimitError,
)

EXPONENTIAL = "exponential"
POLYNOMIAL = "polynomial"
TABULATED = "tabulated"

#: Default cap on the truncation depth before we refuse to allocate.
DEFAULT_DEPTH_CAP = 10_000_000

#: Relative slack allowed when checking that tabulated samples are nonincreasing.
MONOTONE_RTOL = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """One relaxation kernel: analytic family plus parameters.

    ``index`` records which memory term it drives: 1 for the transverse
    displacement equation, 2 for the rotation/slip equation.  Instances are
    immutable and safe to share across threads.
    """

    family: str
    index: int = 1
    d: float = 1.0
    alpha: float = 1.0
    q: float = 2.0
    samples: tuple[float, ...] = field(default=())
    sample_ds: float = 0.0

    def __post_init__(self):
        if self.family not in (EXPONENTIAL, POLYNOMIAL, TABULATED):
            raise ConfigurationError(f"unknown kernel family {self.family!r}")
        if self.index not in (1, 2):
            raise ConfigurationError("kernel index must be 1 or 2")
        if self.family == EXPONENTIAL:
            if self.d < 0:
                raise AdmissibilityError("exponential kernel needs amplitude d >= 0")
            if self.alpha <= 0:
                raise AdmissibilityError("exponential kernel needs rate alpha > 0")
        elif self.family == POLYNOMIAL:
            if self.d < 0:
                raise AdmissibilityError("polynomial kernel needs amplitude d >= 0")
            if self.q <= 1:
                raise NonIntegrableKernelError(
                    "polynomial kernel with exponent q <= 1 is not integrable on "
                    f"[0, inf); got q = {self.q}"
                )
        else:
            if len(self.samples) == 0:
                raise ConfigurationError("tabulated kernel needs at least one sample")
            if self.sample_ds <= 0:
                raise ConfigurationError("tabulated kernel needs a positive grid spacing")
            arr = np.asarray(self.samples, dtype=float)
            if np.any(arr < 0):
                raise AdmissibilityError("tabulated kernel samples must be nonnegative")
            if arr.size > 1:
                scale = float(arr.max())
                if np.any(np.diff(arr) > MONOTONE_RTOL * max(scale, 1.0)):
                    raise AdmissibilityError(
                        "tabulated kernel samples must be nonincreasing "
                        f"(relative tolerance {MONOTONE_RTOL:g})"
                    )

    @classmethod
    def exponential(cls, d: float, alpha: float, index: int = 1) -> "KernelSpec":
        return cls(family=EXPONENTIAL, index=index, d=d, alpha=alpha)

    @classmethod
    def polynomial(cls, d: float, q: float, index: int = 1) -> "KernelSpec":
        return cls(family=POLYNOMIAL, index=index, d=d, q=q)

    @classmethod
    def tabulated(cls, samples, ds: float, index: int = 1) -> "KernelSpec":
        return cls(family=TABULATED, index=index,
                   samples=tuple(float(v) for v in samples), sample_ds=float(ds))

    @classmethod
    def zero(cls, index: int = 1) -> "KernelSpec":
        """Identically vanishing kernel (memory-free channel)."""
        return cls(family=EXPONENTIAL, index=index, d=0.0, alpha=1.0)

    @property
    def is_zero(self) -> bool:
        return self.family == EXPONENTIAL and self.d == 0.0


def eval_kernel(spec: KernelSpec, s) -> np.ndarray | float:
    """Evaluate g(s) for scalar or array nonnegative s."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ConfigurationError("relaxation kernels are defined for s >= 0 only")
    if spec.family == EXPONENTIAL:
        out = spec.d * np.exp(-spec.alpha * s_arr)
    elif spec.family == POLYNOMIAL:
        out = spec.d * (1.0 + s_arr) ** (-spec.q)
    else:
        grid = np.arange(len(spec.samples)) * spec.sample_ds
        # clamp-to-last beyond the grid; np.interp does exactly that
        out = np.interp(s_arr, grid, np.asarray(spec.samples))
    if np.isscalar(s) or s_arr.ndim == 0:
        return float(out)
    return out


def total_mass(spec: KernelSpec) -> float:
    """Total kernel mass g_total = integral of g over [0, inf).

    Closed form for the analytic families.  Tabulated kernels get the
    trapezoid sum over their grid; the (clamped) tail beyond the last sample
    is dropped, which underestimates the mass -- a warning records that.
    """
    if spec.family == EXPONENTIAL:
        return spec.d / spec.alpha
    if spec.family == POLYNOMIAL:
        # q > 1 enforced at construction
        return spec.d / (spec.q - 1.0)
    arr = np.asarray(spec.samples)
    if arr.size == 1:
        mass = 0.0
    else:
        mass = float(np.trapz(arr, dx=spec.sample_ds))
    if arr[-1] > 0:
        warnings.warn(
            "tabulated kernel mass drops the tail beyond the sample grid "
            f"(last sample {arr[-1]:g} > 0)",
            stacklevel=2,
        )
    return mass


def truncation_depth(spec: KernelSpec, dt: float, tail_tol: float,
                     depth_cap: int = DEFAULT_DEPTH_CAP) -> int:
    """Smallest N with analytic tail mass over [N*dt, inf) <= tail_tol * total mass."""
    if dt <= 0:
        raise ConfigurationError("time step must be positive")
    if not 0 < tail_tol < 1:
        raise ConfigurationError("tail tolerance must lie in (0, 1)")
    if spec.is_zero:
        return 1
    if spec.family == EXPONENTIAL:
        # tail(T) = (d/alpha) e^{-alpha T}  =>  e^{-alpha N dt} <= tail_tol
        n = math.ceil(-math.log(tail_tol) / (spec.alpha * dt))
    elif spec.family == POLYNOMIAL:
        # tail(T) = d (1+T)^{1-q} / (q-1)  =>  (1 + N dt)^{1-q} <= tail_tol
        n = math.ceil((tail_tol ** (-1.0 / (spec.q - 1.0)) - 1.0) / dt)
    else:
        # no analytic tail: keep whatever the grid covers
        n = max(1, math.floor(spec.sample_ds * (len(spec.samples) - 1) / dt))
    n = max(1, n)
    if n > depth_cap:
        raise ResourceLimitError(
            f"kernel truncation needs N = {n} history steps, above the cap "
            f"{depth_cap}; loosen tail_tol or enlarge the cap"
        )
    return n


@dataclass(frozen=True)
class KernelWeights:
    """Sampled kernel values driving the discrete convolution.

    ``g[j]`` is g(j*dt) for j = 0..N; ``g_half[j-1]`` is the midpoint value
    (g[j-1] + g[j]) / 2 for j = 1..N.  ``g0_truncated`` is the dt-weighted
    midpoint-rule mass of the retained window, which for the convex
    nonincreasing analytic families never exceeds the exact ``g0_total``.
    """

    dt: float
    N: int
    g: np.ndarray
    g_half: np.ndarray
    g0_total: float
    g0_truncated: float

    @property
    def scheme_mass(self) -> float:
        """dt * sum of the j = 0..N samples, the static weight the scheme sees."""
        return float(self.dt * self.g.sum())


def sample_weights(spec: KernelSpec, dt: float, tail_tol: float = 1e-8,
                   depth: int | None = None,
                   depth_cap: int = DEFAULT_DEPTH_CAP) -> KernelWeights:
    """Sample a kernel on the integrator's grid and fix the truncation depth.

    ``depth`` overrides the tail-mass criterion with an explicit N (used by
    verification runs that pin the history length).
    """
    if depth is not None:
        if depth < 1:
            raise ConfigurationError("explicit memory depth must be >= 1")
        if depth > depth_cap:
            raise ResourceLimitError(
                f"requested memory depth {depth} exceeds the cap {depth_cap}")
        n = int(depth)
        if dt <= 0:
            raise ConfigurationError("time step must be positive")
    else:
        n = truncation_depth(spec, dt, tail_tol, depth_cap)
    s_nodes = np.arange(n + 1) * dt
    g = np.asarray(eval_kernel(spec, s_nodes), dtype=float)
    g_half = 0.5 * (g[:-1] + g[1:])
    mid = np.asarray(eval_kernel(spec, (np.arange(n) + 0.5) * dt), dtype=float)
    return KernelWeights(
        dt=dt,
        N=n,
        g=g,
        g_half=g_half,
        g0_total=total_mass(spec) if spec.family != TABULATED else _quiet_mass(spec),
        g0_truncated=float(dt * mid.sum()),
    )


def _quiet_mass(spec: KernelSpec) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return total_mass(spec)


@dataclass(frozen=True)
class KernelAdmissibility:
    """Kernel-local hypothesis checks for one relaxation function.

    ``decay_lower_bound_beta`` is the constant beta with -beta*g <= g'
    (kernels may not decay faster than some exponential rate).
    ``exponential_bound_holds`` says whether g' <= -alpha*g holds with a
    positive alpha (the exponential-decay branch of the rate theory);
    ``integral_bound_holds`` whether the convex-function criterion covers the
    kernel instead, with ``min_convexity_exponent`` the infimum of admissible
    convexity exponents r (polynomial family: r > (q+1)/(q-1)).
    """

    index: int
    family: str
    nonincreasing: bool
    total: float
    decay_lower_bound_beta: float | None
    exponential_bound_holds: bool
    exponential_rate: float | None
    integral_bound_holds: bool
    min_convexity_exponent: float | None
    certified: bool


@dataclass(frozen=True)
class AdmissibilityReport:
    kernel1: KernelAdmissibility
    kernel2: KernelAdmissibility
    b_margin: float
    admissible: bool


def _check_kernel(spec: KernelSpec) -> KernelAdmissibility:
    tot = _quiet_mass(spec)
    if spec.family == EXPONENTIAL:
        # g' = -alpha g exactly: both bounds hold with beta = alpha
        return KernelAdmissibility(
            index=spec.index, family=spec.family, nonincreasing=True, total=tot,
            decay_lower_bound_beta=spec.alpha,
            exponential_bound_holds=True, exponential_rate=spec.alpha,
            integral_bound_holds=True, min_convexity_exponent=None,
            certified=True,
        )
    if spec.family == POLYNOMIAL:
        # -g'/g = q/(1+s) <= q, so beta = q; no positive alpha gives
        # g' <= -alpha g for all s, but the convex criterion holds with
        # G(s) = s**r for every r > (q+1)/(q-1)
        return KernelAdmissibility(
            index=spec.index, family=spec.family, nonincreasing=True, total=tot,
            decay_lower_bound_beta=spec.q,
            exponential_bound_holds=False, exponential_rate=None,
            integral_bound_holds=True,
            min_convexity_exponent=(spec.q + 1.0) / (spec.q - 1.0),
            certified=True,
        )
    arr = np.asarray(spec.samples)
    noninc = bool(arr.size < 2 or np.all(np.diff(arr) <= MONOTONE_RTOL * max(arr.max(), 1.0)))
    beta = None
    if arr.size > 1 and np.all(arr > 0):
        ratios = -np.diff(arr) / (arr[:-1] * spec.sample_ds)
        beta = float(ratios.max())
    return KernelAdmissibility(
        index=spec.index, family=spec.family, nonincreasing=noninc, total=tot,
        decay_lower_bound_beta=beta,
        exponential_bound_holds=False, exponential_rate=None,
        integral_bound_holds=False, min_convexity_exponent=None,
        certified=False,
    )


def check_h1_h2(spec1: KernelSpec, spec2: KernelSpec, params) -> AdmissibilityReport:
    """Check the kernel-side admissibility hypotheses and b > g2_total.

    The positivity of the transformed flexural stiffness b - g2_total is a
    hard requirement (the rotation equation loses ellipticity without it), so
    its violation raises.  Geometry-coupled coercivity is checked separately
    by the spatial assembly (see ``check_coercivity``).
    """
    if spec1.index == spec2.index:
        raise ConfigurationError("the two kernels must carry distinct indices 1 and 2")
    first, second = (spec1, spec2) if spec1.index == 1 else (spec2, spec1)
    rep1 = _check_kernel(first)
    rep2 = _check_kernel(second)
    b_margin = params.b - rep2.total
    if b_margin <= 0:
        raise AdmissibilityError(
            "inadmissible parameters: the transformed flexural stiffness must be "
            f"positive, i.e. b - g2_total > 0, but b = {params.b:g} and "
            f"g2_total = {rep2.total:g}"
        )
    admissible = rep1.nonincreasing and rep2.nonincreasing and b_margin > 0
    return AdmissibilityReport(kernel1=rep1, kernel2=rep2,
                               b_margin=float(b_margin), admissible=admissible)

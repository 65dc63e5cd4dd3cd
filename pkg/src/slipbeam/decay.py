"""Decay-model fitting for energy traces and the predicted envelopes.

The stability theory guarantees one-sided envelopes with unspecified
constants: exponential when both kernels obey g' <= -alpha g, algebraic
E <= c (1+t)^(-1/(r-1)) when a polynomial kernel governs, with the
admissible convexity exponents r > max (q_i + 1)/(q_i - 1) over the
polynomial kernels.  Since the constants are not computable, trace analysis
is goodness-of-fit and model comparison on transformed axes, never absolute
rate matching: ln E against t for the exponential model, ln E against
ln(1 + t) for the algebraic one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .kernels import EXPONENTIAL, POLYNOMIAL, KernelSpec

EXPONENTIAL_MODEL = "exponential"
ALGEBRAIC_MODEL = "algebraic"

#: Samples below 1e3 * eps * E(0) are floor noise and excluded from log fits.
FLOOR_FACTOR = 1e3 * np.finfo(float).eps

#: Minimum usable samples inside the fit window.
MIN_SAMPLES = 20

#: Envelope slack: every window sample must satisfy E <= 1.05 * model(t).
ENVELOPE_SLACK = 1.05

#: Default window start as a fraction of the trace length.
WINDOW_FRACTION = 0.5


@dataclass(frozen=True)
class DecayFit:
    model: str
    rate: float              # c1 for the exponential model, exponent p otherwise
    amplitude: float         # c2
    window: tuple[float, float]
    goodness: float          # R^2 on the transformed axes
    envelope_ok: bool
    degenerate: bool = False
    note: str = ""


def _window_samples(times, energies, window):
    t = np.asarray(times, dtype=float)
    e = np.asarray(energies, dtype=float)
    if t.shape != e.shape or t.ndim != 1:
        raise InsufficientDataError("trace must be two equal-length 1-d arrays")
    if window is None:
        t_hi = t[-1] if len(t) else 0.0
        window = (WINDOW_FRACTION * t_hi, t_hi)
    lo, hi = window
    mask = (t >= lo) & (t <= hi)
    floor = FLOOR_FACTOR * (e[0] if len(e) and e[0] > 0 else 1.0)
    positive = mask & (e > floor)
    note = ""
    if np.any(mask & ~positive):
        # keep the positive prefix only; the floor corrupts log fits
        first_bad = np.argmax(mask & ~positive)
        positive &= np.arange(len(t)) < first_bad
        note = "energy reached the floating-point floor; fit on the positive prefix"
    if positive.sum() < MIN_SAMPLES:
        raise InsufficientDataError(
            f"only {int(positive.sum())} usable samples in the fit window "
            f"[{lo:g}, {hi:g}]; need at least {MIN_SAMPLES}")
    return t[positive], e[positive], (float(lo), float(hi)), note


def _linear_fit(x, y):
    """Least squares y ~ a + b x; returns (a, b, r_squared, degenerate)."""
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    sst = float(((y - ym) ** 2).sum())
    if sxx == 0.0:
        raise InsufficientDataError("degenerate fit window: no spread in abscissa")
    b = float(((x - xm) * (y - ym)).sum()) / sxx
    a = ym - b * xm
    if sst == 0.0:
        # perfectly constant data: the model is exact with zero rate
        return a, b, 1.0, True
    ssr = float(((y - (a + b * x)) ** 2).sum())
    return a, b, 1.0 - ssr / sst, False


def fit_exponential(times, energies, window=None) -> DecayFit:
    """Fit E(t) ~ c2 exp(-c1 t) by least squares of ln E against t."""
    t, e, win, note = _window_samples(times, energies, window)
    a, b, r2, degen = _linear_fit(t, np.log(e))
    c1, c2 = -b, float(np.exp(a))
    env = bool(np.all(e <= ENVELOPE_SLACK * c2 * np.exp(-c1 * t)))
    return DecayFit(model=EXPONENTIAL_MODEL, rate=float(c1), amplitude=c2,
                    window=win, goodness=float(r2), envelope_ok=env,
                    degenerate=degen, note=note)


def fit_algebraic(times, energies, window=None) -> DecayFit:
    """Fit E(t) ~ c2 (1 + t)^(-p) by least squares of ln E against ln(1 + t)."""
    t, e, win, note = _window_samples(times, energies, window)
    a, b, r2, degen = _linear_fit(np.log1p(t), np.log(e))
    p, c2 = -b, float(np.exp(a))
    env = bool(np.all(e <= ENVELOPE_SLACK * c2 * (1.0 + t) ** (-p)))
    return DecayFit(model=ALGEBRAIC_MODEL, rate=float(p), amplitude=c2,
                    window=win, goodness=float(r2), envelope_ok=env,
                    degenerate=degen, note=note)


@dataclass(frozen=True)
class EnvelopeDescriptor:
    """Qualitative decay class predicted from the kernel pair.

    For an algebraic envelope, ``exponent_bound`` is the strict upper bound
    1/(r_inf - 1) on the guaranteed exponent, r_inf the infimum of admissible
    convexity exponents; fitted exponents are compared as p >= bound - slack.
    The weaker kernel governs mixed pairs.
    """

    kind: str                      # "exponential" | "algebraic" | "unknown"
    exponent_bound: float | None
    governed_by: int | None        # kernel index setting the rate class
    note: str = ""


def predicted_envelope(spec1: KernelSpec, spec2: KernelSpec) -> EnvelopeDescriptor:
    specs = [s for s in (spec1, spec2) if not s.is_zero]
    if not specs:
        return EnvelopeDescriptor(kind="unknown", exponent_bound=None,
                                  governed_by=None,
                                  note="no active kernels: rate set by friction alone")
    if any(s.family not in (EXPONENTIAL, POLYNOMIAL) for s in specs):
        return EnvelopeDescriptor(kind="unknown", exponent_bound=None,
                                  governed_by=None,
                                  note="tabulated kernels carry no certified envelope")
    poly = [s for s in specs if s.family == POLYNOMIAL]
    if not poly:
        return EnvelopeDescriptor(kind=EXPONENTIAL_MODEL, exponent_bound=None,
                                  governed_by=None)
    r_inf = max((s.q + 1.0) / (s.q - 1.0) for s in poly)
    governed = max(poly, key=lambda s: (s.q + 1.0) / (s.q - 1.0)).index
    return EnvelopeDescriptor(kind=ALGEBRAIC_MODEL,
                              exponent_bound=1.0 / (r_inf - 1.0),
                              governed_by=governed)

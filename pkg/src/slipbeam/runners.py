"""Run orchestration: single runs, verification, convergence studies, sweeps.

All CSV output is written with 17 significant digits so values round-trip
exactly; identical configs produce byte-identical files.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline

from . import decay
from .assembly import assemble_blocks, assemble_difference_ops, build_mesh
from .config import RunConfig, build_initial_data, history_fn_for
from .energy import (CONVENTIONS, IDENTITY_TOL_FACTOR, EnergyBreakdown,
                     decrement_check, energy_sample)
from .errors import (ConfigurationError, DivergenceError,
                     IdentityViolationError, SimulationError)
from .kernels import sample_weights, truncation_depth
from .newmark import effective_matrix, run as run_steps, init_state

#: Abort when the energy exceeds this multiple of its initial value.
GROWTH_LIMIT = 10.0


def fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else fmt(c) for c in row])


@dataclass
class BuiltModel:
    mesh: object
    blocks: object
    integrator: object
    initial: object
    history_fn: object


def build_model(cfg: RunConfig, J=None, dt=None, steps=None,
                kernel1=None, kernel2=None) -> BuiltModel:
    """Materialize mesh, operators, weights and initial data for one run."""
    J = cfg.J if J is None else J
    dt = cfg.dt if dt is None else dt
    steps = cfg.steps if steps is None else steps
    k1 = cfg.kernel1 if kernel1 is None else kernel1
    k2 = cfg.kernel2 if kernel2 is None else kernel2
    mesh = build_mesh(J, cfg.L)
    ops = assemble_difference_ops(mesh)
    if cfg.depth is not None:
        n = cfg.depth
    else:
        # both channels share one buffer depth: take the larger requirement
        n = max(truncation_depth(k1, dt, cfg.tail_tol, cfg.depth_cap),
                truncation_depth(k2, dt, cfg.tail_tol, cfg.depth_cap))
    w1 = sample_weights(k1, dt, cfg.tail_tol, depth=n, depth_cap=cfg.depth_cap)
    w2 = sample_weights(k2, dt, cfg.tail_tol, depth=n, depth_cap=cfg.depth_cap)
    blocks = assemble_blocks(ops, cfg.material, w1, w2)
    integrator = type(cfg.integrator)(dt=dt, steps=steps, beta=cfg.beta,
                                      varsigma=cfg.varsigma)
    initial = build_initial_data(cfg, mesh)
    return BuiltModel(mesh=mesh, blocks=blocks, integrator=integrator,
                      initial=initial,
                      history_fn=history_fn_for(cfg, mesh, initial))


@dataclass
class SimulationResult:
    label: str
    steps: np.ndarray
    times: np.ndarray
    energies: np.ndarray
    final_breakdown: EnergyBreakdown
    energy_csv: str
    state_csv: str
    decrement_csv: str | None = None
    closure: dict | None = None
    max_energy_increase: float = 0.0
    max_ledger_entry: float = float("-inf")
    max_mismatch: float = 0.0


def _final_state_rows(model: BuiltModel, state):
    """All-node field values; the clamped/ghost boundary values made explicit."""
    blocks = model.blocks
    phi, psi, v = state.fields(blocks)
    dphi, dpsi, dv = blocks.split(state.vel)

    def pad(interior, left, right):
        return np.concatenate([[left], interior, [right]])

    cols = [
        model.mesh.nodes,
        pad(phi, 0.0, 0.0), pad(psi, 0.0, psi[-1]), pad(v, 0.0, v[-1]),
        pad(dphi, 0.0, 0.0), pad(dpsi, 0.0, dpsi[-1]), pad(dv, 0.0, dv[-1]),
    ]
    return list(zip(*cols))


def run_simulate(cfg: RunConfig, outdir: str, stride: int | None = None) -> SimulationResult:
    """Simulate (or verify, when cfg.mode == 'verify') and emit CSV artifacts.

    Verification mode samples the energy at every step, audits the decrement
    identity under both boundary-term conventions, and fails (identity
    violation) when the active convention does not close.
    """
    os.makedirs(outdir, exist_ok=True)
    model = build_model(cfg)
    blocks, integ = model.blocks, model.integrator
    verify = cfg.mode == "verify"
    stride = 1 if verify else (cfg.stride if stride is None else stride)

    state = init_state(blocks, integ, model.initial, model.history_fn)
    solver = effective_matrix(blocks, integ)

    conv = cfg.exponent_convention
    energy_rows = []
    trace_energies = []
    trace_steps = []
    trace_times = []
    result = SimulationResult(label=cfg.label, steps=None, times=None,
                              energies=None, final_breakdown=None,
                              energy_csv=os.path.join(outdir, "energy.csv"),
                              state_csv=os.path.join(outdir, "final_state.csv"))

    e0 = None
    prev_samples = {}
    ledger_rows = []
    max_mismatch = {c: 0.0 for c in CONVENTIONS}

    def energy_observer(step_index, time, st):
        nonlocal e0
        sample = energy_sample(st, blocks, conv, cfg.include_phi_flexural)
        br = sample.breakdown
        if e0 is None:
            e0 = br.total
        elif e0 > 0 and br.total > GROWTH_LIMIT * e0:
            raise DivergenceError(
                f"energy grew to {br.total:.3e} > {GROWTH_LIMIT:g} x E0 = "
                f"{GROWTH_LIMIT * e0:.3e} at step {step_index}")
        trace_steps.append(step_index)
        trace_times.append(time)
        trace_energies.append(br.total)
        energy_rows.append((step_index, time) + tuple(
            getattr(br, name) for name in EnergyBreakdown.field_names()))
        result.final_breakdown = br
        return True

    def verify_observer(step_index, time, st):
        samples = {c: energy_sample(st, blocks, c, cfg.include_phi_flexural)
                   for c in CONVENTIONS}
        if prev_samples:
            ledgers = {c: decrement_check(prev_samples[c], samples[c], blocks)
                       for c in CONVENTIONS}
            led = ledgers[conv]
            other = ledgers[[c for c in CONVENTIONS if c != conv][0]]
            for c in CONVENTIONS:
                max_mismatch[c] = max(max_mismatch[c], abs(ledgers[c].mismatch))
            result.max_energy_increase = max(result.max_energy_increase,
                                             led.observed_decrement)
            result.max_ledger_entry = max(result.max_ledger_entry,
                                          max(led.entries().values()))
            ledger_rows.append((
                led.step_index, led.time, led.observed_decrement,
                led.predicted_decrement, led.mismatch, led.damping_loss,
                led.fresh_slot1, led.fresh_slot2, led.kernel_smoothing1,
                led.kernel_smoothing2, led.tail_drop1, led.tail_drop2,
                other.predicted_decrement, other.mismatch,
            ))
            prev_samples.update(samples)
            tol = IDENTITY_TOL_FACTOR * max(1.0, e0 if e0 else 1.0)
            if abs(led.mismatch) > tol:
                raise IdentityViolationError(
                    f"energy decrement identity violated at step {led.step_index}: "
                    f"|observed - predicted| = {abs(led.mismatch):.3e} > {tol:.3e} "
                    f"under the {conv} convention")
        else:
            prev_samples.update(samples)
        return True

    observers = [energy_observer] + ([verify_observer] if verify else [])
    try:
        run_steps(state, blocks, integ, solver, observers=observers, stride=stride)
    finally:
        # artifacts are flushed even on failure: partial traces stay useful
        _write_csv(result.energy_csv,
                   ["step", "time"] + EnergyBreakdown.field_names(), energy_rows)
        _write_csv(result.state_csv,
                   ["x", "phi", "psi", "v", "phi_dot", "psi_dot", "v_dot"],
                   _final_state_rows(model, state))
        if verify:
            result.decrement_csv = os.path.join(outdir, "decrement.csv")
            other_name = [c for c in CONVENTIONS if c != conv][0]
            _write_csv(result.decrement_csv,
                       ["step", "time", "observed", "predicted", "mismatch",
                        "damping_loss", "fresh_slot1", "fresh_slot2",
                        "kernel_smoothing1", "kernel_smoothing2",
                        "tail_drop1", "tail_drop2",
                        f"predicted_{other_name}", f"mismatch_{other_name}"],
                       ledger_rows)
            tol = IDENTITY_TOL_FACTOR * max(1.0, e0 if e0 else 1.0)
            closure = {c: (max_mismatch[c], max_mismatch[c] <= tol)
                       for c in CONVENTIONS}
            result.closure = closure
            _write_csv(os.path.join(outdir, "closure_report.csv"),
                       ["convention", "max_abs_mismatch", "tolerance", "closes"],
                       [(c, mm, tol, str(ok)) for c, (mm, ok) in closure.items()])

    result.steps = np.asarray(trace_steps)
    result.times = np.asarray(trace_times)
    result.energies = np.asarray(trace_energies)
    return result


# -- convergence study --------------------------------------------------------

@dataclass
class ConvergeLevel:
    J: int
    h: float
    dt: float
    steps: int
    error: float = math.nan
    order: float = math.nan


@dataclass
class ConvergeResult:
    levels: list
    observed_order: float
    csv_path: str

    @property
    def in_range(self):
        return None  # set by caller against the configured range


def _padded_fields(blocks, state):
    phi, psi, v = state.fields(blocks)
    out = []
    for f, right in ((phi, 0.0), (psi, None), (v, None)):
        r = f[-1] if right is None else right
        out.append(np.concatenate([[0.0], f, [r]]))
    return out


def run_converge(cfg: RunConfig, outdir: str) -> ConvergeResult:
    """Self-convergence of the final displacement against the finest level.

    Levels run with dt proportional to h and a shared final time; coarse
    solutions are compared with the cubic-spline restriction of the finest
    one, whose interpolation error is asymptotically negligible next to the
    discretization error being measured.
    """
    os.makedirs(outdir, exist_ok=True)
    ladder = cfg.converge.ladder
    if len(ladder) < 2:
        raise ConfigurationError("convergence ladder needs at least two levels")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigurationError("convergence ladder must be strictly increasing")
    T = cfg.converge.t_final
    ratio = cfg.converge.dt_over_h

    levels = []
    solutions = []
    for J in ladder:
        h = cfg.L / (J + 1)
        steps = max(1, round(T / (ratio * h)))
        dt = T / steps
        model = build_model(cfg, J=J, dt=dt, steps=steps)
        state = init_state(model.blocks, model.integrator, model.initial,
                           model.history_fn)
        run_steps(state, model.blocks, model.integrator, observers=(),
                  stride=max(1, steps))
        levels.append(ConvergeLevel(J=J, h=h, dt=dt, steps=steps))
        solutions.append((model, state))

    fine_model, fine_state = solutions[-1]
    fine_fields = _padded_fields(fine_model.blocks, fine_state)
    splines = [CubicSpline(fine_model.mesh.nodes, f) for f in fine_fields]

    for lvl, (model, state) in zip(levels[:-1], solutions[:-1]):
        x = model.mesh.interior
        diffs = []
        for f, spl in zip(_padded_fields(model.blocks, state), splines):
            diffs.append(f[1:-1] - spl(x))
        err = math.sqrt(lvl.h * sum(float(d @ d) for d in diffs))
        lvl.error = err
    for prev, nxt in zip(levels[:-2], levels[1:-1]):
        nxt.order = math.log(prev.error / nxt.error) / math.log(prev.h / nxt.h)

    xs = np.log([lvl.h for lvl in levels[:-1]])
    ys = np.log([lvl.error for lvl in levels[:-1]])
    observed = float(np.polyfit(xs, ys, 1)[0]) if len(xs) >= 2 else math.nan

    csv_path = os.path.join(outdir, "converge.csv")
    _write_csv(csv_path, ["level", "J", "h", "dt", "steps", "error", "pairwise_order"],
               [(i, lvl.J, lvl.h, lvl.dt, lvl.steps, lvl.error, lvl.order)
                for i, lvl in enumerate(levels)])
    return ConvergeResult(levels=levels, observed_order=observed, csv_path=csv_path)


# -- kernel-comparison sweep --------------------------------------------------

@dataclass
class SweepMember:
    name: str
    exp_fit: object = None
    alg_fit: object = None
    preferred: str = ""
    envelope: object = None
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


@dataclass
class SweepResult:
    members: list
    csv_path: str

    @property
    def any_failed(self) -> bool:
        return any(m.failed for m in self.members)


def _run_member(cfg, outdir, name, k1, k2, window_fraction):
    member = SweepMember(name=name)
    try:
        sim = run_simulate_with_kernels(cfg, os.path.join(outdir, name), k1, k2)
        t_hi = sim.times[-1]
        window = (window_fraction * t_hi, t_hi)
        member.exp_fit = decay.fit_exponential(sim.times, sim.energies, window)
        member.alg_fit = decay.fit_algebraic(sim.times, sim.energies, window)
        member.preferred = (decay.EXPONENTIAL_MODEL
                            if member.exp_fit.goodness >= member.alg_fit.goodness
                            else decay.ALGEBRAIC_MODEL)
        member.envelope = decay.predicted_envelope(k1, k2)
    except SimulationError as exc:
        member.error = f"{type(exc).__name__}: {exc}"
    return member


def run_simulate_with_kernels(cfg: RunConfig, outdir: str, k1, k2) -> SimulationResult:
    sub = replace(cfg, kernel1=k1, kernel2=k2, mode="simulate")
    return run_simulate(sub, outdir)


def run_sweep(cfg: RunConfig, outdir: str) -> SweepResult:
    """Run each kernel variant on the shared mesh/data, fit both decay models.

    Members execute in parallel with no shared mutable state; each writes its
    own files, merged into one ranking report afterwards.
    """
    os.makedirs(outdir, exist_ok=True)
    if not cfg.sweep_variants:
        raise ConfigurationError("sweep needs at least one kernel variant")
    with ThreadPoolExecutor(max_workers=min(4, len(cfg.sweep_variants))) as pool:
        futures = [pool.submit(_run_member, cfg, outdir, name, k1, k2,
                               cfg.sweep_window_fraction)
                   for name, k1, k2 in cfg.sweep_variants]
        members = [f.result() for f in futures]

    rows = []
    for m in members:
        if m.failed:
            rows.append((m.name, "FAILED", m.error, "", "", "", "", ""))
            continue
        rows.append((
            m.name, m.envelope.kind,
            m.exp_fit.rate, m.exp_fit.goodness,
            m.alg_fit.rate, m.alg_fit.goodness,
            m.preferred,
            str(m.exp_fit.envelope_ok if m.preferred == decay.EXPONENTIAL_MODEL
                else m.alg_fit.envelope_ok),
        ))
    csv_path = os.path.join(outdir, "sweep_report.csv")
    _write_csv(csv_path,
               ["variant", "predicted_envelope", "exp_rate", "exp_goodness",
                "alg_exponent", "alg_goodness", "preferred", "envelope_ok"],
               rows)
    return SweepResult(members=members, csv_path=csv_path)

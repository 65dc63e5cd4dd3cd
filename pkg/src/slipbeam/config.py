"""Run configuration: sectioned key-value files, validation, eager checks.

Configs are INI-style text with explicit units per key (lengths in beam
units, times in the natural time unit of the system, stiffnesses per the
equations of motion).  No positional data: sweeps need diffable configs.

``parse_config`` fully validates the file and runs every admissibility
check eagerly -- kernel hypotheses, b - g2_total > 0, and the numerical
coercivity margin -- so failures surface before any stepping.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

import numpy as np

from . import assembly, kernels, profiles
from .assembly import MaterialParams
from .errors import AdmissibilityError, ConfigurationError
from .kernels import KernelSpec
from .newmark import InitialData, IntegratorConfig

MODES = ("simulate", "verify", "converge", "sweep")

DEFAULTS = {
    "beta": 0.25,
    "varsigma": 0.5,
    "tail_tol": 1e-8,
    "exponent_convention": "as_printed",
}


@dataclass(frozen=True)
class KernelSection:
    family: str = "zero"
    d: float = 1.0
    alpha: float = 1.0
    q: float = 2.0
    samples_file: str = ""
    sample_ds: float = 0.0

    def to_spec(self, index: int, base_dir: str) -> KernelSpec:
        if self.family == "zero":
            return KernelSpec.zero(index)
        if self.family == "exponential":
            return KernelSpec.exponential(self.d, self.alpha, index)
        if self.family == "polynomial":
            return KernelSpec.polynomial(self.d, self.q, index)
        if self.family == "tabulated":
            path = os.path.join(base_dir, self.samples_file)
            if not os.path.isfile(path):
                raise ConfigurationError(f"kernel sample file not found: {path}")
            data = np.loadtxt(path, delimiter=",", ndmin=2)
            if data.shape[1] < 2:
                raise ConfigurationError(
                    "kernel sample file needs two columns: s, g(s)")
            s, g = data[:, 0], data[:, 1]
            ds = s[1] - s[0] if len(s) > 1 else self.sample_ds
            if len(s) > 1 and not np.allclose(np.diff(s), ds, rtol=1e-10):
                raise ConfigurationError("kernel sample grid must be uniform")
            return KernelSpec.tabulated(g, float(ds), index)
        raise ConfigurationError(f"unknown kernel family {self.family!r}")


@dataclass(frozen=True)
class InitialSection:
    profile: str = "sine"
    params: dict = field(default_factory=dict)
    nodes_file: str = ""


@dataclass(frozen=True)
class ConvergeSection:
    ladder: tuple[int, ...] = (25, 50, 100, 200)
    dt_over_h: float = 0.5
    t_final: float = 2.0
    order_min: float = 1.7
    order_max: float = 2.3


@dataclass(frozen=True)
class RunConfig:
    """Fully validated settings for one run (or study) of the simulator."""

    mode: str
    label: str
    J: int
    L: float
    material: MaterialParams
    kernel1: KernelSpec
    kernel2: KernelSpec
    dt: float
    steps: int
    beta: float
    varsigma: float
    tail_tol: float
    depth: int | None
    depth_cap: int
    initial: InitialSection
    history_kind: str
    history_rate: float
    exponent_convention: str
    include_phi_flexural: bool
    stride: int
    converge: ConvergeSection
    sweep_variants: tuple = ()
    sweep_window_fraction: float = 0.5
    base_dir: str = "."

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(dt=self.dt, steps=self.steps,
                                beta=self.beta, varsigma=self.varsigma)


class _Section:
    """Typed access into one config section with located error messages."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.raw = dict(parser[name]) if parser.has_section(name) else {}

    def get(self, key, cast, default=None, required=False):
        if key not in self.raw:
            if required:
                raise ConfigurationError(f"[{self.name}] is missing the key {key!r}")
            return default
        text = self.raw.pop(key)
        try:
            if cast is bool:
                low = text.strip().lower()
                if low not in ("true", "false", "yes", "no", "1", "0"):
                    raise ValueError(text)
                return low in ("true", "yes", "1")
            return cast(text)
        except ValueError as exc:
            raise ConfigurationError(
                f"[{self.name}] {key} = {text!r} is not a valid {cast.__name__}"
            ) from exc

    def reject_unknown(self):
        if self.raw:
            key = next(iter(self.raw))
            raise ConfigurationError(f"[{self.name}] has an unknown key {key!r}")


def _parse_kernel(parser, name) -> KernelSection:
    sec = _Section(parser, name)
    ks = KernelSection(
        family=sec.get("family", str, "zero"),
        d=sec.get("d", float, 1.0),
        alpha=sec.get("alpha", float, 1.0),
        q=sec.get("q", float, 2.0),
        samples_file=sec.get("samples_file", str, ""),
        sample_ds=sec.get("sample_ds", float, 0.0),
    )
    sec.reject_unknown()
    return ks


_INITIAL_KEYS = ("amp_phi0", "amp_phi1", "amp_u0", "amp_u1", "amp_v0", "amp_v1")
_MODE_KEYS = ("mode_phi0", "mode_phi1", "mode_u0", "mode_u1", "mode_v0", "mode_v1")


def parse_config(path: str) -> RunConfig:
    """Read and validate a config file; run all admissibility checks eagerly."""
    if not os.path.isfile(path):
        raise ConfigurationError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))

    run = _Section(parser, "run")
    mode = run.get("mode", str, "simulate")
    if mode not in MODES:
        raise ConfigurationError(f"[run] mode must be one of {MODES}, got {mode!r}")
    label = run.get("label", str, os.path.splitext(os.path.basename(path))[0])
    run.reject_unknown()

    mesh_sec = _Section(parser, "mesh")
    J = mesh_sec.get("j", int, required=True)
    L = mesh_sec.get("l", float, 1.0)
    mesh_sec.reject_unknown()

    mat = _Section(parser, "material")
    material = MaterialParams(
        rho1=mat.get("rho1", float, 1.0),
        rho2=mat.get("rho2", float, 1.0),
        k=mat.get("k", float, 1.0),
        b=mat.get("b", float, 1.0),
        delta=mat.get("delta", float, 0.0),
        gamma=mat.get("gamma", float, 0.0),
        b_tilde=mat.get("b_tilde", float, None),
    )
    mat.reject_unknown()

    k1 = _parse_kernel(parser, "kernel1").to_spec(1, base_dir)
    k2 = _parse_kernel(parser, "kernel2").to_spec(2, base_dir)

    integ = _Section(parser, "integrator")
    dt = integ.get("dt", float, required=True)
    steps = integ.get("steps", int, required=True)
    beta = integ.get("beta", float, DEFAULTS["beta"])
    varsigma = integ.get("varsigma", float, DEFAULTS["varsigma"])
    integ.reject_unknown()
    if dt <= 0 or steps < 0:
        raise ConfigurationError("[integrator] needs dt > 0 and steps >= 0")

    mem = _Section(parser, "memory")
    tail_tol = mem.get("tail_tol", float, DEFAULTS["tail_tol"])
    depth = mem.get("depth", int, None)
    depth_cap = mem.get("depth_cap", int, kernels.DEFAULT_DEPTH_CAP)
    mem.reject_unknown()

    init_sec = _Section(parser, "initial")
    profile = init_sec.get("profile", str, "sine")
    if profile not in ("sine", "bump", "zero", "tabulated"):
        raise ConfigurationError(f"[initial] unknown profile {profile!r}")
    params: dict = {}
    for key in _INITIAL_KEYS:
        val = init_sec.get(key, float, None)
        if val is not None:
            params[key] = val
    for key in _MODE_KEYS:
        val = init_sec.get(key, int, None)
        if val is not None:
            params[key] = val
    nodes_file = init_sec.get("nodes_file", str, "")
    if profile == "tabulated":
        if not nodes_file:
            raise ConfigurationError("[initial] tabulated profile needs nodes_file")
        if not os.path.isfile(os.path.join(base_dir, nodes_file)):
            raise ConfigurationError(
                f"[initial] nodes_file not found: {os.path.join(base_dir, nodes_file)}")
    init_sec.reject_unknown()
    initial = InitialSection(profile=profile, params=params, nodes_file=nodes_file)

    hist = _Section(parser, "history")
    history_kind = hist.get("kind", str, "constant")
    history_rate = hist.get("rate", float, 0.0)
    hist.reject_unknown()
    profiles.history_envelope(history_kind, history_rate)  # validates the kind

    en = _Section(parser, "energy")
    convention = en.get("exponent_convention", str, DEFAULTS["exponent_convention"])
    if convention not in ("as_printed", "dimensional"):
        raise ConfigurationError(
            "[energy] exponent_convention must be as_printed or dimensional")
    include_flex = en.get("include_phi_flexural", bool, False)
    en.reject_unknown()

    out = _Section(parser, "output")
    stride = out.get("stride", int, 1)
    out.reject_unknown()
    if stride < 1:
        raise ConfigurationError("[output] stride must be >= 1")
    if mode == "verify":
        stride = 1  # the decrement audit needs adjacent steps

    conv_sec = _Section(parser, "converge")
    ladder_text = conv_sec.get("ladder", str, "25, 50, 100, 200")
    try:
        ladder = tuple(int(tok) for tok in ladder_text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigurationError(f"[converge] bad ladder {ladder_text!r}") from exc
    converge = ConvergeSection(
        ladder=ladder,
        dt_over_h=conv_sec.get("dt_over_h", float, 0.5),
        t_final=conv_sec.get("t_final", float, 2.0),
        order_min=conv_sec.get("order_min", float, 1.7),
        order_max=conv_sec.get("order_max", float, 2.3),
    )
    conv_sec.reject_unknown()

    sweep_sec = _Section(parser, "sweep")
    variants_text = sweep_sec.get("variants", str, "")
    window_fraction = sweep_sec.get("window_fraction", float, 0.5)
    sweep_sec.reject_unknown()
    variants = []
    for name in (tok.strip() for tok in variants_text.split(",") if tok.strip()):
        vsec = f"variant:{name}"
        if not parser.has_section(vsec):
            raise ConfigurationError(f"sweep variant {name!r} has no [{vsec}] section")
        vs = _Section(parser, vsec)
        vk1 = KernelSection(
            family=vs.get("kernel1_family", str, "zero"),
            d=vs.get("kernel1_d", float, 1.0),
            alpha=vs.get("kernel1_alpha", float, 1.0),
            q=vs.get("kernel1_q", float, 2.0),
        ).to_spec(1, base_dir)
        vk2 = KernelSection(
            family=vs.get("kernel2_family", str, "zero"),
            d=vs.get("kernel2_d", float, 1.0),
            alpha=vs.get("kernel2_alpha", float, 1.0),
            q=vs.get("kernel2_q", float, 2.0),
        ).to_spec(2, base_dir)
        vs.reject_unknown()
        variants.append((name, vk1, vk2))
    if mode == "sweep" and not variants:
        raise ConfigurationError("[sweep] needs a nonempty variants list")

    cfg = RunConfig(
        mode=mode, label=label, J=J, L=L, material=material,
        kernel1=k1, kernel2=k2, dt=dt, steps=steps, beta=beta,
        varsigma=varsigma, tail_tol=tail_tol, depth=depth, depth_cap=depth_cap,
        initial=initial, history_kind=history_kind, history_rate=history_rate,
        exponent_convention=convention, include_phi_flexural=include_flex,
        stride=stride, converge=converge, sweep_variants=tuple(variants),
        sweep_window_fraction=window_fraction, base_dir=base_dir,
    )
    check_admissibility(cfg)
    return cfg


def check_admissibility(cfg: RunConfig):
    """Kernel hypotheses, b - g2_total > 0, and the coercivity margin."""
    report = kernels.check_h1_h2(cfg.kernel1, cfg.kernel2, cfg.material)
    mesh = assembly.build_mesh(cfg.J, cfg.L)
    ops = assembly.assemble_difference_ops(mesh)
    coercivity = assembly.check_coercivity(
        ops, cfg.material, report.kernel1.total, report.kernel2.total)
    if not coercivity.admissible:
        raise AdmissibilityError(
            "coercivity check failed: the memory-corrected elastic form has "
            f"smallest generalized eigenvalue k0 = {coercivity.k0_estimate:.6e} <= 0; "
            "the energy is not a norm for these parameters"
        )
    return report, coercivity


def build_initial_data(cfg: RunConfig, mesh) -> InitialData:
    if cfg.initial.profile == "sine":
        return profiles.sine_initial_data(mesh, **cfg.initial.params)
    if cfg.initial.profile == "bump":
        kwargs = {k: v for k, v in cfg.initial.params.items() if k.startswith("amp")}
        return profiles.bump_initial_data(mesh, **kwargs)
    if cfg.initial.profile == "zero":
        return profiles.zero_initial_data(mesh)
    path = os.path.join(cfg.base_dir, cfg.initial.nodes_file)
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape != (mesh.J + 2, 7):
        raise ConfigurationError(
            f"[initial] nodes_file must hold {mesh.J + 2} rows of "
            "x, phi0, phi1, u0, u1, v0, v1")
    return InitialData(phi0=data[:, 1], phi1=data[:, 2], u0=data[:, 3],
                       u1=data[:, 4], v0=data[:, 5], v1=data[:, 6])


def history_fn_for(cfg: RunConfig, mesh, initial: InitialData):
    if cfg.history_kind == "constant":
        return None
    env = profiles.history_envelope(cfg.history_kind, cfg.history_rate)
    return profiles.separable_history(mesh, initial, env)

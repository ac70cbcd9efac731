"""Energy-dissipation runs, stabilization scans and convergence studies."""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .diagnostics import (
    EnergyLedger,
    LedgerRow,
    Violation,
    bulk_integral,
    grad_sq,
    inner_mass,
    norm_H1,
    norm_L2,
    penalty_coefficient,
)
from .potential import DOUBLE_WELL
from .quadrature import SpectralBasis1D, build_basis
from .rng import uniform_open
from .schemes import Scheme, SchemeParams, Stepper, stability_constants_unconditional
from .snapshots import load_field, write_slices_csv, write_snapshot
from .tensor import Field, from_grid, to_grid

log = logging.getLogger(__name__)

__all__ = [
    "A_CANDIDATES",
    "B_CANDIDATES",
    "INIT_KINDS",
    "ExperimentConfig",
    "SimulationResult",
    "ScanCell",
    "ScanResult",
    "ConvergenceRow",
    "random_initial",
    "tanh_circle",
    "preset_phi1",
    "initial_field",
    "run_simulation",
    "passes_certificate",
    "scan_min_constant",
    "convergence_study",
    "write_convergence_csv",
]

A_CANDIDATES = tuple(
    [float(a) for a in range(0, 6)]
    + [float(a) for a in range(10, 51, 5)]
    + [float(a) for a in range(100, 501, 50)]
)
B_CANDIDATES = tuple([float(b) for b in range(0, 6)] + [float(b) for b in range(10, 51, 5)])

INIT_KINDS = ("random-uniform", "preset-phi1", "file", "constant", "tanh-circle")


@dataclass(frozen=True)
class ExperimentConfig:
    dim: int = 2
    M: int = 63
    eps: float = 0.075
    gamma: float = 1.0
    scheme: str = "sl-bdf2"
    tau: float = 0.01
    A: float = 0.0
    B: float = 0.0
    steps: int = 1024
    seed: int = 1
    init: str = "random-uniform"
    init_value: float = 1.0
    init_file: Optional[str] = None
    radius: float = 0.5
    bootstrap_substeps: int = 16
    bootstrap_A: Optional[float] = None
    rel_tol: float = 1e-10
    snapshot_steps: Sequence[int] = ()
    output_dir: str = "out"
    # scans
    scan_constant: str = "A"
    fixed_values: Sequence[float] = (0.0, 5.0, 10.0)
    tau_list: Sequence[float] = (10.0, 1.0, 0.1, 0.01)
    candidates: Optional[Sequence[float]] = None
    # convergence
    T: float = 1.28
    reference_tau: Optional[float] = None
    # regenerated phi_1 preset
    preset_eps: float = 0.075
    preset_gamma: float = 1.0
    preset_tau: float = 1e-3
    preset_time: float = 0.64
    cache_dir: Optional[str] = None

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> List[str]:
        """Physical-parameter invariant violations, one message each."""
        out = []
        if self.dim not in (2, 3):
            out.append(f"dim must be 2 or 3, got {self.dim}")
        if self.M < 2:
            out.append(f"M must be >= 2, got {self.M}")
        for name in ("eps", "gamma", "tau", "T", "preset_eps", "preset_gamma", "preset_tau", "preset_time"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                out.append(f"{name} must be positive, got {v!r}")
        for name in ("A", "B"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                out.append(f"{name} must be non-negative, got {v!r}")
        if self.scheme not in (Scheme.SL_BDF2.value, Scheme.SL_CN.value):
            out.append(f"scheme must be 'sl-bdf2' or 'sl-cn', got {self.scheme!r}")
        if self.steps < 1:
            out.append(f"steps must be >= 1, got {self.steps}")
        if self.init not in INIT_KINDS:
            out.append(f"init must be one of {', '.join(INIT_KINDS)}, got {self.init!r}")
        if self.init == "file" and not self.init_file:
            out.append("init 'file' needs init_file")
        if self.bootstrap_substeps < 1:
            out.append(f"bootstrap_substeps must be >= 1, got {self.bootstrap_substeps}")
        if self.bootstrap_A is not None and self.bootstrap_A < 0:
            out.append(f"bootstrap_A must be non-negative, got {self.bootstrap_A}")
        if self.scan_constant not in ("A", "B"):
            out.append(f"scan_constant must be 'A' or 'B', got {self.scan_constant!r}")
        if len(self.tau_list) == 0:
            out.append("tau_list must be non-empty")
        elif any(not (t > 0) for t in self.tau_list):
            out.append("tau_list entries must be positive")
        if len(self.fixed_values) == 0:
            out.append("fixed_values must be non-empty")
        elif any(v < 0 for v in self.fixed_values):
            out.append("fixed_values entries must be non-negative")
        if self.candidates is not None:
            if len(self.candidates) == 0:
                out.append("candidates must be non-empty")
            elif any(c < 0 for c in self.candidates):
                out.append("candidates entries must be non-negative")
        if self.reference_tau is not None and not self.reference_tau > 0:
            out.append("reference_tau must be positive")
        if self.rel_tol < 0:
            out.append("rel_tol must be non-negative")
        return out

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    @property
    def basis(self) -> SpectralBasis1D:
        return build_basis(self.M)

    def scheme_params(self, **overrides) -> SchemeParams:
        kw = dict(eps=self.eps, gamma=self.gamma, tau=self.tau, A=self.A, B=self.B, scheme=self.scheme)
        kw.update(overrides)
        return SchemeParams(**kw)


# ---------------------------------------------------------------------------
# initial data


def random_initial(dim: int, M: int, seed: int, basis: Optional[SpectralBasis1D] = None) -> Field:
    """Uniform(-1, 1) samples at the (2M)^d Gauss points, projected.

    Sample i (x fastest, then y, then z) is value i of the splitmix64 stream.
    """
    basis = basis or build_basis(M)
    Q = basis.Q
    vals = uniform_open(seed, Q**dim).reshape((Q,) * dim).T
    return from_grid(np.ascontiguousarray(vals), basis)


def tanh_circle(dim: int, M: int, eps: float, radius: float = 0.5,
                basis: Optional[SpectralBasis1D] = None) -> Field:
    """tanh((R - r) / (sqrt(2) eps)) centred at the origin (disk/ball inside)."""
    basis = basis or build_basis(M)
    x = basis.quad.nodes
    r = np.sqrt(sum(g * g for g in np.meshgrid(*([x] * dim), indexing="ij")))
    return from_grid(np.tanh((radius - r) / (math.sqrt(2.0) * eps)), basis)


@lru_cache(maxsize=8)
def _preset_phi1_cached(dim, M, seed, eps, gamma, tau, t_end, substeps) -> Field:
    basis = build_basis(M)
    phi0 = random_initial(dim, M, seed, basis)
    A, B = stability_constants_unconditional(eps, gamma, Scheme.SL_BDF2)
    params = SchemeParams(eps, gamma, tau, A, B, Scheme.SL_BDF2)
    n = _commensurate(t_end, tau, "preset_time", "preset_tau")
    stepper = Stepper(basis, params, phi0, bootstrap_substeps=substeps)
    while stepper.step_index < n:
        stepper.advance()
    out = stepper.phi
    out.flags.writeable = False
    return out


def preset_phi1(cfg: ExperimentConfig) -> Field:
    """Random data relaxed under SL-BDF2 with unconditional constants.

    Stands in for the relaxed random state used as initial value in the
    accuracy experiments. Cached in memory, and on disk under
    ``cfg.cache_dir`` when set.
    """
    key = (cfg.dim, cfg.M, cfg.seed, cfg.preset_eps, cfg.preset_gamma, cfg.preset_tau,
           cfg.preset_time, cfg.bootstrap_substeps)
    path = None
    if cfg.cache_dir:
        tag = "_".join(f"{v:g}" if isinstance(v, float) else str(v) for v in key)
        path = Path(cfg.cache_dir) / f"phi1_{tag}.pfk"
        if path.exists():
            _, phi = load_field(path, cfg.basis)
            return phi
    phi = np.array(_preset_phi1_cached(*key))
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        n = round(cfg.preset_time / cfg.preset_tau)
        write_snapshot(path, phi, cfg.basis, n, cfg.preset_time)
    return phi


def initial_field(cfg: ExperimentConfig) -> Field:
    basis = cfg.basis
    if cfg.init == "random-uniform":
        return random_initial(cfg.dim, cfg.M, cfg.seed, basis)
    if cfg.init == "constant":
        phi = np.zeros((cfg.M,) * cfg.dim)
        phi[(0,) * cfg.dim] = cfg.init_value
        return phi
    if cfg.init == "tanh-circle":
        return tanh_circle(cfg.dim, cfg.M, cfg.eps, cfg.radius, basis)
    if cfg.init == "preset-phi1":
        return preset_phi1(cfg)
    if cfg.init == "file":
        header, phi = load_field(cfg.init_file, basis)
        if header.dim != cfg.dim:
            raise ValueError(f"{cfg.init_file}: snapshot is {header.dim}-D, config is {cfg.dim}-D")
        return phi
    raise ValueError(f"unknown init {cfg.init!r}")


# ---------------------------------------------------------------------------
# single runs


@dataclass
class SimulationResult:
    final: Field
    ledger: EnergyLedger
    snapshots: Dict[int, Field] = field(default_factory=dict)
    violations: List[Violation] = field(default_factory=list)
    blowup_step: Optional[int] = None
    stopped_early: bool = False

    @property
    def certified(self) -> bool:
        return self.blowup_step is None and not self.violations


def _row(step, time, stepper_phi, prev, prevprev, grid, params, basis) -> LedgerRow:
    e = 0.5 * params.eps * grad_sq(stepper_phi, basis) + bulk_integral(grid, DOUBLE_WELL, basis) / params.eps
    d = stepper_phi - prev
    dt2 = inner_mass(d, d, basis)
    dd = d - (prev - prevprev)
    dtt2 = inner_mass(dd, dd, basis)
    e_mod = e + penalty_coefficient(params) * dt2 if step > 0 else e
    return LedgerRow(step, time, e, e_mod, math.sqrt(max(dt2, 0.0)), math.sqrt(max(dtt2, 0.0)))


def run_simulation(
    cfg: ExperimentConfig,
    *,
    phi0: Optional[Field] = None,
    stop_on_violation: bool = False,
    output_dir: Optional[str | os.PathLike] = None,
) -> SimulationResult:
    """Bootstrap phi^1, then march ``cfg.steps`` steps of the chosen scheme.

    Each step appends a ledger row and is checked against the modified-energy
    certificate (transitions from step >= 1). Non-finite values end the run
    with ``blowup_step`` set rather than raising.
    """
    basis = cfg.basis
    params = cfg.scheme_params()
    if phi0 is None:
        phi0 = initial_field(cfg)
    phi0 = np.array(phi0, dtype=float)
    snap_steps = set(int(s) for s in cfg.snapshot_steps)
    result = SimulationResult(final=phi0, ledger=EnergyLedger())

    row0 = _row(0, 0.0, phi0, phi0, phi0, to_grid(phi0, basis), params, basis)
    result.ledger.append(row0)
    abs_floor = 1e-12 * abs(row0.E_mod)
    if 0 in snap_steps:
        result.snapshots[0] = phi0.copy()

    with np.errstate(over="ignore", invalid="ignore"):
        _march(result, cfg, params, phi0, abs_floor, snap_steps, stop_on_violation)

    if output_dir is not None:
        write_run_outputs(result, cfg, output_dir)
    return result


def _march(result, cfg, params, phi0, abs_floor, snap_steps, stop_on_violation):
    basis = cfg.basis
    stepper = Stepper(
        basis, params, phi0,
        bootstrap_substeps=cfg.bootstrap_substeps, bootstrap_A=cfg.bootstrap_A,
    )
    prev, prevprev = phi0, phi0
    while True:
        n = stepper.step_index
        phi = stepper.phi
        if not np.all(np.isfinite(phi)):
            result.blowup_step = n
            log.info("blow-up at step %d", n)
            break
        row = _row(n, n * params.tau, phi, prev, prevprev, stepper.grid(), params, basis)
        last = result.ledger[-1]
        result.ledger.append(row)
        if not np.isfinite(row.E_mod):
            result.blowup_step = n
            break
        if last.step >= 1 and row.E_mod > last.E_mod * (1.0 + cfg.rel_tol) + abs_floor:
            result.violations.append(Violation(n, last.E_mod, row.E_mod))
            if stop_on_violation:
                result.stopped_early = n < cfg.steps
                break
        if n in snap_steps:
            result.snapshots[n] = phi.copy()
        if n >= cfg.steps:
            break
        prevprev, prev = prev, phi
        stepper.advance()
    result.final = stepper.phi


def write_run_outputs(result: SimulationResult, cfg: ExperimentConfig, output_dir) -> Path:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ledger.csv", "w", newline="") as fh:
        result.ledger.to_csv(fh)
    basis = cfg.basis
    for step, phi in sorted(result.snapshots.items()):
        write_snapshot(out / f"snapshot_{step:06d}.pfk", phi, basis, step, step * cfg.tau)
        write_slices_csv(out / f"snapshot_{step:06d}_slices.csv", phi, basis)
    return out


def passes_certificate(cfg: ExperimentConfig, phi0: Optional[Field] = None) -> bool:
    """Finite and modified energy non-increasing over ``cfg.steps`` steps."""
    return run_simulation(cfg, phi0=phi0, stop_on_violation=True).certified


# ---------------------------------------------------------------------------
# stabilization scans


@dataclass(frozen=True)
class ScanCell:
    tau: float
    fixed_name: str
    fixed_value: float
    min_constant: Optional[float]
    tried: tuple = ()  # (candidate, passed) in scan order


@dataclass
class ScanResult:
    scheme: str
    scanned: str
    cells: List[ScanCell]

    def lookup(self, tau: float, fixed_value: float) -> Optional[float]:
        for c in self.cells:
            if c.tau == tau and c.fixed_value == fixed_value:
                return c.min_constant
        raise KeyError((tau, fixed_value))

    def to_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "fixed_name", "fixed_value", "min_constant"])
        for c in self.cells:
            m = -1 if c.min_constant is None else c.min_constant
            w.writerow([f"{c.tau:.17g}", c.fixed_name, f"{c.fixed_value:.17g}", f"{m:.17g}"])


_worker_phi0: Dict[tuple, Field] = {}


def _scan_cell(cfg: ExperimentConfig, tau: float, fixed: float, candidates: Sequence[float]) -> ScanCell:
    key = (cfg.dim, cfg.M, cfg.seed, cfg.init, cfg.init_file, cfg.init_value)
    if key not in _worker_phi0:
        _worker_phi0[key] = initial_field(cfg)
    phi0 = _worker_phi0[key]
    scanned = cfg.scan_constant
    fixed_name = "B" if scanned == "A" else "A"
    tried = []
    for c in sorted(candidates):
        run_cfg = cfg.with_(tau=tau, **{scanned: c, fixed_name: fixed})
        ok = passes_certificate(run_cfg, phi0)
        tried.append((c, ok))
        log.info("scan %s tau=%g %s=%g %s=%g -> %s", cfg.scheme, tau, fixed_name, fixed, scanned, c, ok)
        if ok:
            return ScanCell(tau, fixed_name, fixed, c, tuple(tried))
    return ScanCell(tau, fixed_name, fixed, None, tuple(tried))


def scan_min_constant(cfg: ExperimentConfig, jobs: int = 1) -> ScanResult:
    """Least candidate of ``cfg.scan_constant`` passing the certificate, per
    (tau, fixed value of the other constant) cell."""
    scanned = cfg.scan_constant
    candidates = cfg.candidates
    if candidates is None:
        candidates = A_CANDIDATES if scanned == "A" else B_CANDIDATES
    cells = [(t, v) for t in cfg.tau_list for v in cfg.fixed_values]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_scan_cell, cfg, t, v, candidates) for t, v in cells]
            results = [f.result() for f in futs]
    else:
        results = [_scan_cell(cfg, t, v, candidates) for t, v in cells]
    return ScanResult(cfg.scheme, scanned, results)


# ---------------------------------------------------------------------------
# temporal convergence


@dataclass(frozen=True)
class ConvergenceRow:
    tau: float
    l2_error: float
    l2_order: Optional[float]
    h1_error: float
    h1_order: Optional[float]


def _commensurate(T: float, tau: float, t_name="T", tau_name="tau") -> int:
    n = T / tau
    k = round(n)
    if k < 1 or abs(n - k) > 1e-9 * max(1.0, n):
        raise ValueError(f"{t_name}={T} is not an integer multiple of {tau_name}={tau}")
    return int(k)


def default_reference_tau(T: float, tau_list: Sequence[float]) -> float:
    try:
        _commensurate(T, 1e-4)
        for t in tau_list:
            _commensurate(t, 1e-4)
        return 1e-4
    except ValueError:
        return min(tau_list) / 8.0


def evolve_to(cfg: ExperimentConfig, phi0: Field, tau: float, T: float) -> Field:
    n = _commensurate(T, tau)
    params = cfg.scheme_params(tau=tau)
    stepper = Stepper(cfg.basis, params, phi0, bootstrap_substeps=cfg.bootstrap_substeps,
                      bootstrap_A=cfg.bootstrap_A)
    while stepper.step_index < n:
        stepper.advance()
    return stepper.phi


def convergence_study(cfg: ExperimentConfig, phi0: Optional[Field] = None) -> List[ConvergenceRow]:
    """Errors at ``cfg.T`` against a fine-step reference, with observed orders."""
    taus = list(cfg.tau_list)
    ref_tau = cfg.reference_tau if cfg.reference_tau is not None else default_reference_tau(cfg.T, taus)
    for t in taus + [ref_tau]:
        _commensurate(cfg.T, t)
    if phi0 is None:
        phi0 = initial_field(cfg)
    basis = cfg.basis
    ref = evolve_to(cfg, phi0, ref_tau, cfg.T)
    rows: List[ConvergenceRow] = []
    for i, tau in enumerate(taus):
        err = evolve_to(cfg, phi0, tau, cfg.T) - ref
        l2, h1 = norm_L2(err, basis), norm_H1(err, basis)
        l2_o = h1_o = None
        if i > 0:
            prev = rows[-1]
            r = math.log(taus[i - 1] / tau)
            l2_o = _order(prev.l2_error, l2, r)
            h1_o = _order(prev.h1_error, h1, r)
        rows.append(ConvergenceRow(tau, l2, l2_o, h1, h1_o))
        log.info("tau=%g L2=%.3e H1=%.3e", tau, l2, h1)
    return rows


def _order(e_coarse: float, e_fine: float, log_ratio: float) -> Optional[float]:
    if e_coarse <= 0 or e_fine <= 0 or log_ratio == 0:
        return None
    return math.log(e_coarse / e_fine) / log_ratio


def write_convergence_csv(rows: Sequence[ConvergenceRow], fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["tau", "l2_error", "l2_order", "h1_error", "h1_order"])
    fmt = lambda v: "" if v is None else f"{v:.17g}"  # noqa: E731
    for r in rows:
        w.writerow([fmt(r.tau), fmt(r.l2_error), fmt(r.l2_order), fmt(r.h1_error), fmt(r.h1_order)])

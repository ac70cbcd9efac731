"""Energies, norms and the per-step dissipation ledger."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional

import numpy as np

from .potential import DOUBLE_WELL, TruncatedDoubleWell
from .quadrature import SpectralBasis1D
from .schemes import Scheme, SchemeParams
from .tensor import Field, apply_mass, apply_stiffness, contract, to_grid

__all__ = [
    "inner_mass",
    "norm_L2",
    "norm_H1",
    "grad_sq",
    "bulk_integral",
    "energy_eps",
    "penalty_coefficient",
    "energy_modified",
    "LedgerRow",
    "EnergyLedger",
    "Violation",
    "check_dissipation",
    "CSV_HEADER",
]

CSV_HEADER = ("step", "time", "E_eps", "E_mod", "dt_norm", "dtt_norm")


def inner_mass(u: Field, v: Field, basis: SpectralBasis1D) -> float:
    """Discrete L2 inner product (u, v)."""
    return float(np.vdot(apply_mass(u, basis), v))


def grad_sq(u: Field, basis: SpectralBasis1D) -> float:
    """||grad u||^2 via the stiffness pairing."""
    return float(np.vdot(apply_stiffness(u, basis), u))


def norm_L2(u: Field, basis: SpectralBasis1D) -> float:
    return float(np.sqrt(max(inner_mass(u, u, basis), 0.0)))


def norm_H1(u: Field, basis: SpectralBasis1D) -> float:
    return float(np.sqrt(max(inner_mass(u, u, basis) + grad_sq(u, basis), 0.0)))


def bulk_integral(grid: np.ndarray, potential: TruncatedDoubleWell, basis: SpectralBasis1D) -> float:
    """Tensor Gauss quadrature of F over the grid samples."""
    w = basis.quad.weights
    return float(contract(potential.F(grid), [w[None, :]] * grid.ndim).reshape(()))


def energy_eps(
    phi: Field,
    eps: float,
    potential: TruncatedDoubleWell = DOUBLE_WELL,
    basis: Optional[SpectralBasis1D] = None,
    grid: Optional[np.ndarray] = None,
) -> float:
    """Ginzburg-Landau energy eps/2 ||grad phi||^2 + (1/eps) int F(phi)."""
    if basis is None:
        raise TypeError("basis is required")
    if grid is None:
        grid = to_grid(phi, basis)
    return 0.5 * eps * grad_sq(phi, basis) + bulk_integral(grid, potential, basis) / eps


def penalty_coefficient(params: SchemeParams, potential: TruncatedDoubleWell = DOUBLE_WELL) -> float:
    """Weight of ||phi^{n+1} - phi^n||^2 in the scheme's modified energy."""
    L = potential.L
    if params.scheme is Scheme.SL_BDF2:
        return 1.0 / (4.0 * params.tau * params.gamma) + L / (2.0 * params.eps) + 0.5 * params.B
    if params.scheme is Scheme.SL_CN:
        return L / (4.0 * params.eps) + 0.5 * params.B
    raise ValueError(f"no modified energy for {params.scheme.value}")


def energy_modified(
    phi_curr: Field,
    phi_prev: Field,
    params: SchemeParams,
    potential: TruncatedDoubleWell = DOUBLE_WELL,
    basis: Optional[SpectralBasis1D] = None,
    grid: Optional[np.ndarray] = None,
) -> float:
    if basis is None:
        raise TypeError("basis is required")
    e = energy_eps(phi_curr, params.eps, potential, basis, grid)
    d = phi_curr - phi_prev
    return e + penalty_coefficient(params, potential) * inner_mass(d, d, basis)


class LedgerRow(NamedTuple):
    step: int
    time: float
    E_eps: float
    E_mod: float
    dt_norm: float
    dtt_norm: float


@dataclass
class EnergyLedger:
    rows: List[LedgerRow] = field(default_factory=list)

    def append(self, row: LedgerRow):
        row = LedgerRow(*row)
        if self.rows and row.step <= self.rows[-1].step:
            raise ValueError("ledger steps must increase")
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self, fh=None) -> Optional[str]:
        out = io.StringIO() if fh is None else fh
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.step] + [f"{v:.17g}" for v in r[1:]])
        return out.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, fh) -> "EnergyLedger":
        if isinstance(fh, str):
            fh = io.StringIO(fh)
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected ledger header {header}")
        led = cls()
        for rec in reader:
            led.append(LedgerRow(int(rec[0]), *map(float, rec[1:])))
        return led


class Violation(NamedTuple):
    step: int
    E_prev: float
    E_curr: float


def check_dissipation(
    ledger: EnergyLedger | Iterable[LedgerRow],
    rel_tol: float = 1e-10,
    abs_floor: Optional[float] = None,
    start_step: int = 1,
) -> List[Violation]:
    """Steps n+1 where E_mod^{n+1} > E_mod^n (1 + rel_tol) + abs_floor.

    Only transitions from steps n >= ``start_step`` are checked: the modified
    energy is controlled from the first two-level step onward, not across the
    start-up step. ``abs_floor`` defaults to 1e-12 |E_mod| of the first row.
    """
    rows = list(ledger)
    if len(rows) < 2:
        raise ValueError("need at least two ledger rows")
    if abs_floor is None:
        abs_floor = 1e-12 * abs(rows[0].E_mod)
    out = []
    for prev, curr in zip(rows, rows[1:]):
        if prev.step < start_step:
            continue
        if not np.isfinite(curr.E_mod) or curr.E_mod > prev.E_mod * (1.0 + rel_tol) + abs_floor:
            out.append(Violation(curr.step, prev.E_mod, curr.E_mod))
    return out

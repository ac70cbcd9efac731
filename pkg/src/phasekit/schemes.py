"""Stabilized linear time integrators for the Allen-Cahn equation

    phi_t = gamma * (eps * Laplace(phi) - f(phi) / eps),   Neumann walls,

in Legendre-Galerkin weak form. Each step solves one constant-coefficient
system (sigma Mass + eta Stiff) phi^{n+1} = rhs; the bulk force is explicit,
evaluated on the 2M-point grid and projected back by quadrature.

SL-BDF2:
    (3 phi^{n+1} - 4 phi^n + phi^{n-1}) / (2 tau gamma)
        = eps Lap phi^{n+1} - f(2 phi^n - phi^{n-1}) / eps
          - A tau (phi^{n+1} - phi^n) - B (phi^{n+1} - 2 phi^n + phi^{n-1})

SL-CN:
    (phi^{n+1} - phi^n) / (tau gamma)
        = eps Lap (phi^{n+1} + phi^n) / 2 - f(3/2 phi^n - 1/2 phi^{n-1}) / eps
          - A tau (phi^{n+1} - phi^n) - B (phi^{n+1} - 2 phi^n + phi^{n-1})

The first-order start-up scheme uses A (phi^{k+1} - phi^k) without the tau
factor, on m substeps of tau / m.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .potential import DOUBLE_WELL, TruncatedDoubleWell
from .quadrature import SpectralBasis1D
from .tensor import (
    DiagonalizedOperator,
    Field,
    apply_mass,
    apply_stiffness,
    factor,
    load_from_grid,
    solve,
    to_grid,
)

__all__ = [
    "Scheme",
    "SchemeParams",
    "StepperState",
    "Stepper",
    "stability_constants_unconditional",
    "stable_tau_thresholds",
    "nonlinear_term",
    "lhs_coefficients",
    "step_sl_bdf2",
    "step_sl_cn",
    "bootstrap_first_step",
    "DEFAULT_BOOTSTRAP_SUBSTEPS",
]

DEFAULT_BOOTSTRAP_SUBSTEPS = 16

# source(t) -> grid values g; the equation becomes phi_t = gamma (... + g)
Source = Callable[[float], np.ndarray]


class Scheme(str, enum.Enum):
    SL_BDF2 = "sl-bdf2"
    SL_CN = "sl-cn"
    BOOTSTRAP1 = "bootstrap1"


@dataclass(frozen=True)
class SchemeParams:
    eps: float
    gamma: float
    tau: float
    A: float = 0.0
    B: float = 0.0
    scheme: Scheme = Scheme.SL_BDF2

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        for name in ("eps", "gamma", "tau"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        for name in ("A", "B"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be non-negative, got {v!r}")

    def with_(self, **changes) -> "SchemeParams":
        return replace(self, **changes)


def lhs_coefficients(params: SchemeParams) -> tuple[float, float]:
    """(sigma, eta) of the left-hand-side operator for ``params.scheme``."""
    tg = params.tau * params.gamma
    if params.scheme is Scheme.SL_BDF2:
        return 1.5 / tg + params.A * params.tau + params.B, params.eps
    if params.scheme is Scheme.SL_CN:
        return 1.0 / tg + params.A * params.tau + params.B, 0.5 * params.eps
    return 1.0 / tg + params.A, params.eps


def stability_constants_unconditional(
    eps: float, gamma: float, scheme, potential: TruncatedDoubleWell = DOUBLE_WELL
) -> tuple[float, float]:
    """(A, B) making the scheme energy stable for every tau."""
    if eps <= 0 or gamma <= 0:
        raise ValueError("eps and gamma must be positive")
    L = potential.L
    A = gamma * L * L / (16.0 * eps * eps)
    scheme = Scheme(scheme)
    if scheme is Scheme.SL_BDF2:
        return A, L / eps
    if scheme is Scheme.SL_CN:
        return A, L / (2.0 * eps)
    raise ValueError(f"no unconditional constants for {scheme.value}")


def stable_tau_thresholds(
    eps: float, gamma: float, potential: TruncatedDoubleWell = DOUBLE_WELL
) -> tuple[float, float, float]:
    """Largest provably stable tau for: SL-BDF2 with A = 0 (B large enough),
    SL-BDF2 with A = B = 0, SL-CN with A = B = 0."""
    if eps <= 0 or gamma <= 0:
        raise ValueError("eps and gamma must be positive")
    L = potential.L
    return 2 * eps / (L * gamma), eps / (2 * L * gamma), 2 * eps / (3 * L * gamma)


def nonlinear_term(
    extrapolant: Field,
    potential: TruncatedDoubleWell,
    basis: SpectralBasis1D,
    grid: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Load tensor (f(u), test functions) with u sampled on the 2M grid.

    ``grid`` may carry precomputed grid values of ``extrapolant``.
    """
    if grid is None:
        grid = to_grid(extrapolant, basis)
    return load_from_grid(potential.f(grid), basis)


@dataclass
class StepperState:
    """History of a two-level scheme: phi^n, phi^{n-1} and the factored LHS.

    Grid values are cached alongside the coefficients because the explicit
    term only ever needs linear combinations of them.
    """

    basis: SpectralBasis1D
    phi_curr: Field
    phi_prev: Field
    step_index: int
    factored_op: DiagonalizedOperator
    time: float = 0.0
    grid_curr: Optional[np.ndarray] = None
    grid_prev: Optional[np.ndarray] = None

    def grids(self) -> tuple[np.ndarray, np.ndarray]:
        if self.grid_curr is None:
            self.grid_curr = to_grid(self.phi_curr, self.basis)
        if self.grid_prev is None:
            self.grid_prev = to_grid(self.phi_prev, self.basis)
        return self.grid_curr, self.grid_prev


def _check_op(state: StepperState, params: SchemeParams):
    sigma, eta = lhs_coefficients(params)
    op = state.factored_op
    if not (np.isclose(op.sigma, sigma, rtol=1e-14, atol=0) and np.isclose(op.eta, eta, rtol=1e-14, atol=0)):
        raise ValueError("factored operator does not match scheme parameters")


def _source_load(source: Optional[Source], t: float, basis: SpectralBasis1D):
    if source is None:
        return 0.0
    return load_from_grid(np.asarray(source(t), dtype=float), basis)


def step_sl_bdf2(
    state: StepperState,
    params: SchemeParams,
    potential: TruncatedDoubleWell = DOUBLE_WELL,
    source: Optional[Source] = None,
) -> Field:
    if state.step_index < 1:
        raise ValueError("SL-BDF2 needs two history levels (n >= 1)")
    _check_op(state, params)
    basis = state.basis
    eps, tg, A, B, tau = params.eps, params.tau * params.gamma, params.A, params.B, params.tau
    g_curr, g_prev = state.grids()
    u, v = state.phi_curr, state.phi_prev
    combo = (2.0 / tg + A * tau + 2.0 * B) * u - (0.5 / tg + B) * v
    rhs = apply_mass(combo, basis)
    rhs -= nonlinear_term(None, potential, basis, grid=2.0 * g_curr - g_prev) / eps
    rhs += _source_load(source, state.time + tau, basis)
    return solve(state.factored_op, rhs)


def step_sl_cn(
    state: StepperState,
    params: SchemeParams,
    potential: TruncatedDoubleWell = DOUBLE_WELL,
    source: Optional[Source] = None,
) -> Field:
    if state.step_index < 1:
        raise ValueError("SL-CN needs two history levels (n >= 1)")
    _check_op(state, params)
    basis = state.basis
    eps, tg, A, B, tau = params.eps, params.tau * params.gamma, params.A, params.B, params.tau
    g_curr, g_prev = state.grids()
    u, v = state.phi_curr, state.phi_prev
    combo = (1.0 / tg + A * tau + 2.0 * B) * u - B * v
    rhs = apply_mass(combo, basis) - 0.5 * eps * apply_stiffness(u, basis)
    rhs -= nonlinear_term(None, potential, basis, grid=1.5 * g_curr - 0.5 * g_prev) / eps
    rhs += _source_load(source, state.time + 0.5 * tau, basis)
    return solve(state.factored_op, rhs)


def bootstrap_first_step(
    phi0: Field,
    params: SchemeParams,
    potential: TruncatedDoubleWell = DOUBLE_WELL,
    m: int = DEFAULT_BOOTSTRAP_SUBSTEPS,
    *,
    basis: SpectralBasis1D,
    A: Optional[float] = None,
    t0: float = 0.0,
    source: Optional[Source] = None,
) -> Field:
    """phi^1 from m first-order stabilized substeps of size tau / m.

    ``A`` defaults to gamma L^2 / (16 eps^2); ``params.A`` and ``params.B``
    belong to the second-order scheme and are not used here.
    """
    if m < 1:
        raise ValueError("need at least one substep")
    if A is None:
        A = stability_constants_unconditional(params.eps, params.gamma, Scheme.SL_BDF2, potential)[0]
    sub = SchemeParams(params.eps, params.gamma, params.tau / m, A=A, scheme=Scheme.BOOTSTRAP1)
    sigma, eta = lhs_coefficients(sub)
    op = factor(sigma, eta, basis, phi0.ndim)
    phi = np.array(phi0, dtype=float)
    for k in range(m):
        rhs = apply_mass(sigma * phi, basis)
        rhs -= nonlinear_term(phi, potential, basis) / params.eps
        rhs += _source_load(source, t0 + (k + 1) * sub.tau, basis)
        phi = solve(op, rhs)
    return phi


_STEP = {Scheme.SL_BDF2: step_sl_bdf2, Scheme.SL_CN: step_sl_cn}


class Stepper:
    """Owns the history of one simulation and advances it.

    The left-hand side is factored once and refactored only when
    :meth:`set_params` changes (sigma, eta).
    """

    def __init__(
        self,
        basis: SpectralBasis1D,
        params: SchemeParams,
        phi0: Field,
        phi1: Optional[Field] = None,
        *,
        potential: TruncatedDoubleWell = DOUBLE_WELL,
        bootstrap_substeps: int = DEFAULT_BOOTSTRAP_SUBSTEPS,
        bootstrap_A: Optional[float] = None,
        source: Optional[Source] = None,
        t0: float = 0.0,
    ):
        if params.scheme not in _STEP:
            raise ValueError(f"{params.scheme.value} is not a two-level scheme")
        self.basis = basis
        self.params = params
        self.potential = potential
        self.source = source
        phi0 = np.array(phi0, dtype=float)
        if phi1 is None:
            phi1 = bootstrap_first_step(
                phi0, params, potential, bootstrap_substeps,
                basis=basis, A=bootstrap_A, t0=t0, source=source,
            )
        self.state = StepperState(
            basis=basis,
            phi_curr=np.array(phi1, dtype=float),
            phi_prev=phi0,
            step_index=1,
            factored_op=factor(*lhs_coefficients(params), basis, phi0.ndim),
            time=t0 + params.tau,
        )

    @property
    def phi(self) -> Field:
        return self.state.phi_curr

    @property
    def step_index(self) -> int:
        return self.state.step_index

    @property
    def time(self) -> float:
        return self.state.time

    def set_params(self, params: SchemeParams):
        if params.scheme not in _STEP:
            raise ValueError(f"{params.scheme.value} is not a two-level scheme")
        sigma, eta = lhs_coefficients(params)
        op = self.state.factored_op
        if (sigma, eta) != (op.sigma, op.eta):
            self.state.factored_op = factor(sigma, eta, self.basis, op.dim)
        self.params = params

    def grid(self) -> np.ndarray:
        """Grid values of the current level."""
        return self.state.grids()[0]

    def advance(self) -> Field:
        st = self.state
        new = _STEP[self.params.scheme](st, self.params, self.potential, self.source)
        g_curr, _ = st.grids()
        st.phi_prev, st.grid_prev = st.phi_curr, g_curr
        st.phi_curr, st.grid_curr = new, None
        st.step_index += 1
        st.time += self.params.tau
        return new

"""Tensor-product fields and the fast constant-coefficient solver.

A field on [-1, 1]^d is an ndarray of modal coefficients with shape
``(M,) * d``; axis ``a`` is spatial direction ``a`` (x, y, z). Physical
values live on the ``(Q,) * d`` Gauss grid with the same axis order.

The per-step linear system of both schemes is

    (sigma * Mass_d + eta * Stiff_d) u = b

with Mass_d = M x M x ... and Stiff_d = sum over directions of S in that
direction and M elsewhere. It is solved by diagonalizing the 1-D pencil
S v = lam M v once, which turns the d-D operator into a diagonal scale.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg

from .quadrature import SpectralBasis1D

__all__ = [
    "Field",
    "SingularOperatorError",
    "DiagonalizedOperator",
    "check_field",
    "apply_along",
    "contract",
    "to_grid",
    "from_grid",
    "load_from_grid",
    "apply_mass",
    "apply_stiffness",
    "apply_operator",
    "factor",
    "solve",
    "assemble_dense",
]

Field = np.ndarray

_ZERO_EIG = 1e-10
_MIN_DENOM = 1e-14


class SingularOperatorError(ValueError):
    pass


def check_field(u, M: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim not in (2, 3) or any(n != M for n in u.shape):
        raise ValueError(f"field shape {u.shape} does not match {M} modes in 2 or 3 dims")
    if not np.all(np.isfinite(u)):
        raise ValueError("field has non-finite entries")
    return u


def apply_along(matrix: np.ndarray, u: np.ndarray, axis: int) -> np.ndarray:
    """Multiply ``matrix`` into axis ``axis`` of ``u``."""
    return np.moveaxis(np.tensordot(matrix, u, axes=([1], [axis])), 0, axis)


def contract(u: np.ndarray, matrices) -> np.ndarray:
    for axis, m in enumerate(matrices):
        u = apply_along(m, u, axis)
    return u


def to_grid(coeffs: Field, basis: SpectralBasis1D) -> np.ndarray:
    """Modal coefficients -> values on the tensor Gauss grid."""
    return contract(coeffs, [basis.basis_at_nodes.T] * coeffs.ndim)


def from_grid(values: np.ndarray, basis: SpectralBasis1D) -> Field:
    """Grid values -> L2-projection coefficients."""
    return contract(values, [basis.project] * values.ndim)


def load_from_grid(values: np.ndarray, basis: SpectralBasis1D) -> np.ndarray:
    """Quadrature pairings (g, phi_i x phi_j [x phi_k]) of grid samples g."""
    return contract(values, [basis.weighted_basis] * values.ndim)


def apply_mass(u: Field, basis: SpectralBasis1D) -> np.ndarray:
    return contract(u, [basis.mass] * u.ndim)


def apply_stiffness(u: Field, basis: SpectralBasis1D) -> np.ndarray:
    d = u.ndim
    # mass-contract every axis once, then swap one axis at a time for stiffness
    out = np.zeros_like(u, dtype=float)
    for a in range(d):
        mats = [basis.mass] * d
        mats[a] = basis.stiffness
        out += contract(u, mats)
    return out


def apply_operator(sigma: float, eta: float, u: Field, basis: SpectralBasis1D) -> np.ndarray:
    out = sigma * apply_mass(u, basis)
    if eta != 0.0:
        out += eta * apply_stiffness(u, basis)
    return out


@dataclass(frozen=True, eq=False)
class DiagonalizedOperator:
    """Factored form of sigma * Mass_d + eta * Stiff_d.

    ``vectors`` satisfies V^T mass V = I and stiffness V = mass V diag(eigenvalues).
    """

    sigma: float
    eta: float
    dim: int
    vectors: np.ndarray
    eigenvalues: np.ndarray
    denominators: np.ndarray

    @property
    def M(self) -> int:
        return self.vectors.shape[0]


def factor(sigma: float, eta: float, basis: SpectralBasis1D, dim: int) -> DiagonalizedOperator:
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    if sigma < 0 or eta < 0:
        raise ValueError("sigma and eta must be non-negative")
    lam, V = scipy.linalg.eigh(basis.stiffness, basis.mass)
    lam = np.where(np.abs(lam) < _ZERO_EIG, 0.0, lam)
    if np.count_nonzero(lam == 0.0) != 1 or lam.min() < 0:
        raise ArithmeticError("stiffness pencil lost its one-dimensional null space")
    grids = np.meshgrid(*([lam] * dim), indexing="ij")
    denom = sigma + eta * reduce(np.add, grids)
    if denom.min() <= _MIN_DENOM:
        raise SingularOperatorError(
            f"operator sigma={sigma}, eta={eta} is singular (min denominator {denom.min():.3e})"
        )
    V.flags.writeable = False
    lam.flags.writeable = False
    denom.flags.writeable = False
    return DiagonalizedOperator(float(sigma), float(eta), dim, V, lam, denom)


def solve(op: DiagonalizedOperator, b: np.ndarray) -> Field:
    """Solve (sigma Mass_d + eta Stiff_d) u = b in O(d M^{d+1})."""
    b = np.asarray(b, dtype=float)
    if b.shape != (op.M,) * op.dim:
        raise ValueError(f"right-hand side shape {b.shape} does not match operator")
    V = op.vectors
    w = contract(b, [V.T] * op.dim) / op.denominators
    return contract(w, [V] * op.dim)


def assemble_dense(sigma: float, eta: float, basis: SpectralBasis1D, dim: int) -> np.ndarray:
    """Explicit Kronecker matrix of the operator (test oracle; M^d x M^d)."""
    Mm, S = basis.mass, basis.stiffness
    out = sigma * reduce(np.kron, [Mm] * dim)
    for a in range(dim):
        mats = [Mm] * dim
        mats[a] = S
        out = out + eta * reduce(np.kron, mats)
    return out

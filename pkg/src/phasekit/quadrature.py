"""One-dimensional Legendre machinery.

Legendre polynomials, Gauss-Legendre quadrature, the modal basis

    phi_0 = L_0, phi_1 = L_1, phi_k = L_k - L_{k+2}  (2 <= k <= M-1)

on [-1, 1], and the 1-D mass/stiffness matrices. Every multi-dimensional
operator in the package is a tensor product of these.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "QuadratureRule",
    "SpectralBasis1D",
    "legendre_eval",
    "legendre_table",
    "basis_table",
    "gauss_rule",
    "build_basis",
    "forward_transform",
    "backward_transform",
]

_MAX_NEWTON = 100


def legendre_eval(k: int, x: float) -> float:
    """Evaluate L_k(x) by the three-term recurrence."""
    if k < 0:
        raise ValueError("degree must be non-negative")
    p0, p1 = 1.0, float(x)
    if k == 0:
        return p0
    for n in range(1, k):
        p0, p1 = p1, ((2 * n + 1) * x * p1 - n * p0) / (n + 1)
    return p1


def legendre_table(K: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Values and first derivatives of L_0..L_K at points ``x``.

    Returns two arrays of shape (K+1, len(x)). Derivatives use
    L'_{n+1} = L'_{n-1} + (2n+1) L_n, which is regular at x = +-1.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P = np.zeros((K + 1, x.size))
    dP = np.zeros((K + 1, x.size))
    P[0] = 1.0
    if K >= 1:
        P[1] = x
        dP[1] = 1.0
    for n in range(1, K):
        P[n + 1] = ((2 * n + 1) * x * P[n] - n * P[n - 1]) / (n + 1)
        dP[n + 1] = dP[n - 1] + (2 * n + 1) * P[n]
    return P, dP


def basis_table(M: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the modal basis phi_0..phi_{M-1} at ``x``."""
    P, dP = legendre_table(M + 1, x)
    B = P[:M].copy()
    dB = dP[:M].copy()
    B[2:] -= P[4 : M + 2]
    dB[2:] -= dP[4 : M + 2]
    return B, dB


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return self.nodes.size

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _legendre_and_derivative(Q: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p0 = np.ones_like(x)
    p1 = x.copy()
    for n in range(1, Q):
        p0, p1 = p1, ((2 * n + 1) * x * p1 - n * p0) / (n + 1)
    # L_Q' from (x^2 - 1) L_Q' = Q (x L_Q - L_{Q-1}); nodes are interior
    dp = Q * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


@lru_cache(maxsize=None)
def gauss_rule(Q: int) -> QuadratureRule:
    """Q-point Gauss-Legendre rule on [-1, 1].

    Roots of L_Q are found by safeguarded Newton iteration. The k-th root
    (counted from x = 1) has angle theta_k = arccos(x_k) inside
    ((k - 1/2) pi / (Q + 1/2), k pi / (Q + 1/2)), which provides both the
    bracket and, through Tricomi's asymptotic formula, the starting guess.
    Only the non-negative half is refined; the rest follows by symmetry.
    """
    if Q < 1:
        raise ValueError("quadrature order must be >= 1")
    half = (Q + 1) // 2
    k = np.arange(1, half + 1, dtype=float)
    lo = np.cos(k * np.pi / (Q + 0.5))
    hi = np.cos((k - 0.5) * np.pi / (Q + 0.5))
    theta = (4 * k - 1) * np.pi / (4 * Q + 2)
    x = (1 - (Q - 1) / (8.0 * Q**3)) * np.cos(theta)
    x = np.clip(x, lo, hi)

    for _ in range(_MAX_NEWTON):
        p, dp = _legendre_and_derivative(Q, x)
        # sign of L_Q alternates between consecutive brackets; shrink bracket
        # toward the side that still contains the sign change
        sign_hi = np.where(k % 2 == 1, 1.0, -1.0)  # sign of L_Q just above the root
        above = p * sign_hi > 0
        hi = np.where(above, x, hi)
        lo = np.where(above, lo, x)
        step = p / dp
        x_new = x - step
        if np.all(np.abs(step) <= 1e-14):
            x = x_new
            break
        # Newton steps that leave the bracket fall back to bisection
        outside = (x_new < lo) | (x_new > hi)
        x = np.where(outside, 0.5 * (lo + hi), x_new)
    else:
        raise RuntimeError(f"Gauss-Legendre root refinement did not converge for Q={Q}")

    # one more Newton correction to polish, then recompute derivative for weights
    p, dp = _legendre_and_derivative(Q, x)
    x = x - p / dp
    if Q % 2 == 1:
        x[-1] = 0.0
    _, dp = _legendre_and_derivative(Q, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    # assemble increasing order with exact mirror symmetry
    pos_x, pos_w = x[::-1], w[::-1]  # ascending
    if Q % 2 == 1:
        nodes = np.concatenate([-pos_x[:0:-1], pos_x])
        weights = np.concatenate([pos_w[:0:-1], pos_w])
    else:
        nodes = np.concatenate([-pos_x[::-1], pos_x])
        weights = np.concatenate([pos_w[::-1], pos_w])
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(nodes, weights)


@dataclass(frozen=True, eq=False)
class SpectralBasis1D:
    """Modal Legendre basis with M modes, tabulated on a Q = 2M Gauss rule.

    ``basis_at_nodes[k, i]`` is phi_k(x_i); ``project`` maps nodal samples to
    L2-projection coefficients (mass^{-1} B W).
    """

    M: int
    quad: QuadratureRule
    basis_at_nodes: np.ndarray
    dbasis_at_nodes: np.ndarray
    mass: np.ndarray
    stiffness: np.ndarray
    weighted_basis: np.ndarray
    project: np.ndarray

    @property
    def Q(self) -> int:
        return self.quad.order

    def evaluate(self, coeffs, x) -> np.ndarray:
        """Evaluate a 1-D expansion at arbitrary points."""
        B, _ = basis_table(self.M, x)
        return np.asarray(coeffs) @ B


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@lru_cache(maxsize=None)
def build_basis(M: int, Q: int | None = None) -> SpectralBasis1D:
    """Tabulate the M-mode basis and its mass/stiffness matrices.

    The default rule has Q = 2M points; products of two basis functions or
    their derivatives have degree <= 2M + 2 <= 2Q - 1, so both matrices are
    exact.
    """
    if M < 2:
        raise ValueError("need at least 2 modes")
    if Q is None:
        Q = 2 * M
    quad = gauss_rule(Q)
    B, dB = basis_table(M, quad.nodes)
    WB = B * quad.weights
    mass = WB @ B.T
    stiffness = (dB * quad.weights) @ dB.T
    mass = 0.5 * (mass + mass.T)
    stiffness = 0.5 * (stiffness + stiffness.T)
    project = cho_solve(cho_factor(mass), WB)
    return SpectralBasis1D(
        M=M,
        quad=quad,
        basis_at_nodes=_frozen(B),
        dbasis_at_nodes=_frozen(dB),
        mass=_frozen(mass),
        stiffness=_frozen(stiffness),
        weighted_basis=_frozen(WB),
        project=_frozen(project),
    )


def forward_transform(values, basis: SpectralBasis1D) -> np.ndarray:
    """L2-projection coefficients of nodal samples onto the modal basis."""
    return basis.project @ np.asarray(values, dtype=float)


def backward_transform(coeffs, basis: SpectralBasis1D) -> np.ndarray:
    return np.asarray(coeffs, dtype=float) @ basis.basis_at_nodes

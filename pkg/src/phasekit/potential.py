"""Truncated double-well potential.

Quartic (phi^2 - 1)^2 / 4 on [-2, 2], continued by quadratic tails that
match value, slope and curvature at +-2, so that f = F' is globally
Lipschitz with constant 11 and |f''| <= 12.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TruncatedDoubleWell", "DOUBLE_WELL"]

_CUT = 2.0


@dataclass(frozen=True)
class TruncatedDoubleWell:
    """F, f = F' and f' for the double well.

    ``truncated=False`` gives the plain quartic, which has no global
    Lipschitz constant; it exists for manufactured-solution checks only.
    """

    truncated: bool = True

    def F(self, phi):
        phi = np.asarray(phi, dtype=float)
        quartic = 0.25 * (phi * phi - 1.0) ** 2
        if not self.truncated:
            return quartic
        s = np.abs(phi) - _CUT  # F is even
        tail = 5.5 * s * s + 6.0 * s + 2.25
        return np.where(s > 0, tail, quartic)

    def f(self, phi):
        phi = np.asarray(phi, dtype=float)
        cubic = phi * phi * phi - phi
        if not self.truncated:
            return cubic
        s = np.abs(phi) - _CUT
        tail = np.sign(phi) * (11.0 * s + 6.0)
        return np.where(s > 0, tail, cubic)

    def df(self, phi):
        phi = np.asarray(phi, dtype=float)
        quad = 3.0 * phi * phi - 1.0
        if not self.truncated:
            return quad
        return np.where(np.abs(phi) > _CUT, 11.0, quad)

    @property
    def L(self) -> float:
        if not self.truncated:
            raise ValueError("the untruncated quartic has unbounded f'")
        return 11.0

    @property
    def L2(self) -> float:
        if not self.truncated:
            raise ValueError("the untruncated quartic has unbounded f''")
        return 12.0

    def lipschitz_constants(self) -> tuple[float, float]:
        return self.L, self.L2


DOUBLE_WELL = TruncatedDoubleWell()

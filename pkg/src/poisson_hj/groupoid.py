"""The cotangent groupoid T*SO(3) over so*(3) in the exponential chart.

A point ``(x, p)`` is a covector ``p`` at ``exp(hat(x))`` written in the
canonical coordinates of the rotation-vector chart.  The two momentum maps
are

    source(x, p) = dexp(-x)^{-T} p     (body momentum, Poisson)
    target(x, p) = dexp(x)^{-T} p      (spatial momentum, anti-Poisson)

with respect to the bracket ``hat(mu)`` on so*(3) and ``{x_i, p_j} = delta_ij``
upstairs.  The two differ by a rotation, so ``|source| == |target|``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .lie_poisson import check_chart, lie_poisson_bivector

SOURCE_SIGN = -1.0
TARGET_SIGN = 1.0


@dataclass(frozen=True)
class GroupoidPoint:
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(3))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(3))
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.p))):
            raise ValueError("groupoid coordinates must be finite")

    def __eq__(self, other):
        if not isinstance(other, GroupoidPoint):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.p, other.p)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])


def momentum_map(x, p, sign: float) -> np.ndarray:
    """``dexp(sign * x)^{-T} p`` at one chart point."""
    check_chart(x)
    return _backend.kernels.point_momentum(x, p, sign)


def source(g: GroupoidPoint) -> np.ndarray:
    return momentum_map(g.x, g.p, SOURCE_SIGN)


def target(g: GroupoidPoint) -> np.ndarray:
    return momentum_map(g.x, g.p, TARGET_SIGN)


def unit(mu) -> GroupoidPoint:
    """Identity arrow at ``mu``: the zero rotation carrying momentum ``mu``."""
    return GroupoidPoint(np.zeros(3), np.array(mu, dtype=float))


_SELECTORS = {"source": (source, 1.0), "target": (target, -1.0)}

# Canonical bivector on (x, p): {x_i, p_j} = delta_ij.
CANONICAL_BIVECTOR = np.block([[np.zeros((3, 3)), np.eye(3)], [-np.eye(3), np.zeros((3, 3))]])


def momentum_jacobian(map_selector: str, g: GroupoidPoint, fd_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the selected map in ``(x, p)``, shape (3, 6)."""
    fmap, _ = _SELECTORS[map_selector]
    z = g.as_vector()
    J = np.empty((3, 6))
    for i in range(6):
        dz = np.zeros(6)
        dz[i] = fd_step
        plus = fmap(GroupoidPoint(z[:3] + dz[:3], z[3:] + dz[3:]))
        minus = fmap(GroupoidPoint(z[:3] - dz[:3], z[3:] - dz[3:]))
        J[:, i] = (plus - minus) / (2.0 * fd_step)
    return J


def pushforward_check(map_selector: str, g: GroupoidPoint, fd_step: float = 1e-6) -> float:
    """Max-norm of ``J Pi_can J^T - sigma Pi_LP(F(g))``.

    ``sigma`` is +1 for ``"source"`` and -1 for ``"target"``, so a small
    residual certifies a Poisson (resp. anti-Poisson) map at ``g``.
    """
    if map_selector not in _SELECTORS:
        raise ValueError(f"map_selector must be 'source' or 'target', got {map_selector!r}")
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    check_chart(g.x)
    fmap, sigma = _SELECTORS[map_selector]
    J = momentum_jacobian(map_selector, g, fd_step)
    pushed = J @ CANONICAL_BIVECTOR @ J.T
    return float(np.max(np.abs(pushed - sigma * lie_poisson_bivector(fmap(g)))))

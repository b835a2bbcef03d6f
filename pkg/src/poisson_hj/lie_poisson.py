"""so(3) primitives and the free rigid body on so*(3).

The Lie-Poisson bracket is

    {f, g}(mu) = -mu . (grad f x grad g)

so the bivector has entries ``Pi_ab = -mu . (e_a x e_b)``, i.e. ``hat(mu)``.
Hamiltonian vector fields follow ``X_H(g) = {H, g}``, which gives
``mu_dot = Pi(mu)^T grad H = grad H x mu``.  Every orbit of this flow stays on a
sphere ``|mu| = const``; ``casimir`` is half the squared radius.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Rotation-vector chart on SO(3). The margin keeps dexp well conditioned.
CHART_LIMIT = np.pi - 1e-6
DEXP_SERIES_THRESHOLD = 1e-4


class ChartError(ValueError):
    """A rotation vector left the exponential chart ``|x| < pi``."""


def check_chart(x) -> float:
    theta = float(np.linalg.norm(x))
    if not theta < CHART_LIMIT:
        raise ChartError(f"|x| = {theta:.6g} outside exponential chart (limit {CHART_LIMIT:.8g})")
    return theta


def hat(v) -> np.ndarray:
    """Skew matrix with ``hat(v) @ w == np.cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def exp_so3(x) -> np.ndarray:
    """Rodrigues' formula ``exp(hat(x))``."""
    x = np.asarray(x, dtype=float)
    theta = check_chart(x)
    A = hat(x)
    if theta < DEXP_SERIES_THRESHOLD:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    else:
        a = np.sin(theta) / theta
        b = 2.0 * np.sin(0.5 * theta) ** 2 / (theta * theta)
    return np.eye(3) + a * A + b * (A @ A)


def log_so3(R) -> np.ndarray:
    """Rotation vector of ``R`` (inverse of ``exp_so3`` for angles below pi)."""
    R = np.asarray(R, dtype=float)
    cos_theta = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    axis = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < DEXP_SERIES_THRESHOLD:
        return axis * (1.0 + theta * theta / 6.0)
    return axis * (theta / np.sin(theta))


def _dexp_coefficients(theta: float, series: bool | None = None) -> tuple[float, float]:
    # (1 - cos t)/t^2 and (t - sin t)/t^3; the first is evaluated through
    # 2 sin^2(t/2) so that it stays accurate just above the switch point.
    if series is None:
        series = theta < DEXP_SERIES_THRESHOLD
    t2 = theta * theta
    if series:
        return 0.5 - t2 / 24.0 + t2 * t2 / 720.0, 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    return 2.0 * np.sin(0.5 * theta) ** 2 / t2, (theta - np.sin(theta)) / (t2 * theta)


def dexp(x, series: bool | None = None) -> np.ndarray:
    """Left Jacobian of the exponential map.

    ``J(x) = I + (1 - cos t)/t^2 hat(x) + (t - sin t)/t^3 hat(x)^2`` with
    ``t = |x|``.  It maps chart velocities to spatial angular velocities:
    ``d/ds exp(x(s)) exp(x(s))^T = hat(J(x) x'(s))``.

    ``series`` forces one branch (used to cross-check the two); by default the
    Taylor branch is taken for ``t < 1e-4``.
    """
    x = np.asarray(x, dtype=float)
    theta = check_chart(x)
    a, b = _dexp_coefficients(theta, series)
    A = hat(x)
    return np.eye(3) + a * A + b * (A @ A)


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """Rigid-body kinetic energy ``H = sum(mu_i^2 / (2 I_i))``."""

    inertia: tuple[float, float, float] = (1.5, 2.0, 2.5)

    def __post_init__(self):
        inertia = tuple(float(v) for v in self.inertia)
        if len(inertia) != 3 or not all(np.isfinite(v) and v > 0 for v in inertia):
            raise ValueError(f"inertia must be three positive reals, got {self.inertia!r}")
        object.__setattr__(self, "inertia", inertia)

    @property
    def inverse_inertia(self) -> np.ndarray:
        return 1.0 / np.asarray(self.inertia)

    def __call__(self, mu) -> np.ndarray | float:
        mu = np.asarray(mu, dtype=float)
        return 0.5 * np.sum(mu * mu * self.inverse_inertia, axis=-1)


def eval_h_and_grad(h: QuadraticHamiltonian, mu) -> tuple[float, np.ndarray]:
    mu = np.asarray(mu, dtype=float)
    grad = mu * h.inverse_inertia
    return float(0.5 * np.dot(mu, grad)), grad


def casimir(mu):
    """``C(mu) = |mu|^2 / 2``.  Works on a single point or on rows."""
    mu = np.asarray(mu, dtype=float)
    return 0.5 * np.sum(mu * mu, axis=-1)


def lie_poisson_bivector(mu) -> np.ndarray:
    """Matrix of brackets ``{mu_a, mu_b} = -mu . (e_a x e_b)``, which is ``hat(mu)``."""
    return hat(mu)


def euler_rhs(h: QuadraticHamiltonian, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    return np.cross(mu * h.inverse_inertia, mu)


@dataclass
class TrajectoryRecord:
    step_size: float
    states: np.ndarray
    hamiltonian_values: np.ndarray = field(default=None)
    casimir_values: np.ndarray = field(default=None)

    @classmethod
    def from_states(cls, h: QuadraticHamiltonian, step_size: float, states) -> "TrajectoryRecord":
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return cls(step_size, states, np.asarray(h(states)), np.asarray(casimir(states)))

    def __len__(self):
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return self.step_size * np.arange(len(self.states))


def rk4_rollout(h: QuadraticHamiltonian, mu0, dt: float, n: int) -> TrajectoryRecord:
    """Classical RK4 on ``euler_rhs``; ``n`` steps of size ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n < 0:
        raise ValueError("n must be nonnegative")
    w = h.inverse_inertia
    states = np.empty((n + 1, 3))
    mu = np.array(mu0, dtype=float)
    states[0] = mu

    def f(m):
        return np.cross(m * w, m)

    for k in range(n):
        k1 = f(mu)
        k2 = f(mu + 0.5 * dt * k1)
        k3 = f(mu + 0.5 * dt * k2)
        k4 = f(mu + dt * k3)
        mu = mu + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[k + 1] = mu
    return TrajectoryRecord.from_states(h, dt, states)


def rk4_sample(h: QuadraticHamiltonian, mu0, step_size: float, n: int, substeps: int) -> np.ndarray:
    """States of an RK4 run at ``dt = step_size / substeps`` sampled every ``step_size``."""
    fine = rk4_rollout(h, mu0, step_size / substeps, n * substeps)
    return fine.states[::substeps]

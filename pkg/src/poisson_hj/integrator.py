"""Poisson integrator induced by the Lagrangian bisection of a generating function.

At step size ``h`` the network defines the bisection

    L_h = {(x, p) : x = dS/dp(h, p)}

of T*SO(3).  One step solves ``tar(x(p), p) = mu`` for ``p`` by Newton's method
and returns ``sou(x(p), p)``.  Because ``sou`` and ``tar`` differ by a rotation,
``|mu|`` (hence every Casimir) is preserved whatever the weights are.

For a Hamilton-Jacobi solution ``sou o tar^{-1}`` advances ``euler_rhs``
forward in time.  ``swap_roles=True`` uses ``tar o sou^{-1}`` instead, which
is the inverse map.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _backend
from .groupoid import SOURCE_SIGN, TARGET_SIGN
from .lie_poisson import CHART_LIMIT, ChartError, QuadraticHamiltonian, TrajectoryRecord, casimir, rk4_sample
from .network import GeneratingFunctionNet

SWAP_ROLES = False


class NewtonFailure(RuntimeError):
    def __init__(self, message, final_residual=float("nan"), step_index=None):
        super().__init__(message)
        self.final_residual = final_residual
        self.step_index = step_index


@dataclass(frozen=True)
class NewtonConfig:
    tolerance: float = 1e-12
    max_iterations: int = 50
    fd_step: float = 1e-7
    max_halvings: int = 20

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


@dataclass
class StepDiagnostics:
    newton_iterations: int
    final_residual: float
    chart_max_x_norm: float


def chart_coordinate(net: GeneratingFunctionNet, h: float) -> Callable[[np.ndarray], np.ndarray]:
    """``p -> dS/dp(h, p)``: the rotation-vector part of the bisection at time ``h``."""
    point_eval = _backend.kernels.point_net_eval
    weights, biases = net.weights, net.biases

    def x_of_p(p):
        _, dn = point_eval(weights, biases, h, p)
        return h * dn[1:]

    return x_of_p


def solve_bisection(x_of_p, mu, ncfg: NewtonConfig = NewtonConfig(), swap_roles: bool = SWAP_ROLES):
    """Apply the Poisson map induced by the bisection ``{(x_of_p(p), p)}`` to ``mu``.

    Solves ``in_map(x(p), p) = mu`` (damped Newton, central-difference
    Jacobian, start ``p = mu``) and returns ``out_map(x(p*), p*)``.
    """
    mu = np.asarray(mu, dtype=float)
    in_sign, out_sign = (SOURCE_SIGN, TARGET_SIGN) if swap_roles else (TARGET_SIGN, SOURCE_SIGN)
    point_momentum = _backend.kernels.point_momentum
    max_x = 0.0

    def chart(p):
        nonlocal max_x
        x = x_of_p(p)
        theta = float(np.sqrt(x @ x))
        if not theta < CHART_LIMIT:
            raise ChartError(f"bisection point x = {x} leaves the exponential chart")
        max_x = max(max_x, theta)
        return x

    def F(p):
        return point_momentum(chart(p), p, in_sign) - mu

    p = mu.copy()
    r = F(p)
    norm = float(np.max(np.abs(r)))
    iterations = 0
    eps = ncfg.fd_step
    while norm > ncfg.tolerance:
        if iterations >= ncfg.max_iterations:
            raise NewtonFailure(f"Newton did not converge in {ncfg.max_iterations} iterations (residual {norm:.3e})", norm)
        J = np.empty((3, 3))
        for j in range(3):
            dp = np.zeros(3)
            dp[j] = eps
            J[:, j] = (F(p + dp) - F(p - dp)) / (2.0 * eps)
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise NewtonFailure("singular Newton Jacobian", norm) from None
        iterations += 1
        step = 1.0
        for _ in range(ncfg.max_halvings + 1):
            trial = p + step * delta
            r_trial = F(trial)
            n_trial = float(np.max(np.abs(r_trial)))
            if n_trial < norm:
                break
            step *= 0.5
        else:
            # No decrease: at round-off level near the tolerance, or stuck.
            raise NewtonFailure(f"Newton stalled at residual {norm:.3e}", norm)
        p, r, norm = trial, r_trial, n_trial
    mu_next = point_momentum(chart(p), p, out_sign)
    return mu_next, StepDiagnostics(iterations, norm, max_x)


def bisection_step(net: GeneratingFunctionNet, h: float, mu, ncfg: NewtonConfig = NewtonConfig(), swap_roles: bool = SWAP_ROLES):
    """One step of size ``h`` of the learned Poisson integrator."""
    if not h >= 0:
        raise ValueError("step size must be nonnegative")
    mu = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(mu)):
        raise ValueError("mu must be finite")
    return solve_bisection(chart_coordinate(net, h), mu, ncfg, swap_roles)


def rollout(
    net: GeneratingFunctionNet,
    h: float,
    mu0,
    n: int,
    ncfg: NewtonConfig = NewtonConfig(),
    hamiltonian: QuadraticHamiltonian | None = None,
    swap_roles: bool = SWAP_ROLES,
):
    """Iterate :func:`bisection_step`; returns the trajectory and per-step diagnostics.

    On Newton failure the exception carries ``step_index`` and the partial
    trajectory as ``partial``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    ham = hamiltonian or QuadraticHamiltonian()
    states = np.empty((n + 1, 3))
    states[0] = mu0
    diagnostics = []
    x_of_p = chart_coordinate(net, h)
    for k in range(n):
        try:
            states[k + 1], diag = solve_bisection(x_of_p, states[k], ncfg, swap_roles)
        except (NewtonFailure, ChartError) as exc:
            exc.step_index = k + 1
            exc.partial = (TrajectoryRecord.from_states(ham, h, states[: k + 1]), diagnostics)
            raise
        diagnostics.append(diag)
    return TrajectoryRecord.from_states(ham, h, states), diagnostics


@dataclass
class OracleComparison:
    times: np.ndarray
    error_norm: np.ndarray
    h_model: np.ndarray
    h_oracle: np.ndarray
    c_model: np.ndarray
    c_oracle: np.ndarray
    oracle_states: np.ndarray = field(repr=False)

    @property
    def h_drift(self) -> np.ndarray:
        return self.h_model - self.h_model[0]

    @property
    def c_drift(self) -> np.ndarray:
        return self.c_model - self.c_model[0]


def compare_with_oracle(traj: TrajectoryRecord, h_cfg: QuadraticHamiltonian, oracle_substeps: int = 100) -> OracleComparison:
    """Distance to a fine RK4 run from the same start, plus H and C series of both."""
    if oracle_substeps < 1:
        raise ValueError("oracle_substeps must be at least 1")
    n = len(traj) - 1
    reference = rk4_sample(h_cfg, traj.states[0], traj.step_size, n, oracle_substeps)
    return OracleComparison(
        times=traj.times,
        error_norm=np.linalg.norm(traj.states - reference, axis=1),
        h_model=np.asarray(h_cfg(traj.states)),
        h_oracle=np.asarray(h_cfg(reference)),
        c_model=np.asarray(casimir(traj.states)),
        c_oracle=np.asarray(casimir(reference)),
        oracle_states=reference,
    )

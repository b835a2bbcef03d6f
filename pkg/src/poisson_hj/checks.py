"""Training-independent property checks, run by ``poisson-hj check``.

Each check returns the measured worst-case value and the threshold it must
stay at or below.
"""
from __future__ import annotations

import numpy as np

from .groupoid import GroupoidPoint, pushforward_check, source, target, unit
from .integrator import NewtonConfig, bisection_step
from .lie_poisson import (
    QuadraticHamiltonian,
    casimir,
    dexp,
    euler_rhs,
    exp_so3,
    lie_poisson_bivector,
    log_so3,
)
from .network import GeneratingFunctionNet, eval_input_grad, eval_s, init_xavier, loss_and_weight_grad
from .training import hj_residual_fn

HAM = QuadraticHamiltonian()


def _ball(rng, n, radius):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / 3.0)


def check_exp_orthogonality(rng):
    worst = 0.0
    for x in _ball(rng, 100, 3.1):
        R = exp_so3(x)
        worst = max(worst, np.abs(R @ R.T - np.eye(3)).max(), abs(np.linalg.det(R) - 1.0))
    return worst, 1e-12


def dexp_fd_residual(x, xi, eps=1e-6) -> float:
    """``|dexp(x) y'(0) - xi|`` for the curve ``exp(y(s)) = exp(s xi) exp(x)``."""
    R = exp_so3(x)
    y_plus = log_so3(exp_so3(eps * xi) @ R)
    y_minus = log_so3(exp_so3(-eps * xi) @ R)
    y_dot = (y_plus - y_minus) / (2.0 * eps)
    return float(np.abs(dexp(x) @ y_dot - xi).max())


def check_dexp_fd(rng):
    xs = _ball(rng, 100, 1.0)
    xis = rng.normal(size=(100, 3))
    return max(dexp_fd_residual(x, xi) for x, xi in zip(xs, xis)), 1e-6


def check_dexp_branches(rng):
    worst = 0.0
    for theta in np.linspace(0.25e-4, 4e-4, 50):
        axis = rng.normal(size=3)
        x = theta * axis / np.linalg.norm(axis)
        worst = max(worst, np.abs(dexp(x, series=True) - dexp(x, series=False)).max())
    return worst, 1e-12


def check_casimir_kernel(rng):
    worst = 0.0
    for mu in rng.uniform(-10, 10, size=(100, 3)):
        # elementwise products: each row sum is a*b + (-b*a), exactly zero without FMA
        worst = max(worst, np.abs(np.sum(lie_poisson_bivector(mu) * mu, axis=1)).max())
    return worst, 0.0


def conservation_residual(mu) -> float:
    """Round-off in ``grad H . f`` and ``mu . f`` (``f = euler_rhs(mu)``) relative to the cancelling terms."""
    mu = np.asarray(mu, dtype=float)
    peak = np.max(np.abs(mu))
    if peak == 0.0:
        return 0.0
    # the ratio is scale invariant; an exact power-of-two rescale avoids underflow
    mu = np.ldexp(mu, -np.frexp(peak)[1])
    a = mu * HAM.inverse_inertia
    f = euler_rhs(HAM, mu)
    m1, a1 = np.sum(np.abs(mu)), np.sum(np.abs(a))
    return max(abs(np.dot(a, f)) / (a1 * a1 * m1), abs(np.dot(mu, f)) / (m1 * a1 * m1))


def check_euler_conservation(rng):
    return max(conservation_residual(mu) for mu in _ball(rng, 100, 10.0)), 4.0 * np.finfo(float).eps


def _chart_points(rng, n=100):
    return [GroupoidPoint(x, p) for x, p in zip(_ball(rng, n, 0.5), _ball(rng, n, 3.0))]


def check_source_poisson(rng):
    return max(pushforward_check("source", g, 1e-6) for g in _chart_points(rng)), 1e-5


def check_target_anti_poisson(rng):
    return max(pushforward_check("target", g, 1e-6) for g in _chart_points(rng)), 1e-5


def check_unit_roundtrip(rng):
    worst = 0.0
    for mu in rng.uniform(-5, 5, size=(100, 3)):
        g = unit(mu)
        worst = max(worst, np.abs(source(g) - mu).max(), np.abs(target(g) - mu).max())
    return worst, 0.0


def input_grad_fd_error(net, t, p, eps=1e-6) -> float:
    """Worst relative error of ``eval_input_grad`` against central differences of ``eval_s``."""
    grad = eval_input_grad(net, t, p)
    analytic = np.concatenate([[grad.dt], grad.dp])
    z = np.concatenate([[t], p])
    fd = np.empty(4)
    for i in range(4):
        dz = np.zeros(4)
        dz[i] = eps
        fd[i] = (eval_s(net, *_split(z + dz)) - eval_s(net, *_split(z - dz))) / (2.0 * eps)
    return float(np.max(np.abs(analytic - fd) / np.maximum(np.abs(fd), 1.0)))


def _split(z):
    return z[0], z[1:]


def check_input_gradient(rng, net=None):
    worst = 0.0
    for i in range(20):
        model = net if net is not None else init_xavier((4, 16, 16, 1), int(rng.integers(2**31)))
        t = rng.uniform(-1.0, 1.0)
        p = _ball(rng, 1, 3.0)[0]
        worst = max(worst, input_grad_fd_error(model, t, p))
    return worst, 1e-6


def weight_grad_fd_error(net, batch, residual_fn, eps=1e-6) -> float:
    """``max|g - g_fd| / max|g_fd|`` over every parameter."""
    _, grad = loss_and_weight_grad(net, batch, residual_fn)
    fd = np.empty_like(grad)
    probe = net.copy()
    for i in range(grad.size):
        original = probe.params[i]
        probe.params[i] = original + eps
        plus, _ = loss_and_weight_grad(probe, batch, residual_fn)
        probe.params[i] = original - eps
        minus, _ = loss_and_weight_grad(probe, batch, residual_fn)
        probe.params[i] = original
        fd[i] = (plus - minus) / (2.0 * eps)
    return float(np.max(np.abs(grad - fd)) / max(np.max(np.abs(fd)), np.finfo(float).tiny))


def check_weight_gradient(rng):
    net = init_xavier((4, 8, 8, 1), int(rng.integers(2**31)))
    net.params += 0.1 * rng.normal(size=net.params.shape)
    batch = (rng.uniform(0.0, 0.15, 10), rng.uniform(-3.0, 3.0, (10, 3)))
    return weight_grad_fd_error(net, batch, hj_residual_fn(HAM)), 1e-6


def check_identity_at_zero(rng, net=None):
    worst = 0.0
    for i in range(20):
        model = net if net is not None else init_xavier((4, 64, 64, 64, 1), int(rng.integers(2**31)))
        mu = rng.uniform(-3, 3, size=3)
        worst = max(worst, abs(eval_s(model, 0.0, mu)))
        mu_next, _ = bisection_step(model, 0.0, mu)
        worst = max(worst, np.abs(mu_next - mu).max())
    return worst, 0.0


def check_casimir_exactness(rng, net=None):
    """``|dC| / (100 tol (1 + |mu|^2))`` for converged steps; must stay at or below 1."""
    ncfg = NewtonConfig()
    worst = 0.0
    for i in range(20):
        model = net if net is not None else init_xavier((4, 64, 64, 64, 1), int(rng.integers(2**31)))
        mu = _ball(rng, 1, 4.0)[0]
        h = rng.uniform(0.0, 0.2)
        mu_next, _ = bisection_step(model, h, mu, ncfg)
        bound = 100.0 * ncfg.tolerance * (1.0 + mu @ mu)
        worst = max(worst, abs(casimir(mu_next) - casimir(mu)) / bound)
    return worst, 1.0


STRUCTURAL = {
    "exp_so3_orthogonality": check_exp_orthogonality,
    "dexp_finite_difference": check_dexp_fd,
    "dexp_branch_agreement": check_dexp_branches,
    "casimir_in_bivector_kernel": check_casimir_kernel,
    "euler_rhs_conserves_h_and_c": check_euler_conservation,
    "source_is_poisson": check_source_poisson,
    "target_is_anti_poisson": check_target_anti_poisson,
    "unit_roundtrip": check_unit_roundtrip,
    "input_gradient_finite_difference": check_input_gradient,
    "weight_gradient_finite_difference": check_weight_gradient,
    "identity_at_zero_step": check_identity_at_zero,
    "casimir_exactness": check_casimir_exactness,
}
MODEL_AWARE = {"input_gradient_finite_difference", "identity_at_zero_step", "casimir_exactness"}


def run_checks(net: GeneratingFunctionNet | None = None, seed: int = 0) -> list[dict]:
    """Run every property once; model-aware checks use ``net`` when given."""
    results = []
    for name, fn in STRUCTURAL.items():
        rng = np.random.default_rng([seed, len(results)])
        try:
            if net is not None and name in MODEL_AWARE:
                measured, threshold = fn(rng, net)
            else:
                measured, threshold = fn(rng)
            passed = bool(measured <= threshold)
            error = None
        except Exception as exc:  # noqa: BLE001 - reported, not raised
            measured, threshold, passed, error = float("nan"), float("nan"), False, f"{type(exc).__name__}: {exc}"
        entry = {"name": name, "passed": passed, "measured": float(measured), "threshold": float(threshold)}
        if error:
            entry["error"] = error
        results.append(entry)
    return results

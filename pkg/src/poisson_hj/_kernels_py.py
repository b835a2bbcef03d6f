"""Pure numpy kernels; reference semantics for the compiled ``_kernels`` module.

Layout conventions shared by both backends:

* hidden pre-activations are stacked as ``A[0]`` (value, bias not yet added)
  and ``A[1:5]`` (directional derivatives along t, p1, p2, p3), shape
  ``(5, batch, width)``;
* momentum maps use ``mu = p + s/2 (x cross p) + c(|x|) (x (x.p) - |x|^2 p)``,
  which is ``dexp(s x)^{-T} p`` written with the closed-form inverse of dexp.
"""
import numpy as np

NAME = "python"

# Below this angle c(theta) and c'(theta)/theta come from their Taylor series.
SERIES_THRESHOLD = 0.1


def _c_coefficients(theta):
    """``c = (1 - (t/2) cot(t/2)) / t^2`` and ``c'(t) / t``, elementwise."""
    theta = np.asarray(theta, dtype=float)
    t2 = theta * theta
    c_series = 1.0 / 12.0 + t2 * (1.0 / 720.0 + t2 * (1.0 / 30240.0 + t2 * (1.0 / 1209600.0 + t2 / 47900160.0)))
    d_series = 2.0 / 720.0 + t2 * (4.0 / 30240.0 + t2 * (6.0 / 1209600.0 + t2 * 8.0 / 47900160.0))
    big = theta >= SERIES_THRESHOLD
    if not np.any(big):
        return c_series, d_series
    tb = np.where(big, theta, 1.0)
    u = 0.5 * tb
    cot = np.cos(u) / np.sin(u)
    k = u * cot
    dk = 0.5 * cot - 0.5 * u / np.sin(u) ** 2
    c_closed = (1.0 - k) / (tb * tb)
    d_closed = -dk / tb**3 - 2.0 * (1.0 - k) / tb**4
    return np.where(big, c_closed, c_series), np.where(big, d_closed, d_series)


def momentum(X, P, sign):
    """Rows of ``dexp(sign * x)^{-T} p`` for ``X, P`` of shape ``(B, 3)``."""
    X = np.asarray(X, dtype=float)
    P = np.asarray(P, dtype=float)
    theta = np.sqrt(np.sum(X * X, axis=-1))
    c, _ = _c_coefficients(theta)
    xp = np.sum(X * P, axis=-1)
    t2 = theta * theta
    return P + (0.5 * sign) * np.cross(X, P) + c[..., None] * (X * xp[..., None] - t2[..., None] * P)


def energy_and_x_grad(X, P, inv_inertia, sign):
    """``E = H(momentum(x, p))`` and ``dE/dx`` for quadratic ``H``."""
    X = np.asarray(X, dtype=float)
    P = np.asarray(P, dtype=float)
    theta = np.sqrt(np.sum(X * X, axis=-1))
    c, dc = _c_coefficients(theta)
    xp = np.sum(X * P, axis=-1)
    t2 = theta * theta
    mu = P + (0.5 * sign) * np.cross(X, P) + c[:, None] * (X * xp[:, None] - t2[:, None] * P)
    g = mu * inv_inertia
    energy = 0.5 * np.sum(mu * g, axis=-1)
    gx = np.sum(g * X, axis=-1)
    gp = np.sum(g * P, axis=-1)
    grad = (
        (0.5 * sign) * np.cross(P, g)
        + (dc * (gx * xp - t2 * gp))[:, None] * X
        + c[:, None] * (xp[:, None] * g + gx[:, None] * P - 2.0 * gp[:, None] * X)
    )
    return energy, grad


def hidden_forward(A, bias):
    """tanh layer on value and tangents; returns activations ``Z`` and ``S = 1 - z^2``."""
    z = np.tanh(A[0] + bias)
    S = 1.0 - z * z
    Z = np.empty_like(A)
    Z[0] = z
    np.multiply(S, A[1:], out=Z[1:])
    return Z, S


def hidden_backward(Zbar, Z, S, A):
    """Adjoint of ``hidden_forward`` with respect to ``A`` (value and tangents)."""
    Abar = np.empty_like(A)
    np.multiply(S, Zbar[1:], out=Abar[1:])
    sbar = np.sum(Zbar[1:] * A[1:], axis=0)
    Abar[0] = (Zbar[0] - 2.0 * Z[0] * sbar) * S
    return Abar


def point_net_eval(weights, biases, t, p):
    """Raw network output ``N`` and its gradient in ``(t, p1, p2, p3)`` at one point."""
    z = np.array([t, p[0], p[1], p[2]], dtype=float)
    dz = np.eye(4)
    last = len(weights) - 1
    for i, (W, b) in enumerate(zip(weights, biases)):
        a = W @ z + b
        da = dz @ W.T
        if i == last:
            return float(a[0]), da[:, 0].copy()
        z = np.tanh(a)
        dz = (1.0 - z * z) * da
    raise ValueError("network has no layers")


def point_momentum(x, p, sign):
    return momentum(np.asarray(x, dtype=float)[None, :], np.asarray(p, dtype=float)[None, :], sign)[0]

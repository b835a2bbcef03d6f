# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contracts as ``_kernels_py``."""
import numpy as np

from libc.math cimport cos, sin, sqrt, tanh

NAME = "cython"

cdef double SERIES_THRESHOLD = 0.1


cdef inline void _coefficients(double theta, double *c, double *dc) noexcept nogil:
    cdef double t2 = theta * theta
    cdef double u, sn, cot, k, dk
    if theta < SERIES_THRESHOLD:
        c[0] = 1.0 / 12.0 + t2 * (1.0 / 720.0 + t2 * (1.0 / 30240.0 + t2 * (1.0 / 1209600.0 + t2 / 47900160.0)))
        dc[0] = 2.0 / 720.0 + t2 * (4.0 / 30240.0 + t2 * (6.0 / 1209600.0 + t2 * 8.0 / 47900160.0))
    else:
        u = 0.5 * theta
        sn = sin(u)
        cot = cos(u) / sn
        k = u * cot
        dk = 0.5 * cot - 0.5 * u / (sn * sn)
        c[0] = (1.0 - k) / t2
        dc[0] = -dk / (t2 * theta) - 2.0 * (1.0 - k) / (t2 * t2)


cdef inline void _momentum(const double *x, const double *p, double sign, double *mu) noexcept nogil:
    cdef double t2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
    cdef double c, dc, xp
    _coefficients(sqrt(t2), &c, &dc)
    xp = x[0] * p[0] + x[1] * p[1] + x[2] * p[2]
    mu[0] = p[0] + 0.5 * sign * (x[1] * p[2] - x[2] * p[1]) + c * (x[0] * xp - t2 * p[0])
    mu[1] = p[1] + 0.5 * sign * (x[2] * p[0] - x[0] * p[2]) + c * (x[1] * xp - t2 * p[1])
    mu[2] = p[2] + 0.5 * sign * (x[0] * p[1] - x[1] * p[0]) + c * (x[2] * xp - t2 * p[2])


def momentum(X, P, double sign):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] p = np.ascontiguousarray(P, dtype=np.float64)
    out = np.empty((x.shape[0], 3))
    cdef double[:, ::1] mu = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(x.shape[0]):
            _momentum(&x[i, 0], &p[i, 0], sign, &mu[i, 0])
    return out


def point_momentum(x, p, double sign):
    cdef double xb[3]
    cdef double pb[3]
    cdef double mu[3]
    cdef int j
    for j in range(3):
        xb[j] = x[j]
        pb[j] = p[j]
    _momentum(xb, pb, sign, mu)
    return np.array([mu[0], mu[1], mu[2]])


def energy_and_x_grad(X, P, inv_inertia, double sign):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] p = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(inv_inertia, dtype=np.float64)
    cdef Py_ssize_t B = x.shape[0], i
    energy_arr = np.empty(B)
    grad_arr = np.empty((B, 3))
    cdef double[::1] energy = energy_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double mu[3]
    cdef double g[3]
    cdef double t2, c, dc, xp, gx, gp, radial
    cdef int j
    with nogil:
        for i in range(B):
            t2 = x[i, 0] * x[i, 0] + x[i, 1] * x[i, 1] + x[i, 2] * x[i, 2]
            _coefficients(sqrt(t2), &c, &dc)
            xp = x[i, 0] * p[i, 0] + x[i, 1] * p[i, 1] + x[i, 2] * p[i, 2]
            mu[0] = p[i, 0] + 0.5 * sign * (x[i, 1] * p[i, 2] - x[i, 2] * p[i, 1]) + c * (x[i, 0] * xp - t2 * p[i, 0])
            mu[1] = p[i, 1] + 0.5 * sign * (x[i, 2] * p[i, 0] - x[i, 0] * p[i, 2]) + c * (x[i, 1] * xp - t2 * p[i, 1])
            mu[2] = p[i, 2] + 0.5 * sign * (x[i, 0] * p[i, 1] - x[i, 1] * p[i, 0]) + c * (x[i, 2] * xp - t2 * p[i, 2])
            for j in range(3):
                g[j] = mu[j] * w[j]
            energy[i] = 0.5 * (mu[0] * g[0] + mu[1] * g[1] + mu[2] * g[2])
            gx = g[0] * x[i, 0] + g[1] * x[i, 1] + g[2] * x[i, 2]
            gp = g[0] * p[i, 0] + g[1] * p[i, 1] + g[2] * p[i, 2]
            radial = dc * (gx * xp - t2 * gp)
            grad[i, 0] = 0.5 * sign * (p[i, 1] * g[2] - p[i, 2] * g[1])
            grad[i, 1] = 0.5 * sign * (p[i, 2] * g[0] - p[i, 0] * g[2])
            grad[i, 2] = 0.5 * sign * (p[i, 0] * g[1] - p[i, 1] * g[0])
            for j in range(3):
                grad[i, j] += radial * x[i, j] + c * (xp * g[j] + gx * p[i, j] - 2.0 * gp * x[i, j])
    return energy_arr, grad_arr


def hidden_forward(A_in, bias_in):
    # numpy's vectorised tanh is several times faster than scalar libm here
    z_arr = np.tanh(np.add(A_in[0], bias_in))
    cdef const double[:, :, ::1] A = A_in
    cdef const double[:, ::1] zv = z_arr
    cdef Py_ssize_t m = A.shape[0], B = A.shape[1], n = A.shape[2], i, j, k
    Z_arr = np.empty((m, B, n))
    S_arr = np.empty((B, n))
    cdef double[:, :, ::1] Z = Z_arr
    cdef double[:, ::1] S = S_arr
    cdef double z
    with nogil:
        for i in range(B):
            for j in range(n):
                z = zv[i, j]
                Z[0, i, j] = z
                S[i, j] = 1.0 - z * z
            for k in range(1, m):
                for j in range(n):
                    Z[k, i, j] = S[i, j] * A[k, i, j]
    return Z_arr, S_arr


def hidden_backward(Zbar_in, Z_in, S_in, A_in):
    cdef const double[:, :, ::1] Zbar = Zbar_in
    cdef const double[:, :, ::1] Z = Z_in
    cdef const double[:, ::1] S = S_in
    cdef const double[:, :, ::1] A = A_in
    cdef Py_ssize_t m = A.shape[0], B = A.shape[1], n = A.shape[2], i, j, k
    Abar_arr = np.empty((m, B, n))
    cdef double[:, :, ::1] Abar = Abar_arr
    cdef double s, sbar
    with nogil:
        for i in range(B):
            for j in range(n):
                s = S[i, j]
                sbar = 0.0
                for k in range(1, m):
                    Abar[k, i, j] = s * Zbar[k, i, j]
                    sbar = sbar + Zbar[k, i, j] * A[k, i, j]
                Abar[0, i, j] = (Zbar[0, i, j] - 2.0 * Z[0, i, j] * sbar) * s
    return Abar_arr


def point_net_eval(list weights, list biases, double t, p):
    """Value and (t, p)-gradient of the raw network at a single input."""
    cdef Py_ssize_t L = len(weights), l, i, j, k, n_in, n_out
    cdef Py_ssize_t width = 4
    for l in range(L):
        width = max(width, (<object>weights[l]).shape[0])
    buf = np.zeros((2, 5, width))
    cdef double[:, :, ::1] work = buf
    cdef double[:, ::1] W
    cdef const double[::1] b
    cdef double acc, z, s
    cdef int cur = 0, nxt
    cdef double[4] dN
    work[0, 0, 0] = t
    work[0, 0, 1] = p[0]
    work[0, 0, 2] = p[1]
    work[0, 0, 3] = p[2]
    for k in range(4):
        work[0, k + 1, k] = 1.0
    for l in range(L):
        W = weights[l]
        b = biases[l]
        n_out = W.shape[0]
        n_in = W.shape[1]
        nxt = 1 - cur
        for i in range(n_out):
            for k in range(5):
                acc = 0.0
                for j in range(n_in):
                    acc = acc + W[i, j] * work[cur, k, j]
                work[nxt, k, i] = acc
            if l < L - 1:
                z = tanh(work[nxt, 0, i] + b[i])
                s = 1.0 - z * z
                work[nxt, 0, i] = z
                for k in range(1, 5):
                    work[nxt, k, i] = s * work[nxt, k, i]
            else:
                work[nxt, 0, i] = work[nxt, 0, i] + b[i]
        cur = nxt
    for k in range(4):
        dN[k] = work[cur, k + 1, 0]
    return work[cur, 0, 0], np.array([dN[0], dN[1], dN[2], dN[3]])

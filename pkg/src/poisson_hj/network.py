"""Generating-function network ``S(t, p; W) = t * N(t, p; W)``.

``N`` is a tanh MLP on the four inputs ``(t, p1, p2, p3)``.  The explicit
factor ``t`` makes ``S(0, .) = 0`` for every weight vector, so the induced
time-``t`` map is the identity at ``t = 0``.

Input derivatives are propagated forward (value plus four tangents through
every layer).  The weight gradient of a loss built from those derivatives is
obtained by running that augmented pass in reverse.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import _backend

FORMAT_VERSION = 1
N_INPUTS = 4


class WeightFileError(ValueError):
    """Malformed or unreadable weight file."""


class DimensionError(WeightFileError):
    """Stored arrays do not match the declared layer sizes."""


def _check_sizes(layer_sizes) -> tuple[int, ...]:
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 2 or sizes[0] != N_INPUTS or sizes[-1] != 1 or min(sizes) < 1:
        raise ValueError(f"layer sizes must run from {N_INPUTS} inputs to 1 output, got {list(layer_sizes)}")
    return sizes


def n_parameters(layer_sizes) -> int:
    sizes = _check_sizes(layer_sizes)
    return sum(n_out * (n_in + 1) for n_in, n_out in zip(sizes[:-1], sizes[1:]))


@dataclass(eq=False)
class GeneratingFunctionNet:
    """Weights and biases stored in one flat vector; ``weights``/``biases`` are views into it."""

    layer_sizes: tuple[int, ...]
    params: np.ndarray = None
    seed: int | None = None
    training_config_digest: str | None = None
    weights: list = field(init=False, repr=False)
    biases: list = field(init=False, repr=False)

    def __post_init__(self):
        self.layer_sizes = _check_sizes(self.layer_sizes)
        size = n_parameters(self.layer_sizes)
        if self.params is None:
            self.params = np.zeros(size)
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        if self.params.shape != (size,):
            raise DimensionError(f"expected {size} parameters for sizes {list(self.layer_sizes)}, got {self.params.shape}")
        self.weights, self.biases = [], []
        offset = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            self.weights.append(self.params[offset : offset + n_in * n_out].reshape(n_out, n_in))
            offset += n_in * n_out
            self.biases.append(self.params[offset : offset + n_out])
            offset += n_out

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "GeneratingFunctionNet":
        return GeneratingFunctionNet(self.layer_sizes, self.params.copy(), self.seed, self.training_config_digest)

    def __eq__(self, other):
        if not isinstance(other, GeneratingFunctionNet):
            return NotImplemented
        return (
            self.layer_sizes == other.layer_sizes
            and np.array_equal(self.params, other.params)
            and self.seed == other.seed
            and self.training_config_digest == other.training_config_digest
        )


def init_xavier(layer_sizes, seed: int) -> GeneratingFunctionNet:
    """Uniform Xavier weights, zero biases."""
    net = GeneratingFunctionNet(layer_sizes, seed=seed)
    rng = np.random.default_rng(seed)
    for W in net.weights:
        n_out, n_in = W.shape
        bound = math.sqrt(6.0 / (n_in + n_out))
        W[...] = rng.uniform(-bound, bound, size=W.shape)
    return net


class InputGradient(NamedTuple):
    value: float
    dt: float
    dp: np.ndarray


def raw_output(net: GeneratingFunctionNet, t: float, p) -> tuple[float, np.ndarray]:
    """``N(t, p)`` and its gradient in ``(t, p1, p2, p3)``."""
    return _backend.kernels.point_net_eval(net.weights, net.biases, float(t), np.asarray(p, dtype=float))


def eval_s(net: GeneratingFunctionNet, t: float, p) -> float:
    n, _ = raw_output(net, t, p)
    return t * n


def eval_input_grad(net: GeneratingFunctionNet, t: float, p) -> InputGradient:
    n, dn = raw_output(net, t, p)
    return InputGradient(t * n, n + t * dn[0], t * dn[1:])


# --- batched augmented pass -------------------------------------------------


def _as_batch(batch) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(batch, tuple) and len(batch) == 2 and np.ndim(batch[0]) == 1 and np.ndim(batch[1]) == 2:
        T, P = batch
    else:
        pairs = list(batch)
        T = np.array([float(t) for t, _ in pairs])
        P = np.array([np.asarray(p, dtype=float) for _, p in pairs]).reshape(len(pairs), 3)
    T = np.ascontiguousarray(T, dtype=np.float64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    if T.shape[0] == 0:
        raise ValueError("empty collocation batch")
    if P.shape != (T.shape[0], 3):
        raise ValueError(f"batch shapes disagree: t {T.shape}, p {P.shape}")
    return T, P


def _forward(net, T, P):
    B = T.shape[0]
    kernels = _backend.kernels
    # First layer: the input tangents are unit vectors, so the tangent
    # pre-activations are just columns of the weight matrix.
    W = net.weights[0]
    A = np.empty((5, B, W.shape[0]))
    np.multiply(T[:, None], W[:, 0], out=A[0])
    A[0] += P @ W[:, 1:].T
    A[1:] = W.T[:, None, :]
    Z, S = kernels.hidden_forward(A, net.biases[0])
    cache = [(None, A, S, Z)]
    for W, b in zip(net.weights[1:-1], net.biases[1:-1]):
        A = (Z.reshape(5 * B, -1) @ W.T).reshape(5, B, W.shape[0])
        Z_next, S = kernels.hidden_forward(A, b)
        cache.append((Z, A, S, Z_next))
        Z = Z_next
    out = (Z.reshape(5 * B, -1) @ net.weights[-1][0]).reshape(5, B)
    out[0] += net.biases[-1][0]
    return out, cache, Z


def _backward(net, out_bar, cache, Z_last, T, P):
    B = out_bar.shape[1]
    grads_W = [None] * net.n_layers
    grads_b = [None] * net.n_layers
    grads_W[-1] = (out_bar.reshape(5 * B) @ Z_last.reshape(5 * B, -1))[None, :]
    grads_b[-1] = np.array([out_bar[0].sum()])
    Z_bar = out_bar[:, :, None] * net.weights[-1][0]
    kernels = _backend.kernels
    for layer in range(net.n_layers - 2, 0, -1):
        Z_prev, A, S, Z = cache[layer]
        A_bar = kernels.hidden_backward(Z_bar, Z, S, A)
        flat = A_bar.reshape(5 * B, -1)
        grads_W[layer] = flat.T @ Z_prev.reshape(5 * B, -1)
        grads_b[layer] = A_bar[0].sum(axis=0)
        Z_bar = (flat @ net.weights[layer]).reshape(Z_prev.shape)
    _, A, S, Z = cache[0]
    A_bar = kernels.hidden_backward(Z_bar, Z, S, A)
    gW = np.empty_like(net.weights[0])
    gW[:, 0] = A_bar[0].T @ T
    gW[:, 1:] = A_bar[0].T @ P
    gW += A_bar[1:].sum(axis=1).T
    grads_W[0] = gW
    grads_b[0] = A_bar[0].sum(axis=0)
    grad = np.empty_like(net.params)
    offset = 0
    for gW, gb in zip(grads_W, grads_b):
        grad[offset : offset + gW.size] = gW.ravel()
        offset += gW.size
        grad[offset : offset + gb.size] = gb
        offset += gb.size
    return grad


def input_grads_batch(net: GeneratingFunctionNet, batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched ``(S, dS/dt, dS/dp)`` at the collocation points."""
    T, P = _as_batch(batch)
    out, _, _ = _forward(net, T, P)
    return T * out[0], out[0] + T * out[1], T[:, None] * out[2:].T


class Residual(NamedTuple):
    """Batched residual values and their partials in ``(S, dS/dt, dS/dp)``.

    ``valid`` masks points kept in the mean (``None`` keeps all).
    """

    value: np.ndarray
    d_value: np.ndarray
    d_dt: np.ndarray
    d_dp: np.ndarray
    valid: np.ndarray | None = None


ResidualFn = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray], Residual]


def loss_and_weight_grad(net: GeneratingFunctionNet, batch, residual_fn: ResidualFn, return_dropped: bool = False):
    """Mean-square residual over the batch and its exact gradient in ``net.params``.

    ``residual_fn(s, s_t, s_p, t, p)`` receives batched network derivatives
    and returns a :class:`Residual`.
    """
    T, P = _as_batch(batch)
    out, cache, Z_last = _forward(net, T, P)
    s = T * out[0]
    s_t = out[0] + T * out[1]
    s_p = T[:, None] * out[2:].T
    res = residual_fn(s, s_t, s_p, T, P)
    r = np.asarray(res.value, dtype=float)
    if res.valid is None:
        keep = np.ones(r.shape, dtype=bool)
    else:
        keep = np.asarray(res.valid, dtype=bool)
    n_keep = int(keep.sum())
    dropped = r.size - n_keep
    if n_keep == 0:
        loss, grad = 0.0, np.zeros_like(net.params)
    else:
        r_kept = np.where(keep, r, 0.0)
        loss = float(np.sum(r_kept * r_kept) / n_keep)
        r_bar = 2.0 * r_kept / n_keep
        out_bar = np.empty_like(out)
        out_bar[0] = r_bar * (res.d_dt + T * res.d_value)
        out_bar[1] = r_bar * res.d_dt * T
        out_bar[2:] = (r_bar * T)[None, :] * np.asarray(res.d_dp, dtype=float).T
        grad = _backward(net, out_bar, cache, Z_last, T, P)
    if return_dropped:
        return loss, grad, dropped
    return loss, grad


# --- persistence ------------------------------------------------------------


def to_document(net: GeneratingFunctionNet) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "activation": "tanh",
        "structural_t_factor": True,
        "weights": [W.tolist() for W in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    if net.seed is not None:
        doc["seed"] = int(net.seed)
    if net.training_config_digest is not None:
        doc["training_config_digest"] = net.training_config_digest
    return doc


def save_weights(net: GeneratingFunctionNet, path) -> None:
    if not np.all(np.isfinite(net.params)):
        raise ValueError("refusing to save non-finite parameters")
    Path(path).write_text(json.dumps(to_document(net), indent=1) + "\n")


def from_document(doc) -> GeneratingFunctionNet:
    if not isinstance(doc, dict):
        raise WeightFileError("weight file must hold a JSON object")
    missing = [k for k in ("format_version", "layer_sizes", "weights", "biases") if k not in doc]
    if missing:
        raise WeightFileError(f"weight file missing fields: {', '.join(missing)}")
    if doc["format_version"] != FORMAT_VERSION:
        raise WeightFileError(f"unsupported format_version {doc['format_version']!r}")
    if doc.get("activation", "tanh") != "tanh":
        raise WeightFileError(f"unsupported activation {doc['activation']!r}")
    if doc.get("structural_t_factor", True) is not True:
        raise WeightFileError("only networks with the structural t factor are supported")
    try:
        sizes = _check_sizes(doc["layer_sizes"])
    except (TypeError, ValueError) as exc:
        raise DimensionError(str(exc)) from None
    n_layers = len(sizes) - 1
    if len(doc["weights"]) != n_layers or len(doc["biases"]) != n_layers:
        raise DimensionError(f"{len(sizes)} layer sizes need {n_layers} weight matrices and bias vectors")
    chunks = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        try:
            W = np.array(doc["weights"][i], dtype=np.float64)
            b = np.array(doc["biases"][i], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise DimensionError(f"layer {i}: {exc}") from None
        if W.shape != (n_out, n_in):
            raise DimensionError(f"layer {i}: weight shape {W.shape} does not match sizes ({n_out}, {n_in})")
        if b.shape != (n_out,):
            raise DimensionError(f"layer {i}: bias shape {b.shape} does not match size {n_out}")
        chunks += [W.ravel(), b]
    params = np.concatenate(chunks)
    if not np.all(np.isfinite(params)):
        raise WeightFileError("weight file contains non-finite values")
    return GeneratingFunctionNet(sizes, params, doc.get("seed"), doc.get("training_config_digest"))


def load_weights(path) -> GeneratingFunctionNet:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise WeightFileError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WeightFileError(f"{path}: not valid JSON ({exc})") from None
    return from_document(doc)

"""Residual training of the generating function.

The loss is the mean square of

    r(t, p) = dS/dt(t, p) + H(source(dS/dp(t, p), p))

over collocation points ``(t, p)`` sampled uniformly in ``[0, t_max] x box``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from .groupoid import SOURCE_SIGN, GroupoidPoint, source
from .lie_poisson import CHART_LIMIT, ChartError, QuadraticHamiltonian
from .network import GeneratingFunctionNet, InputGradient, Residual, init_xavier, loss_and_weight_grad

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid or unreadable training configuration."""


@dataclass(frozen=True)
class TrainingConfig:
    p_box: tuple = ((-3.0, -3.0, -3.0), (3.0, 3.0, 3.0))
    t_max: float = 0.15
    n_points: int = 5000
    n_iterations: int = 5000
    batch_size: int = 5000
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    layer_sizes: tuple = (4, 64, 64, 64, 1)
    seed: int = 0

    def __post_init__(self):
        lower, upper = (tuple(float(v) for v in corner) for corner in self.p_box)
        object.__setattr__(self, "p_box", (lower, upper))
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        self.validate()

    def validate(self):
        lower, upper = self.p_box
        if len(lower) != 3 or len(upper) != 3:
            raise ConfigError("p_box: expected two corners of three coordinates each")
        if not all(lo < hi for lo, hi in zip(lower, upper)):
            raise ConfigError("p_box: lower corner must be below upper corner in every coordinate")
        if not self.t_max > 0:
            raise ConfigError("t_max: must be positive")
        if self.n_points < 1:
            raise ConfigError("n_points: must be positive")
        if self.n_iterations < 0:
            raise ConfigError("n_iterations: must be nonnegative")
        if not 1 <= self.batch_size <= self.n_points:
            raise ConfigError("batch_size: must lie in [1, n_points]")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate: must be positive")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name}: must lie in (0, 1)")
        if not self.adam_epsilon > 0:
            raise ConfigError("adam_epsilon: must be positive")
        sizes = self.layer_sizes
        if len(sizes) < 2 or sizes[0] != 4 or sizes[-1] != 1 or min(sizes) < 1:
            raise ConfigError("layer_sizes: must start at 4 inputs and end at 1 output")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["p_box"] = [list(self.p_box[0]), list(self.p_box[1])]
        d["layer_sizes"] = list(self.layer_sizes)
        return d

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return "sha256:" + hashlib.sha256(canonical.encode()).hexdigest()

    @classmethod
    def from_dict(cls, doc) -> "TrainingConfig":
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown configuration field(s): {', '.join(unknown)}")
        types = {"n_points": int, "n_iterations": int, "batch_size": int, "seed": int}
        kwargs = {}
        for name, value in doc.items():
            want = types.get(name)
            if want is int and (isinstance(value, bool) or not isinstance(value, int)):
                raise ConfigError(f"{name}: expected an integer, got {value!r}")
            kwargs[name] = value
        try:
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            bad = next(iter(doc), "?")
            raise ConfigError(f"malformed configuration near field {bad!r}: {exc}") from None


PAPER_SCALE = dict(
    n_points=80_000,
    n_iterations=10_000,
    batch_size=80_000,
    learning_rate=1e-4,
    layer_sizes=(4, 500, 250, 250, 250, 1),
)


def paper_scale_config(**overrides) -> TrainingConfig:
    return TrainingConfig(**{**PAPER_SCALE, **overrides})


def load_config(path, base: dict | None = None) -> TrainingConfig:
    """Read a JSON config; fields missing from the file come from ``base`` then the defaults."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if base and isinstance(doc, dict):
        doc = {**base, **doc}
    return TrainingConfig.from_dict(doc)


def save_config(cfg: TrainingConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def _stream(seed: int, purpose: int) -> np.random.Generator:
    # Initialization uses default_rng(seed); other consumers get child streams.
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(purpose,)))


def sample_collocation(cfg: TrainingConfig, rng: np.random.Generator | None = None):
    """``n_points`` collocation pairs as arrays ``(t, p)`` of shapes (n,) and (n, 3)."""
    if rng is None:
        rng = _stream(cfg.seed, 1)
    lower, upper = (np.asarray(c) for c in cfg.p_box)
    p = rng.uniform(lower, upper, size=(cfg.n_points, 3))
    t = rng.uniform(0.0, cfg.t_max, size=cfg.n_points)
    return t, p


def hj_residual(grad: InputGradient, t: float, p, h: QuadraticHamiltonian) -> float:
    """Hamilton-Jacobi residual at one point, with the right-hand constant fixed to 0."""
    x = np.asarray(grad.dp, dtype=float)
    if not np.linalg.norm(x) < CHART_LIMIT:
        raise ChartError(f"dS/dp = {x} leaves the exponential chart")
    return float(grad.dt + h(source(GroupoidPoint(x, p))))


def hj_residual_fn(h: QuadraticHamiltonian):
    """Batched :func:`hj_residual` with partials, for :func:`loss_and_weight_grad`."""
    inv_inertia = h.inverse_inertia

    def residual(s, s_t, s_p, t, p):
        valid = np.sqrt(np.sum(s_p * s_p, axis=1)) < CHART_LIMIT
        x = s_p if valid.all() else np.where(valid[:, None], s_p, 0.0)
        energy, d_x = _backend.kernels.energy_and_x_grad(x, p, inv_inertia, SOURCE_SIGN)
        return Residual(s_t + energy, np.zeros_like(s), np.ones_like(s_t), d_x, valid)

    return residual


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros_like(cls, net: GeneratingFunctionNet) -> "AdamState":
        return cls(np.zeros_like(net.params), np.zeros_like(net.params))


def adam_update(state: AdamState, net: GeneratingFunctionNet, grad, cfg: TrainingConfig):
    """One bias-corrected Adam step, in place.  Returns ``(state, net)``."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != net.params.shape or state.first_moment.shape != net.params.shape:
        raise ValueError(f"shape mismatch: params {net.params.shape}, grad {grad.shape}, state {state.first_moment.shape}")
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    state.step_count += 1
    k = state.step_count
    state.first_moment[...] = b1 * state.first_moment + (1.0 - b1) * grad
    state.second_moment[...] = b2 * state.second_moment + (1.0 - b2) * (grad * grad)
    m_hat = state.first_moment / (1.0 - b1**k)
    v_hat = state.second_moment / (1.0 - b2**k)
    net.params -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)
    return state, net


@dataclass
class LossHistory:
    loss: list = field(default_factory=list)
    dropped_points: list = field(default_factory=list)

    def __len__(self):
        return len(self.loss)

    def append(self, loss: float, dropped: int):
        self.loss.append(float(loss))
        self.dropped_points.append(int(dropped))

    def csv_text(self) -> str:
        lines = ["iteration,loss,dropped_points"]
        lines += [f"{i},{loss!r},{d}" for i, (loss, d) in enumerate(zip(self.loss, self.dropped_points))]
        return "\n".join(lines) + "\n"


def train(cfg: TrainingConfig, hamiltonian: QuadraticHamiltonian | None = None, log_every: int = 500):
    """Fit ``S`` to the Hamilton-Jacobi equation with Adam.

    Returns the trained network and the per-iteration loss history (loss
    before each update).  Identical configs give bit-identical histories.
    """
    h = hamiltonian or QuadraticHamiltonian()
    net = init_xavier(cfg.layer_sizes, cfg.seed)
    net.training_config_digest = cfg.digest()
    t_all, p_all = sample_collocation(cfg, _stream(cfg.seed, 1))
    batch_rng = _stream(cfg.seed, 2)
    residual = hj_residual_fn(h)
    state = AdamState.zeros_like(net)
    history = LossHistory()
    full_batch = cfg.batch_size == cfg.n_points
    warned = False
    start = time.perf_counter()
    for it in range(cfg.n_iterations):
        if full_batch:
            batch = (t_all, p_all)
        else:
            idx = np.sort(batch_rng.choice(cfg.n_points, size=cfg.batch_size, replace=False))
            batch = (t_all[idx], p_all[idx])
        loss, grad, dropped = loss_and_weight_grad(net, batch, residual, return_dropped=True)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite loss or gradient at iteration {it}")
        if dropped and not warned:
            log.warning("iteration %d: %d collocation points left the chart and were excluded", it, dropped)
            warned = True
        history.append(loss, dropped)
        adam_update(state, net, grad, cfg)
        if log_every and (it % log_every == 0 or it == cfg.n_iterations - 1):
            log.info("iter %5d  loss %.6e  dropped %d  (%.1fs)", it, loss, dropped, time.perf_counter() - start)
    return net, history

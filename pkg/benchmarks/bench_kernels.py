"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--points 5000] [--repeat 5]

Reports the best-of-``repeat`` wall time for the individual kernels, one
full-batch training iteration (loss, gradient and Adam step) and a 200-step
rollout of the integrator.
"""
import argparse
import time

import numpy as np

from poisson_hj import _backend
from poisson_hj.integrator import rollout
from poisson_hj.lie_poisson import QuadraticHamiltonian
from poisson_hj.network import init_xavier, loss_and_weight_grad
from poisson_hj.training import AdamState, TrainingConfig, adam_update, hj_residual_fn, sample_collocation


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases(n_points):
    cfg = TrainingConfig(n_points=n_points, batch_size=n_points)
    ham = QuadraticHamiltonian()
    net = init_xavier(cfg.layer_sizes, 0)
    batch = sample_collocation(cfg)
    residual = hj_residual_fn(ham)
    rng = np.random.default_rng(0)
    X = 0.3 * rng.normal(size=(n_points, 3))
    P = batch[1]
    A = rng.normal(size=(5, n_points, 64))
    bias = rng.normal(size=64)
    Z, S = _backend.BACKENDS["python"].hidden_forward(A, bias)
    state = AdamState.zeros_like(net)

    def k():
        return _backend.kernels

    def train_step():
        _, grad = loss_and_weight_grad(net, batch, residual)
        adam_update(state, net, grad, cfg)

    return {
        "energy_and_x_grad": lambda: k().energy_and_x_grad(X, P, ham.inverse_inertia, -1.0),
        "hidden_forward": lambda: k().hidden_forward(A, bias),
        "hidden_backward": lambda: k().hidden_backward(A, Z, S, A),
        "training iteration": train_step,
        "rollout (200 steps)": lambda: rollout(net, 0.1, [1.0, 1.0, 2.0], 200),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=5000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    names = sorted(_backend.BACKENDS)
    if "cython" not in names:
        print("compiled extension not built; only the numpy fallback is available")
    results = {}
    for name in names:
        with _backend.use_backend(name):
            for case, fn in cases(args.points).items():
                fn()  # warm up
                results[case, name] = best_time(fn, args.repeat)

    header = f"{'case':<22}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else "")
    print(header)
    for case in cases(8):
        row = f"{case:<22}" + "".join(f"{results[case, n] * 1e3:>10.2f}ms" for n in names)
        if len(names) > 1:
            row += f"{results[case, 'python'] / results[case, 'cython']:>11.2f}x"
        print(row)


if __name__ == "__main__":
    main()

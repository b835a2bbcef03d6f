"""Command-line driver: ``poisson-hj {train,simulate,check,compare}``.

Every command writes its outputs plus a ``<output>.manifest.json`` run record.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .checks import run_checks
from .integrator import NewtonConfig, NewtonFailure, compare_with_oracle, rollout
from .lie_poisson import ChartError, QuadraticHamiltonian, TrajectoryRecord, rk4_sample
from .network import WeightFileError, load_weights, save_weights
from .training import PAPER_SCALE, ConfigError, TrainingConfig, load_config, train

log = logging.getLogger("poisson_hj")

SIMULATE_HEADER = "step,t,mu1,mu2,mu3,H,C,newton_iters,newton_residual"
COMPARE_HEADER = "step,t,error_norm,H_model,H_oracle,C_model,C_oracle"


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _file_digest(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(primary: Path, command: str, config_digest: str | None, seed, started: str, outputs, extra=None) -> Path:
    manifest = {
        "command": command,
        "config_digest": config_digest,
        "seed": seed,
        "started": started,
        "finished": _now(),
        "output_paths": [str(p) for p in outputs],
        "tool_version": __version__,
        "backend": _backend.backend_name(),
    }
    if extra:
        manifest.update(extra)
    path = Path(str(primary) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def parse_vector(text: str) -> np.ndarray:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated reals, got {text!r}") from None
    if len(values) != 3 or not all(np.isfinite(values)):
        raise argparse.ArgumentTypeError(f"expected three comma-separated finite reals, got {text!r}")
    return np.array(values)


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return value


def _r(x) -> str:
    return repr(float(x))


# --- train --------------------------------------------------------------------


def cmd_train(args) -> int:
    started = _now()
    base = dict(PAPER_SCALE) if args.full_paper_scale else {}
    try:
        cfg = load_config(args.config, base) if args.config else TrainingConfig(**base)
    except ConfigError as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    loss_csv = Path(args.loss_csv) if args.loss_csv else out.with_suffix(".loss.csv")
    try:
        net, history = train(cfg, log_every=args.log_every)
    except (FloatingPointError, ChartError) as exc:
        print(f"error: training aborted: {exc}", file=sys.stderr)
        return 1
    save_weights(net, out)
    loss_csv.write_text(history.csv_text())
    write_manifest(
        out,
        "train",
        cfg.digest(),
        cfg.seed,
        started,
        [out, loss_csv],
        {"config": cfg.to_dict(), "final_loss": history.loss[-1] if history.loss else None},
    )
    print(f"wrote {out} and {loss_csv}")
    return 0


# --- simulate -------------------------------------------------------------------


def _load_model(path):
    try:
        return load_weights(path)
    except WeightFileError as exc:
        print(f"error: model: {exc}", file=sys.stderr)
        return None


def simulate_rows(traj: TrajectoryRecord, diagnostics) -> list[str]:
    rows = []
    for k, (mu, H, C) in enumerate(zip(traj.states, traj.hamiltonian_values, traj.casimir_values)):
        if k == 0:
            iters, resid = 0, 0.0
        else:
            iters, resid = diagnostics[k - 1].newton_iterations, diagnostics[k - 1].final_residual
        rows.append(",".join([str(k), _r(k * traj.step_size), _r(mu[0]), _r(mu[1]), _r(mu[2]), _r(H), _r(C), str(iters), _r(resid)]))
    return rows


def _newton_config(args) -> NewtonConfig:
    return NewtonConfig(tolerance=args.newton_tol, max_iterations=args.newton_max_iter, fd_step=args.newton_fd_step)


def cmd_simulate(args) -> int:
    started = _now()
    net = _load_model(args.model)
    if net is None:
        return 2
    out = Path(args.out)
    ham = QuadraticHamiltonian()
    status = 0
    try:
        traj, diags = rollout(net, args.h, args.ic, args.steps, _newton_config(args), ham)
    except (NewtonFailure, ChartError) as exc:
        traj, diags = exc.partial
        print(f"error: step {exc.step_index} failed: {exc}", file=sys.stderr)
        status = 1
    out.write_text("\n".join([SIMULATE_HEADER, *simulate_rows(traj, diags)]) + "\n")
    write_manifest(out, "simulate", net.training_config_digest, net.seed, started, [out], {"model": str(args.model), "model_digest": _file_digest(args.model)})
    return status


# --- compare --------------------------------------------------------------------


def cmd_compare(args) -> int:
    started = _now()
    ham = QuadraticHamiltonian()
    out = Path(args.out)
    status = 0
    extra = {}
    digest = seed = None
    if args.oracle_mode:
        states = rk4_sample(ham, args.ic, args.h, args.steps, args.oracle_substeps)
        traj = TrajectoryRecord.from_states(ham, args.h, states)
    else:
        if args.model is None:
            print("error: --model is required unless --oracle-mode is given", file=sys.stderr)
            return 2
        net = _load_model(args.model)
        if net is None:
            return 2
        digest, seed = net.training_config_digest, net.seed
        extra = {"model": str(args.model), "model_digest": _file_digest(args.model)}
        try:
            traj, _ = rollout(net, args.h, args.ic, args.steps, _newton_config(args), ham)
        except (NewtonFailure, ChartError) as exc:
            traj, _ = exc.partial
            print(f"error: step {exc.step_index} failed: {exc}", file=sys.stderr)
            status = 1
    report = compare_with_oracle(traj, ham, args.oracle_substeps)
    rows = [COMPARE_HEADER]
    for k in range(len(traj)):
        rows.append(
            ",".join(
                [
                    str(k),
                    _r(report.times[k]),
                    _r(report.error_norm[k]),
                    _r(report.h_model[k]),
                    _r(report.h_oracle[k]),
                    _r(report.c_model[k]),
                    _r(report.c_oracle[k]),
                ]
            )
        )
    out.write_text("\n".join(rows) + "\n")
    write_manifest(out, "compare", digest, seed, started, [out], extra)
    return status


# --- check ----------------------------------------------------------------------


def cmd_check(args) -> int:
    started = _now()
    out = Path(args.out)
    net = None
    report = {"tool_version": __version__, "backend": _backend.backend_name(), "model": args.model}
    if args.model is not None:
        try:
            net = load_weights(args.model)
        except WeightFileError as exc:
            report.update({"all_passed": False, "error": {"type": type(exc).__name__, "message": str(exc)}, "properties": []})
            out.write_text(json.dumps(report, indent=2) + "\n")
            print(f"error: model: {exc}", file=sys.stderr)
            return 2
    results = run_checks(net, seed=args.seed)
    report["properties"] = results
    report["all_passed"] = all(r["passed"] for r in results)
    out.write_text(json.dumps(report, indent=2) + "\n")
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']:<36} measured {r['measured']:.3e}  threshold {r['threshold']:.3e}")
    write_manifest(out, "check", net.training_config_digest if net else None, args.seed, started, [out])
    return 0 if report["all_passed"] else 1


# --- parser ---------------------------------------------------------------------


def _add_newton_flags(p):
    p.add_argument("--newton-tol", type=_positive_float, default=NewtonConfig.tolerance)
    p.add_argument("--newton-max-iter", type=int, default=NewtonConfig.max_iterations)
    p.add_argument("--newton-fd-step", type=_positive_float, default=NewtonConfig.fd_step)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poisson-hj", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the generating function")
    p.add_argument("--config", help="JSON training configuration (defaults to the desk-scale setup)")
    p.add_argument("--out", required=True, help="output weight file (JSON)")
    p.add_argument("--loss-csv", help="loss history CSV (default: <out stem>.loss.csv)")
    p.add_argument("--full-paper-scale", action="store_true", help="80k points, 500-250-250-250 network, 10k iterations, lr 1e-4")
    p.add_argument("--log-every", type=int, default=500)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", help="roll out the learned integrator")
    p.add_argument("--model", required=True)
    p.add_argument("--ic", type=parse_vector, required=True, help="initial condition, e.g. 1,1,2")
    p.add_argument("--h", type=_positive_float, default=0.1)
    p.add_argument("--steps", type=_nonneg_int, default=200)
    p.add_argument("--out", required=True)
    _add_newton_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="run the structural property suite")
    p.add_argument("--model")
    p.add_argument("--out", required=True, help="JSON report")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compare", help="compare a rollout with the RK4 reference")
    p.add_argument("--model")
    p.add_argument("--oracle-mode", action="store_true", help="use the RK4 reference itself as the model")
    p.add_argument("--ic", type=parse_vector, required=True)
    p.add_argument("--h", type=_positive_float, default=0.1)
    p.add_argument("--steps", type=_nonneg_int, default=200)
    p.add_argument("--oracle-substeps", type=int, default=100)
    p.add_argument("--out", required=True)
    _add_newton_flags(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "train" else logging.WARNING, format="%(asctime)s %(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

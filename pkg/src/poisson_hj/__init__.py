"""Learned Poisson integrators for the free rigid body.

A neural generating function ``S(t, p)`` is trained to satisfy the
Hamilton-Jacobi equation on the cotangent groupoid T*SO(3) over so*(3); its
Lagrangian bisection at ``t = h`` then gives a one-step map that is exactly
Poisson, so Casimirs are preserved to solver tolerance whatever the weights.
"""
__version__ = "0.1.0"

from ._backend import backend_name
from .groupoid import GroupoidPoint, pushforward_check, source, target, unit
from .integrator import NewtonConfig, StepDiagnostics, bisection_step, compare_with_oracle, rollout
from .lie_poisson import (
    ChartError,
    QuadraticHamiltonian,
    TrajectoryRecord,
    casimir,
    dexp,
    euler_rhs,
    eval_h_and_grad,
    exp_so3,
    hat,
    lie_poisson_bivector,
    rk4_rollout,
)
from .network import (
    GeneratingFunctionNet,
    InputGradient,
    eval_input_grad,
    eval_s,
    init_xavier,
    load_weights,
    loss_and_weight_grad,
    save_weights,
)
from .training import AdamState, TrainingConfig, adam_update, hj_residual, sample_collocation, train

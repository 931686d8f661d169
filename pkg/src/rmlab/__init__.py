"""rmlab: a numerical laboratory for residual minimization on 1-d interface problems.

The package answers a concrete question: when a neural network is trained to
minimize the strong-form residual of -(A u')' = f with a discontinuous
coefficient A, which function does it actually approximate?  It provides

* exact piecewise-polynomial solutions of the divergence-form equation and of
  its non-divergence ("effective") counterpart,
* the interface diagnostics that separate the two: jump sets, the mu jump
  functional, the residual-transform defect and its kernel test,
* hand-rolled forward jets (value/first/second derivative) and exact
  backpropagation for small tanh networks, so residual risks and their
  gradients carry no autodiff dependency, and
* training loops, deviation norms, and population risks used to measure which
  solution the trained network converges to.
"""

from .piecewise import (
    CoefficientDecomposition,
    JumpRecord,
    PiecewiseFunction1D,
    evaluate,
    jump_set,
    mu_functional,
    pw_sub,
)
from .exact import (
    BVPProblem,
    DiracCombination,
    KernelReport,
    SolutionFunction,
    h_minus_one_norm,
    kernel_membership,
    rm_transform,
    solve_modified,
    solve_original,
)
from .network import (
    NetworkParams,
    backprop_jet,
    fd_gradient,
    forward_jet,
    forward_jet_batch,
    grad_params,
    init_xavier,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    NumericalAbort,
    RiskValues,
    RunRecord,
    SampleSet,
    TrainConfig,
    draw_samples,
    empirical_risk,
    gradient_audit,
    risk_gradient,
    run_phases,
    supervised_risk,
    train,
)
from .analysis import (
    DeviationReport,
    QuadratureRule,
    deviation_report,
    norm,
    population_risk,
)
from .scenarios import (
    BUILTIN_SCENARIOS,
    ScenarioConfig,
    builtin_scenario,
    config_sha256,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_SCENARIOS",
    "BVPProblem",
    "CoefficientDecomposition",
    "DeviationReport",
    "DiracCombination",
    "JumpRecord",
    "KernelReport",
    "NetworkParams",
    "NumericalAbort",
    "PiecewiseFunction1D",
    "QuadratureRule",
    "RiskValues",
    "RunRecord",
    "SampleSet",
    "ScenarioConfig",
    "SolutionFunction",
    "TrainConfig",
    "backprop_jet",
    "builtin_scenario",
    "config_sha256",
    "deviation_report",
    "draw_samples",
    "empirical_risk",
    "evaluate",
    "fd_gradient",
    "forward_jet",
    "forward_jet_batch",
    "grad_params",
    "gradient_audit",
    "h_minus_one_norm",
    "init_xavier",
    "jump_set",
    "kernel_membership",
    "load_checkpoint",
    "mu_functional",
    "norm",
    "population_risk",
    "pw_sub",
    "risk_gradient",
    "rm_transform",
    "run_phases",
    "save_checkpoint",
    "solve_modified",
    "solve_original",
    "supervised_risk",
    "train",
    "__version__",
]

"""samlab: sharpness-aware minimization on desk-scale models.

Small, fully deterministic research library: SAM optimizer variants,
diagonal-linear-network implicit-bias verification via the hyperbolic-entropy
potential, projected-gradient-ascent sharpness measurement, and a numerical
check suite for the convergence lemmas and rate theorems.
"""

from ._accel import NUMBA_ENABLED
from .bias import (
    EffectiveAlphaAccumulator,
    PotentialSpec,
    SolverError,
    compare_bias_magnitudes,
    grad_phi,
    hypentropy_q,
    potential_phi,
    rho_safety_bound,
    solve_min_potential,
)
from .convergence import (
    RateCheckResult,
    check_alignment,
    check_descent,
    check_stochastic_alignment,
    check_stochastic_descent,
    verify_rate,
)
from .datasets import (
    Dataset,
    gen_1d_regression,
    gen_sparse_regression,
    load_dataset,
    population_test_loss,
    save_dataset,
)
from .models import (
    DiagNetParams,
    DiagonalLinearNet,
    LinearMarginModel,
    QuadraticObjective,
    ReluNet,
)
from .optim import (
    DivergenceError,
    OptimizerSpec,
    SwitchPlan,
    Trajectory,
    run_training,
)
from .rng import stream
from .sharpness import (
    SharpnessReport,
    ascent_suboptimality,
    linear_1_sharpness_closed_form,
    m_sharpness,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "EffectiveAlphaAccumulator",
    "PotentialSpec",
    "SolverError",
    "compare_bias_magnitudes",
    "grad_phi",
    "hypentropy_q",
    "potential_phi",
    "rho_safety_bound",
    "solve_min_potential",
    "RateCheckResult",
    "check_alignment",
    "check_descent",
    "check_stochastic_alignment",
    "check_stochastic_descent",
    "verify_rate",
    "Dataset",
    "gen_1d_regression",
    "gen_sparse_regression",
    "load_dataset",
    "population_test_loss",
    "save_dataset",
    "DiagNetParams",
    "DiagonalLinearNet",
    "LinearMarginModel",
    "QuadraticObjective",
    "ReluNet",
    "DivergenceError",
    "OptimizerSpec",
    "SwitchPlan",
    "Trajectory",
    "run_training",
    "stream",
    "SharpnessReport",
    "ascent_suboptimality",
    "linear_1_sharpness_closed_form",
    "m_sharpness",
    "__version__",
]

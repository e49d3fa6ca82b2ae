"""Spectral boundary-observer design for counter-flow heat exchangers.

The package designs an output-injection gain that moves the unstable
part of the error spectrum of a two-stream transport system so the
reconstruction error decays at a prescribed exponential rate, and
verifies the design by direct simulation.  See ``specobs.cli`` for the
batch interface.
"""

__version__ = "0.1.0"

from .model import (
    ExchangerParams,
    Field,
    SpatialGrid,
    SystemMatrices,
    exchange_norm,
    l2_inner,
    l2_norm,
    l2_norm_real,
    system_matrices,
    trapezoid_weights,
)
from .discretize import (
    DiscreteGenerator,
    EulerSolver,
    TimeSeries,
    assemble_generator,
    euler_factorization,
    simulate,
    step_implicit_euler,
    unconstrained_indices,
)
from .spectral import (
    CharacteristicCoefficients,
    Mode,
    Spectrum,
    characteristic_coefficients,
    characteristic_f,
    discrete_spectrum,
    eigenfunction,
    mode_residual,
    newton_polish,
    unstable_modes,
)
from .design import (
    DesignBundle,
    HautusError,
    ObservabilityReport,
    ObserverGain,
    ProjectedSystem,
    RiccatiError,
    UnstableBasis,
    design_gain,
    design_observer,
    hautus_check,
    orthonormalize,
    project_system,
    riccati_residual,
    synthesize_kappa,
)
from .experiment import (
    BoundaryInput,
    DiagnosticsReport,
    ExperimentConfig,
    InitialProfile,
    SimResult,
    default_fit_window,
    diagnostics,
    fit_decay_rate,
    initial_error_field,
    jsonable,
    prescribed_overshoot,
    run_error_experiment,
    run_plant_observer_demo,
    write_json,
    write_norms_csv,
    write_snapshots_csv,
)
from .validation import CheckResult, run_validation_suite

__all__ = [
    "__version__",
    # model
    "ExchangerParams", "Field", "SpatialGrid", "SystemMatrices",
    "exchange_norm", "l2_inner", "l2_norm", "l2_norm_real",
    "system_matrices", "trapezoid_weights",
    # discretize
    "DiscreteGenerator", "EulerSolver", "TimeSeries", "assemble_generator",
    "euler_factorization", "simulate", "step_implicit_euler",
    "unconstrained_indices",
    # spectral
    "CharacteristicCoefficients", "Mode", "Spectrum",
    "characteristic_coefficients", "characteristic_f", "discrete_spectrum",
    "eigenfunction", "mode_residual", "newton_polish", "unstable_modes",
    # design
    "DesignBundle", "HautusError", "ObservabilityReport", "ObserverGain",
    "ProjectedSystem", "RiccatiError", "UnstableBasis", "design_gain",
    "design_observer", "hautus_check", "orthonormalize", "project_system",
    "riccati_residual", "synthesize_kappa",
    # experiment
    "BoundaryInput", "DiagnosticsReport", "ExperimentConfig",
    "InitialProfile", "SimResult", "default_fit_window", "diagnostics",
    "fit_decay_rate", "initial_error_field", "jsonable",
    "prescribed_overshoot", "run_error_experiment",
    "run_plant_observer_demo", "write_json", "write_norms_csv",
    "write_snapshots_csv",
    # validation
    "CheckResult", "run_validation_suite",
]

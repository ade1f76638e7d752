"""Reliability, battery lifetime and cost planning for grant-free LPWA IoT networks."""
from .config import ExperimentSettings, load_document, load_scenario
from .errors import (
    DomainError,
    Infeasible,
    InfeasibleBandwidth,
    MissingPopulation,
    NonConvergence,
    ParseError,
    PlanningError,
    SingularityError,
    Unsatisfiable,
    UnsupportedFading,
    ValidationError,
)
from .interference import activity_factors, laplace_inner, laplace_outer, laplace_total
from .lifetime import (
    LifetimeDefinition,
    application_lifetime,
    ap_energy_per_time,
    device_lifetime,
    expected_trials,
    network_cost,
)
from .optimize import (
    ProvisioningSolver,
    lambda_a_of_W,
    n_of_P,
    operation_optimize,
    p_min,
    provision_optimize,
    tradeoff_coefficients,
)
from .reliability import (
    SuccessMethod,
    h_cluster,
    h_field,
    outage,
    p_success_at,
    p_success_spatial,
    reliability,
)
from .scenario import Scenario, reference_scenario, validate

__all__ = [name for name in dir() if not name.startswith("_")]

"""Expected costs, revenues and ROI of ordered defect-detection plans."""
from .economics import (
    CostBreakdown,
    direct_cost_combined,
    direct_cost_single,
    evaluate_scenario,
    future_cost_combined,
    future_cost_single,
    revenue_combined,
    revenue_single,
    roi,
)
from .errors import (
    DomainError,
    InfeasibleBudgetError,
    QAEconError,
    ScenarioParseError,
    ScenarioValidationError,
    UndefinedROIError,
    UnknownIdError,
)
from .model import (
    DifficultyCurve,
    FaultEventProbabilities,
    FaultSpec,
    Scenario,
    TechniqueApplication,
    eval_difficulty,
    fault_event_probabilities,
    non_detection_prior,
    validate_scenario,
)
from .planner import Budget, optimize_effort, optimize_order, sensitivity_oat
from .simulator import SimulationConfig, SimulationResult, efficiency, simulate

__version__ = "0.1.0"

"""Hamiltonian flows, trapping, expansion rates and transport."""
from .flow import (
    classify_trapping,
    find_trapped_set,
    flow_invariants,
    group_defect,
    integrate_flow,
    project_to_shell,
    symplectic_form,
)
from .rates import (
    Perturbation,
    PinchingReport,
    ScanEntry,
    check_pinching,
    expansion_rates,
    perturbation_stability_scan,
    perturbed_system,
)
from .system import (
    ESCAPED,
    TRAPPED_BACKWARD,
    TRAPPED_BOTH,
    TRAPPED_FORWARD,
    ExpansionRates,
    FlowResult,
    HamiltonianSystem,
    PhasePoint,
    TrappedSample,
)
from .transport import (
    DefiningData,
    defining_function_data,
    poisson_bracket,
    solve_transport,
    transport_residual,
)

__all__ = [
    "ESCAPED", "TRAPPED_BACKWARD", "TRAPPED_BOTH", "TRAPPED_FORWARD",
    "DefiningData", "ExpansionRates", "FlowResult", "HamiltonianSystem", "Perturbation",
    "PhasePoint", "PinchingReport", "ScanEntry", "TrappedSample",
    "check_pinching", "classify_trapping", "flow_invariants", "group_defect", "symplectic_form", "defining_function_data", "expansion_rates",
    "find_trapped_set", "integrate_flow", "perturbation_stability_scan", "perturbed_system",
    "poisson_bracket", "project_to_shell", "solve_transport", "transport_residual",
]

"""Two-link stochastic fluid queue with spillback: stability conditions,
throughput bounds, resilience metrics and an exact event-driven simulator."""

from .analysis import (
    ResilienceResult,
    SweepRow,
    ThroughputBounds,
    queue_bound,
    resilience_alpha,
    sweep,
    theta_min,
    throughput_bounds,
    throughput_lower_bound,
    throughput_upper_bound,
)
from .backend import active_backend
from .markov import steady_state, transition_matrix
from .model import DischargeRates, discharge_rates, vector_field
from .params import (
    ConstantInflow,
    HybridState,
    InflowSpec,
    ModeResponsiveInflow,
    ParamError,
    StateSpaceError,
    SystemParams,
    ValidationReport,
    validate_params,
)
from .simulate import (
    Merge,
    SimConfig,
    SimStats,
    SingleFinite,
    SingleInfinite,
    Split,
    Topology,
    TwoLink,
    next_event,
    simulate,
    simulate_merge_stability_demo,
)
from .spectral import (
    BpdqInvariantMeasure,
    SingularDriftError,
    SpectralSolution,
    StabilityPreconditionError,
    bpdq_invariant_measure,
    bpdq_is_stable,
    finite_buffer_spectrum,
    spillback_prob_feedback,
)
from .stability import (
    DriftReport,
    Infeasible,
    NecessaryVerdict,
    StabilityCertificate,
    check_necessary,
    check_necessary_feedback,
    check_sufficient,
    check_sufficient_feedback,
    verify_drift,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

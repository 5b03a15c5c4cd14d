"""Quantum dynamics conditioned on realistic quantum clocks."""

from ._accel import NUMBA_ENABLED, backend_name
from .clocks import (
    AccuracyLaw,
    ClockDensity,
    ClockModel,
    UnreachableReadingError,
    accuracy_bound,
    build_free_particle_clock,
    build_ideal_clock,
    clock_density,
    delta_clock_density,
    density_moments,
    fundamental_b_rate,
    gaussian_clock_density,
    trapezoid_weights,
)
from .dephasing import (
    SpinEnvironmentModel,
    SuppressionReport,
    exact_reduced_coherence,
    interference_factor,
    make_factorial_model,
    make_harmonic_model,
    make_incommensurate_model,
    minimal_suppression_n,
    reduced_system_state,
    revival_suppression,
    revival_time_estimate,
    rms_coherence,
)
from .events import (
    EventRecord,
    PropertyLattice,
    actualized_properties,
    detect_event,
    distinguishability,
    pinch,
    property_included,
    rho_event,
    rho_mod,
)
from .relational import (
    EmpiricalSpreadRate,
    EvolutionSetup,
    GridMismatchError,
    MasterIntegrationError,
    ReductionEvent,
    Trajectory,
    ZeroProbabilityError,
    conditional_probabilities,
    conditional_probability,
    effective_projector,
    history_probability,
    master_evolve,
    newtonian_trajectory,
    offdiag_decay_factor,
    physical_time_state,
    quasi_projector_defect,
    reduce_state,
)
from .states import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DensityOperator,
    HilbertSpace,
    Observable,
    ProjectorFamily,
    ValidationError,
    interval_projector,
    operator_from_json,
    operator_to_json,
    partial_trace,
    partial_trace_matrix,
    projector_family,
    tensor,
    tensor_with_identity,
    unitary_evolve,
)

__version__ = "0.1.0"

"""Numerical laboratory for map families driven by bounded i.i.d. parameter noise.

The package studies what small random perturbations of a parametric
family of maps do to its long-run behaviour: which regions of phase
space trap the noisy dynamics, what stationary measures live on them,
how starting points split between competing regions, and how classical
diagnostics (Lyapunov exponents, time averages, image-regularity
audits) respond to the noise level.
"""
from .domains import (
    DomainApprox,
    SupportGraph,
    closed_recurrent_classes,
    compare_domains,
    cyclic_period,
    detect_domains,
    domain_from_parts,
    pairwise_disjoint,
    period_and_cyclic_levels,
    verify_r_transitivity,
)
from .families import BUILTIN_NAMES, ParametricFamily, VectorField2D, make_builtin
from .measures import (
    BasinProfile,
    EmpiricalMeasure,
    HypothesisAReport,
    NoAtomsReport,
    SinkReport,
    basin_classify,
    basin_continuity_probe,
    cesaro_pushforward,
    check_hypothesis_A,
    check_no_atoms,
    l1_distance,
    lyapunov_top,
    make_observable,
    time_average_oscillation,
    verify_sink_perturbation,
)
from .perturbation import (
    OrbitSample,
    PerturbationSpace,
    PerturbationStream,
    birkhoff_average,
    estimate_recurrence_probability,
    first_entry_time,
    iterate,
    sample_parameter,
    sample_parameters,
    sample_parameters_stratified,
    sample_parameters_stratified_grouped,
    write_orbit_csv,
)
from .phase_space import (
    CLAMP,
    PERIODIC,
    GridSpec,
    PhaseBox,
    canonicalize,
    cell_centers,
    cell_geometry,
    cell_rect,
    distance,
    locate,
    wrap_displacement,
)
from .ulam import (
    NonConvergenceError,
    TransitionMatrix,
    build_transition,
    push_forward,
    stationary_measures,
    stationary_vector,
    write_matrix_coo,
    write_vector_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_NAMES",
    "BasinProfile",
    "CLAMP",
    "DomainApprox",
    "EmpiricalMeasure",
    "GridSpec",
    "HypothesisAReport",
    "NoAtomsReport",
    "NonConvergenceError",
    "OrbitSample",
    "PERIODIC",
    "ParametricFamily",
    "PerturbationSpace",
    "PerturbationStream",
    "PhaseBox",
    "SinkReport",
    "SupportGraph",
    "TransitionMatrix",
    "VectorField2D",
    "basin_classify",
    "basin_continuity_probe",
    "birkhoff_average",
    "build_transition",
    "canonicalize",
    "cell_centers",
    "cell_geometry",
    "cell_rect",
    "cesaro_pushforward",
    "check_hypothesis_A",
    "check_no_atoms",
    "closed_recurrent_classes",
    "compare_domains",
    "cyclic_period",
    "detect_domains",
    "distance",
    "domain_from_parts",
    "estimate_recurrence_probability",
    "first_entry_time",
    "iterate",
    "l1_distance",
    "locate",
    "lyapunov_top",
    "make_builtin",
    "make_observable",
    "pairwise_disjoint",
    "period_and_cyclic_levels",
    "push_forward",
    "sample_parameter",
    "sample_parameters",
    "sample_parameters_stratified",
    "sample_parameters_stratified_grouped",
    "stationary_measures",
    "stationary_vector",
    "time_average_oscillation",
    "verify_r_transitivity",
    "verify_sink_perturbation",
    "wrap_displacement",
    "write_matrix_coo",
    "write_orbit_csv",
    "write_vector_csv",
]

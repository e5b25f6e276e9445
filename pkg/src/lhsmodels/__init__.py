"""Certification and generation of local-hidden-state models via SDP.

The package decides whether an entangled state admits a local-hidden-state
model for projective measurements or POVMs (certification), searches families
and witness directions for maximally entangled local states (generation), and
estimates how common local entangled two-qubit states are under standard
random-state measures (volume estimation).
"""

from .errors import LhsError
from .operators import (
    BipartiteCut,
    DensityMatrix,
    HermitianOperator,
    gell_mann_basis,
    is_ppt,
    joint_probabilities,
    negativity,
    operator_from_json,
    operator_to_json,
    partial_trace,
    partial_transpose,
    tensor,
    trace_distance,
)
from .geometry import (
    SOLID_NAMES,
    BlochDirection,
    DeterministicStrategy,
    MeasurementSet,
    depolarized_projector,
    insphere_radius,
    measurement_set,
    projector,
    random_directions,
    set_from_json,
    set_to_json,
    solid_directions,
    strategies,
)
from .conic import Solution, SolverConfig
from .states import (
    BELL_VECTORS,
    FamilyPoint,
    RngStream,
    amplitude_damped,
    bell_diagonal,
    haar_unitary,
    noisy_tripartite,
    sample_bures,
    sample_hs,
    werner,
)
from .witnesses import (
    QUANTIFIER_KINDS,
    GmeWitness,
    WitnessResult,
    gme_witness,
    optimal_witness,
    quantify,
    witness_value,
)
from .lhs import (
    Assemblage,
    CertificateReport,
    CertificationOutcome,
    FamilyResult,
    FamilySpec,
    GeneratedState,
    GeneratorStep,
    GeneratorTrace,
    LhsCertificate,
    assemblage,
    certificate_from_json,
    certificate_to_json,
    certify_multipartite,
    certify_povm,
    certify_projective,
    family_state,
    generate_local_state,
    iterate_generator,
    maximize_family,
    named_family,
    verify_certificate,
)
from .campaigns import (
    CampaignConfig,
    CampaignRecord,
    run_gme_campaign,
    run_generator_campaign,
    run_table_reproduction,
    run_threshold_bisection,
    run_volume_estimation,
)

__version__ = "0.1.0"

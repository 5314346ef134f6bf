"""Sequential measurement and control of small open quantum systems.

Two pipelines around one simulation core:

* stochastic-Zeno survival statistics under repeated projective
  measurements, with the large-deviation predictor of the most probable
  survival probability;
* dynamical-decoupling noise spectroscopy, reconstructing the environmental
  spectral density by filter orthogonalization.
"""

__version__ = "0.1.0"

from .errors import (
    AccuracyError,
    AlignmentError,
    ConfigValidationError,
    CoverageError,
    DegenerateFilterSetError,
    ExpansionDomainError,
    InsufficientDataError,
    InvalidInputError,
    NumericalConsistencyError,
    RankError,
    SaturationError,
    ZenoSenseError,
    ZeroProbabilityError,
)
from .quantum import (
    DensityMatrix,
    HamiltonianSpec,
    MeasurementOperator,
    MeasurementSet,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    apply_measurement,
    basis_projector,
    eta,
    ket,
    ket_density,
    projector,
    propagate,
    zeno_hamiltonian,
)
from .noise import (
    HarmonicMixture,
    NoiseModel,
    NoisePath,
    OrnsteinUhlenbeck,
    RandomTelegraph,
    derive_seed,
    sample_path,
    stream_rng,
)
from .zeno import (
    BimodalInterval,
    EmpiricalInterval,
    ExponentialInterval,
    FixedInterval,
    IntervalDistribution,
    LdComparison,
    LdPrediction,
    SurvivalRecord,
    UniformInterval,
    ZenoRun,
    compare_ld,
    ld_predict,
    run_zeno,
)
from .ddfilter import (
    CHI_INVERSION_PREFACTOR,
    DEFAULT_FILTER_NORMALIZATION,
    DecoherenceValue,
    FilterFunction,
    LEGACY_FILTER_NORMALIZATION,
    ModulationFunction,
    PulseSequence,
    RamseyResult,
    chi_frequency_domain,
    chi_time_domain,
    default_omega_grid,
    filter_function,
    fourier_modulation,
    make_equidistant_sequence,
    modulation,
    ramsey_mc,
)
from .reconstruct import (
    FilterSet,
    OverlapSystem,
    Reconstruction,
    TWO_SIDED_TO_BAND,
    band_relative_l2,
    forward_chis,
    overlap_matrix,
    reconstruct,
    simpson_weights,
    transformed_coeffs,
    transformed_filters,
)

"""Pseudo-spectral toolkit for fractional stochastic active scalar equations on the torus."""

__version__ = "0.1.0"

from .analysis import (
    RegimeCertificate,
    RegimeQuery,
    admissible_exponents,
    alpha0,
    moment_estimate,
    regime_classify,
    weak_form_residual,
)
from .constitutive import (
    ModeCategory,
    VelocityLaw,
    classify_mode,
    divergence,
    nonlinear_term,
    preset,
    velocity,
)
from .errors import BlowUpError, ConfigError, InsufficientDataError, NonContractionError
from .integrator import (
    EnsembleReport,
    SolverConfig,
    StoppingLadder,
    Trajectory,
    TrajectoryState,
    hitting_times,
    picard_solve,
    resume,
    run_ensemble,
    run_trajectory,
    step,
    stochastic_convolution_variance,
)
from .noise import (
    CovarianceSpec,
    DiffusionSpec,
    NoiseIncrement,
    RngStream,
    apply_diffusion,
    hs_norm,
    lipschitz_probe,
    sample_increment,
    trace,
)
from .spectral import (
    MultiplierOp,
    PhysicalField,
    SpectralField,
    TorusGrid,
    dealias,
    fractional_laplacian,
    semigroup_apply,
    sobolev_norm,
    stream_function,
    to_physical,
    to_spectral,
)

"""Spectral simulation and normal-form diagnostics for a coupled KdV system on the torus."""

__version__ = "0.1.0"

from .errors import (
    BlowUpError,
    ConfigurationError,
    DiagnosticError,
    DomainError,
    HirotaError,
    InvariantViolation,
    ResonanceError,
    UnresolvedMuError,
)
from .spectral import GridSpec, SpectralField, dealiased_product, dft_forward, dft_inverse, sobolev_norm
from .system import HSParams, IFRK4, Trajectory, simulate
from .normal_form import (
    NormalForm,
    ResonanceCoefficients,
    bilinear_B,
    compute_coefficients,
    resonant_rho,
    trilinear_R,
    verify_integrated_identity,
)
from .diophantine import (
    ContinuedFraction,
    MuAssignment,
    continued_fraction,
    critical_index,
    min_resonance_gap,
    mu_of_coefficients,
    smoothing_gain,
)

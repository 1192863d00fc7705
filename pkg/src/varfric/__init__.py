"""varfric: variable-friction Langevin dynamics and its small-mass limits.

Simulates the inertial Langevin equation with position-dependent friction,
its mollified-noise regularization, and the candidate first-order limits
(Ito and Stratonovich); provides diagnostics for the path decomposition
that exhibits the failure of the naive small-mass limit, one-dimensional
generalized diffusions through scale/speed functions, and periodic
homogenization of fast-oscillating friction.
"""

from ._kernels import HAVE_COMPILED
from .model import (
    DriftField,
    FieldCatalog,
    FrictionField,
    ModelSpec,
    ValidationReport,
    constant_drift,
    gradient_check,
    validate_model,
    zero_drift,
)
from .noise import (
    MollifiedNoise,
    MollifierKernel,
    WienerPath,
    build_kernel,
    derivative_consistency,
    make_generator,
    mollification_error,
    mollify,
    sample_wiener,
)

__version__ = "0.1.0"

__all__ = [
    "HAVE_COMPILED",
    "DriftField",
    "FieldCatalog",
    "FrictionField",
    "ModelSpec",
    "ValidationReport",
    "constant_drift",
    "gradient_check",
    "validate_model",
    "zero_drift",
    "MollifiedNoise",
    "MollifierKernel",
    "WienerPath",
    "build_kernel",
    "derivative_consistency",
    "make_generator",
    "mollification_error",
    "mollify",
    "sample_wiener",
    "__version__",
]

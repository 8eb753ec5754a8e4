"""Assessment toolkit for AR-assisted neuronavigation measured with an external tracker."""

__version__ = "0.1.0"

from .geometry import LabeledPointSet, RigidTransform, apply, compose, invert  # noqa: E402
from .registration import RigidRegistration, RegistrationResult, solve_rigid  # noqa: E402
from .sphere import SphereFit, SphereFitter, fit_sphere, fit_sphere_algebraic, refine_sphere_geometric  # noqa: E402
from .stats import ZTestResult, normal_cdf, z_test  # noqa: E402

__all__ = [
    "LabeledPointSet",
    "RigidTransform",
    "RigidRegistration",
    "RegistrationResult",
    "SphereFit",
    "SphereFitter",
    "ZTestResult",
    "apply",
    "compose",
    "fit_sphere",
    "fit_sphere_algebraic",
    "invert",
    "normal_cdf",
    "refine_sphere_geometric",
    "solve_rigid",
    "z_test",
]

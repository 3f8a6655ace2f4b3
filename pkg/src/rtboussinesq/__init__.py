"""Linear and nonlinear Rayleigh–Taylor instability of the semi-dissipative
Boussinesq system in a horizontal strip with Navier slip walls."""

__version__ = "0.1.0"

from .params import PhysicalParams, SteadyProfile, ValidationError, linear_profile, make_profile  # noqa: E402,F401

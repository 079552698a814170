"""Helmholtz transmission through randomly perturbed star-shaped scatterers.

Domain mapping onto the unit disk, a radial PML, curved Lagrange finite
elements, far-field evaluation by a volume formula, and Smolyak quadrature
for the expected far-field pattern.  The disk series solution serves as the
reference throughout.
"""

__version__ = "0.1.0"

from .farfield import FarFieldPattern, mie_farfield, mie_solve  # noqa: E402
from .pml import PmlProfile  # noqa: E402
from .shape import CutoffChi, DomainMap, RadialShape  # noqa: E402
from .solver import MeshSettings, TransmissionSolver, make_mesh  # noqa: E402

__all__ = ["CutoffChi", "DomainMap", "FarFieldPattern", "MeshSettings", "PmlProfile",
           "RadialShape", "TransmissionSolver", "make_mesh", "mie_farfield", "mie_solve"]

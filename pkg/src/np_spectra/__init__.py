"""np-spectra: 2D boundary-integral spectral toolkit.

Computes Fredholm eigenvalues of the Neumann-Poincare operator, recovers
them from polarization-tensor data at complex contrasts, and solves the
inverse shape-design problem by regularized Gauss-Newton.
"""

__version__ = "0.1.0"

from .geometry import BoundaryMesh, CurveSpec, area_and_moment, build_mesh, perturb_mesh
from .operator import OperatorMatrix, Spectrum, assemble_np, assemble_single_layer, spectrum

__all__ = [
    "BoundaryMesh",
    "CurveSpec",
    "OperatorMatrix",
    "Spectrum",
    "area_and_moment",
    "assemble_np",
    "assemble_single_layer",
    "build_mesh",
    "perturb_mesh",
    "spectrum",
    "__version__",
]

"""Virtual element solver for the Poisson problem on polygonal meshes.

The package is layered bottom-up: geometry (facets, triangulation,
polyhedra), monomials (scaled basis algebra), quadrature (edge/polygon/face
rules, compression, the analytic oracle), vemspace (degrees of freedom and
edge traces), localmat (element matrices and projectors), mesh (storage,
file format, generators, cut/merge, global dofs), system (assembly, boundary
conditions, solver, error norms) and cli.
"""

__version__ = "0.1.0"

from .errors import PolyVemError

__all__ = ["PolyVemError", "__version__"]

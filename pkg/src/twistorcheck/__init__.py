"""Numerical verification toolkit for twistor-space geometry over explicit
scalar-flat Kahler 4-manifold charts.

The package certifies, at sampled chart points: curvature-operator block
structure, integrability of the tautological almost-complex structure on
plain and modified twistor spaces, the structural connection/curvature
identities behind it, balancedness of a family of Hermitian 2-forms, the
wedge-cone constants, conformality of equivariant fiber maps, and the
fiberwise completeness criterion.
"""

__version__ = "0.1.0"

"""Tangent Lie group bundles and tangent groupoids of Heisenberg manifolds.

Builds the graded tangent group of a hyperplane distribution from chart
data (a frame of polynomial vector fields) and checks the coordinate
normalizations, group laws, dilation limits, diffeomorphism approximations
and groupoid composition limits by exact jet arithmetic plus measured
convergence rates.
"""

from ._kernel import IMPL_NAME as kernel_name

__version__ = "0.1.0"

__all__ = ["kernel_name", "__version__"]

"""Stability of constant-mean-curvature unduloids spanning a slab.

Submodules
----------
quadrature   singular one-dimensional integrals, two independent rules
family       the unduloid family ``v(z; t)`` and its building blocks
geometry     volume, areas and mean curvature of family members
calculus     derivatives in ``t`` and critical points of the volume
spectrum     discrete stability operator, eigenvalues and continuation
report       stability verdicts, hypothesis audit and figure tables
cli          command-line front end
"""

from .family import T_MIN, SlabConfig
from .quadrature import DEFAULT_SPEC, ORACLE_SPEC, Method, QuadratureSpec

__all__ = ["T_MIN", "SlabConfig", "QuadratureSpec", "Method", "DEFAULT_SPEC", "ORACLE_SPEC"]
__version__ = "0.1.0"

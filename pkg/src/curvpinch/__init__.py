"""Numerical verification toolkit for conformally flat constant-curvature models.

Subpackages
-----------
tensor_core  pointwise curvature algebra (traces, decompositions, inequalities)
charts       finite-difference differential operators on coordinate charts
models       chart constructors for the model geometries and the chart corpus
derdzinski   periodic warping functions with constant scalar curvature
pinching     integral pinching functional and equality-case classification
cli          command-line verification driver
"""

from . import charts, derdzinski, models, pinching, tensor_core

__all__ = ["charts", "derdzinski", "models", "pinching", "tensor_core"]
__version__ = "0.1.0"

"""Fundamental tones of weighted Dirichlet integrals on Euclidean domains,
conformal-invariance verification, and distortion estimation from tone ratios.
"""

__version__ = "0.1.0"

from ._kernels import HAVE_FAST

__all__ = ["HAVE_FAST", "__version__"]

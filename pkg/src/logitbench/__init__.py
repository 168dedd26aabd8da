"""Benchmark harness for variable selection and inference in logistic
regression under model uncertainty."""

from ._kernels import HAVE_COMPILED, KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["HAVE_COMPILED", "KERNEL_BACKEND", "__version__"]

"""Hand-authored layer kernels: forward passes, exact adjoints, activations,
and finite-difference gradient checking."""

from . import activations, layers  # noqa: F401

"""Simulation and control toolkit for a modular variable-stiffness
transhumeral prosthesis: elastic actuator maps, joint and motor models,
the 200 Hz control stack, a deterministic scenario harness, and a live
telemetry server."""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]

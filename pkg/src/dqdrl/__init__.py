"""Quality-diversity search over policy parameters with estimated gradients.

Submodules: ``archive`` (grid archive), ``es_grad`` (mirrored ES gradients,
Adam), ``cma`` (coefficient CMA-ES), ``nn`` (small MLPs), ``td3`` (critic
training and policy gradients), ``envs``, ``algorithms`` (schedulers) and
``harness`` (runner and CLI).
"""
from ._accel import backend

__version__ = "0.1.0"

__all__ = ["backend", "__version__"]

"""Resilience layer for driving stacks: hazard monitoring, buffer-gated
control takeover, and IDM-based mitigation, packaged with a deterministic
2D simulator for closed-loop evaluation."""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401

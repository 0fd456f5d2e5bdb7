"""Interpolatory model reduction and controller discretisation for descriptor LTI models."""

from .lti import (
    DelayedDescriptorModel,
    DescriptorModel,
    FrequencyGrid,
    eval_transfer,
    frequency_response,
    gramians,
    h2_norm,
    hinf_norm,
    is_stable,
    poles,
    fl_gramian,
)

__version__ = "0.1.0"

__all__ = [
    "DelayedDescriptorModel", "DescriptorModel", "FrequencyGrid", "eval_transfer",
    "frequency_response", "gramians", "h2_norm", "hinf_norm", "is_stable", "poles",
    "fl_gramian", "__version__",
]

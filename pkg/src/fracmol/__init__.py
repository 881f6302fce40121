"""Molecular communication over space-time fractional diffusion channels.

Analytic propagator via Fox's H-function, passive-receiver counts, threshold
detection error rates, and a subordination Monte Carlo oracle.
"""

from .channel import NORMAL, SUBDIFFUSION, SUPERDIFFUSION, ChannelParams, propagator_pdf
from .detection import BitFrame, DecisionRule, ber_mbit, ber_sbit, ml_threshold
from .reception import LinkConfig, peak_time, presence_probability

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "LinkConfig",
    "BitFrame",
    "DecisionRule",
    "NORMAL",
    "SUBDIFFUSION",
    "SUPERDIFFUSION",
    "propagator_pdf",
    "presence_probability",
    "peak_time",
    "ber_sbit",
    "ber_mbit",
    "ml_threshold",
]

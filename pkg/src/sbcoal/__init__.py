"""Seed-bank Wright-Fisher model, its diffusion limit and the seed-bank coalescent."""
from .model_core import DiscreteParams, ParameterError, ScaledParams, replicate_rng

__version__ = "0.1.0"

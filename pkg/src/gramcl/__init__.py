"""Streaming continual learning with frozen random projections,
order-invariant Gram/prototype accumulation, and closed-form decorrelated
linear heads, plus NCM / streaming-LDA baselines and verification tooling.
"""

__version__ = "0.1.0"

from . import accumulator, baselines, projection, protocols, solver, store, synth, theory  # noqa: F401

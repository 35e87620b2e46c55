"""Feature export from pre-trained vision backbones.

Writes the on-disk feature-store format consumed by the continual-learning
engine, with optional first-session parameter-efficient adaptation of the
backbone before export. The only coupling to the engine is the file format.
"""

__version__ = "0.1.0"

from . import backbones, config, extract, petl, storefmt, train  # noqa: F401

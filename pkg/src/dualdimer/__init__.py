"""High-order saddle-point search with paired subspace dimers, and
physics-constrained network training with the minimax weighting scheme."""

__version__ = "0.1.0"

from . import convergence, diffnet, harness, heat, landscapes, pcnn, saddle

__all__ = [
    "convergence",
    "diffnet",
    "harness",
    "heat",
    "landscapes",
    "pcnn",
    "saddle",
    "__version__",
]

"""Trapped-ion simulator of wavepacket dynamics around a conical intersection.

Evolves a qubit coupled to two bosonic modes under a pair of simultaneous
spin-dependent forces, emulates the mid-circuit characteristic-function
reconstruction, and inverts the measurements to motional probability
densities showing the geometric-phase interference node.
"""

from .fockspace import (
    HilbertConfig,
    MixedState,
    PureState,
    TruncationOverflowError,
)
from .hamiltonians import ModelParams, SdfParams, SidebandParams
from .dynamics import IntegratorConfig, NoiseParams

__version__ = "0.1.0"

__all__ = [
    "HilbertConfig",
    "PureState",
    "MixedState",
    "TruncationOverflowError",
    "ModelParams",
    "SdfParams",
    "SidebandParams",
    "IntegratorConfig",
    "NoiseParams",
    "__version__",
]
